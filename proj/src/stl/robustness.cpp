#include "stlsynth/stl/robustness.hpp"

#include <algorithm>

namespace stlsynth::stl {

namespace {

// Numeric adapters giving the trace evaluator one vocabulary over plain
// doubles and tape variables.
struct DoubleNum {
  using S = double;
  S constant(double v) const { return v; }
  S neg(S x) const { return -x; }
  S sub_const(S x, double c) const { return x - c; }
  S min2(S a, S b) const { return stlsynth::min2(a, b); }
  S max2(S a, S b) const { return stlsynth::max2(a, b); }
  S softmin(std::span<const S> xs, double t) const { return stlsynth::softmin_agg(xs, t); }
  S softmax(std::span<const S> xs, double t) const { return stlsynth::softmax_agg(xs, t); }
};

struct VarNum {
  ad::Tape* tape;
  using S = ad::Var;
  S constant(double v) const { return tape->constant(v); }
  S neg(S x) const { return tape->neg(x); }
  S sub_const(S x, double c) const { return tape->add_imm(x, -c); }
  S min2(S a, S b) const { return tape->min2(a, b); }
  S max2(S a, S b) const { return tape->max2(a, b); }
  S softmin(std::span<const S> xs, double t) const { return tape->softmin_agg(xs, t); }
  S softmax(std::span<const S> xs, double t) const { return tape->softmax_agg(xs, t); }
};

const Mu& resolve_mu(const Formula& f, const PredicateLibrary* lib) {
  if (f.mu) return *f.mu;
  if (lib)
    if (const Mu* m = lib->find(f.pred_name)) return *m;
  throw std::invalid_argument("unknown predicate '" + f.pred_name + "'");
}

template <class Num>
class TraceEval {
 public:
  using S = typename Num::S;
  using States = std::span<const std::vector<S>>;

  TraceEval(Num num, States states, const PredicateLibrary* lib, const EvalOptions& opts)
      : num_(num), states_(states), lib_(lib), opts_(opts), last_(static_cast<int>(states.size()) - 1) {}

  // Robustness of f at every suffix index 0..T.
  std::vector<S> trace(const Formula& f) {
    const int n = last_ + 1;
    std::vector<S> out;
    out.reserve(static_cast<std::size_t>(n));
    switch (f.kind) {
      case FKind::kTrue: {
        for (int t = 0; t < n; ++t) out.push_back(num_.constant(f.rho_max));
        return out;
      }
      case FKind::kPred: {
        const Mu& mu = resolve_mu(f, lib_);
        for (int t = 0; t < n; ++t)
          out.push_back(num_.sub_const(mu.eval(state(t)), f.threshold));
        return out;
      }
      case FKind::kNot: {
        auto child = trace(*f.left);
        for (auto& v : child) v = num_.neg(v);
        return child;
      }
      case FKind::kAnd: {
        auto l = trace(*f.left);
        auto r = trace(*f.right);
        for (int t = 0; t < n; ++t) out.push_back(agg_min(l[t], r[t]));
        return out;
      }
      case FKind::kOr: {
        auto l = trace(*f.left);
        auto r = trace(*f.right);
        for (int t = 0; t < n; ++t) out.push_back(agg_max(l[t], r[t]));
        return out;
      }
      case FKind::kImplies: {
        // rho(phi -> psi) = max(-rho(phi), rho(psi)), kept explicit rather
        // than desugared through neg/or.
        auto l = trace(*f.left);
        auto r = trace(*f.right);
        for (int t = 0; t < n; ++t) out.push_back(agg_max(num_.neg(l[t]), r[t]));
        return out;
      }
      case FKind::kEventually:
        return window_agg(trace(*f.left), f.interval, /*take_max=*/true);
      case FKind::kAlways:
        return window_agg(trace(*f.left), f.interval, /*take_max=*/false);
      case FKind::kUntil:
        return until_trace(trace(*f.left), trace(*f.right), f.interval);
    }
    throw std::logic_error("unreachable formula kind");
  }

 private:
  std::span<const S> state(int t) const { return states_[static_cast<std::size_t>(t)]; }

  S agg_min(S a, S b) {
    if (opts_.smooth()) {
      const S xs[2] = {a, b};
      return num_.softmin(xs, opts_.temperature);
    }
    return num_.min2(a, b);
  }
  S agg_max(S a, S b) {
    if (opts_.smooth()) {
      const S xs[2] = {a, b};
      return num_.softmax(xs, opts_.temperature);
    }
    return num_.max2(a, b);
  }
  S agg_window(std::span<const S> xs, bool take_max) {
    if (opts_.smooth())
      return take_max ? num_.softmax(xs, opts_.temperature) : num_.softmin(xs, opts_.temperature);
    S acc = xs[0];
    for (const S& x : xs.subspan(1)) acc = take_max ? num_.max2(acc, x) : num_.min2(acc, x);
    return acc;
  }

  // min/max over the clipped window [t+lo, min(t+hi, T)] for every t.
  std::vector<S> window_agg(const std::vector<S>& child, const Interval& iv, bool take_max) {
    const int n = last_ + 1;
    std::vector<S> out;
    out.reserve(static_cast<std::size_t>(n));
    if (iv.unbounded() && iv.lo == 0 && !opts_.smooth()) {
      // Running suffix fold; identical result and tie-routing to the
      // left-to-right fold, in O(n) nodes.
      std::vector<S> suffix(static_cast<std::size_t>(n), child.back());
      for (int t = n - 2; t >= 0; --t)
        suffix[static_cast<std::size_t>(t)] =
            take_max ? num_.max2(child[static_cast<std::size_t>(t)],
                                 suffix[static_cast<std::size_t>(t) + 1])
                     : num_.min2(child[static_cast<std::size_t>(t)],
                                 suffix[static_cast<std::size_t>(t) + 1]);
      return suffix;
    }
    std::vector<S> window;
    for (int t = 0; t < n; ++t) {
      const int lo = std::min(t + iv.lo, last_);
      const int hi = iv.unbounded() ? last_ : std::min(t + *iv.hi, last_);
      window.clear();
      for (int k = lo; k <= hi; ++k) window.push_back(child[static_cast<std::size_t>(k)]);
      out.push_back(agg_window(window, take_max));
    }
    return out;
  }

  // rho(phi U[a,b] psi)(t) =
  //   max_{t' in [t+a, t+b]} min(rho_psi(t'), min_{t'' in [t, t']} rho_phi(t''))
  std::vector<S> until_trace(const std::vector<S>& phi, const std::vector<S>& psi,
                             const Interval& iv) {
    const int n = last_ + 1;
    std::vector<S> out;
    out.reserve(static_cast<std::size_t>(n));
    std::vector<S> candidates;
    for (int t = 0; t < n; ++t) {
      const int lo = std::min(t + iv.lo, last_);
      const int hi = iv.unbounded() ? last_ : std::min(t + *iv.hi, last_);
      S prefix = phi[static_cast<std::size_t>(t)];
      for (int k = t + 1; k <= lo; ++k)
        prefix = agg_min(prefix, phi[static_cast<std::size_t>(k)]);
      candidates.clear();
      candidates.push_back(agg_min(psi[static_cast<std::size_t>(lo)], prefix));
      for (int tp = lo + 1; tp <= hi; ++tp) {
        prefix = agg_min(prefix, phi[static_cast<std::size_t>(tp)]);
        candidates.push_back(agg_min(psi[static_cast<std::size_t>(tp)], prefix));
      }
      out.push_back(agg_window(candidates, /*take_max=*/true));
    }
    return out;
  }

  Num num_;
  States states_;
  const PredicateLibrary* lib_;
  EvalOptions opts_;
  int last_;
};

void check_entry(const Formula& f, int last_index, int t) {
  if (t < 0 || t > last_index)
    throw std::out_of_range("robustness: t=" + std::to_string(t) + " outside signal [0," +
                            std::to_string(last_index) + "]");
  if (auto h = f.horizon(); h && t + *h > last_index)
    throw std::invalid_argument("robustness: signal too short for a definite verdict (needs " +
                                std::to_string(t + *h) + " <= " + std::to_string(last_index) +
                                ")");
}

}  // namespace

ad::Var robustness(const Formula& f, std::span<const std::vector<ad::Var>> states, int t,
                   const EvalOptions& opts, const PredicateLibrary* lib) {
  if (states.empty()) throw std::invalid_argument("robustness: empty signal");
  check_entry(f, static_cast<int>(states.size()) - 1, t);
  ad::Tape* tape = states.front().front().tape();
  TraceEval<VarNum> eval(VarNum{tape}, states, lib, opts);
  return eval.trace(f)[static_cast<std::size_t>(t)];
}

double robustness_value(const Formula& f, const Signal& s, int t, const EvalOptions& opts,
                        const PredicateLibrary* lib) {
  s.validate();
  check_entry(f, s.last_index(), t);
  TraceEval<DoubleNum> eval(DoubleNum{}, s.states, lib, opts);
  return eval.trace(f)[static_cast<std::size_t>(t)];
}

std::vector<double> robustness_trace(const Formula& f, const Signal& s, const EvalOptions& opts,
                                     const PredicateLibrary* lib) {
  s.validate();
  int valid_last = s.last_index();
  if (auto h = f.horizon()) valid_last -= *h;
  if (valid_last < 0)
    throw std::invalid_argument("robustness_trace: no suffix admits a definite verdict");
  TraceEval<DoubleNum> eval(DoubleNum{}, s.states, lib, opts);
  auto full = eval.trace(f);
  full.resize(static_cast<std::size_t>(valid_last) + 1);
  return full;
}

namespace {

// Inductive Boolean semantics, evaluated bottom-up as per-suffix verdict
// traces. Windows are clipped to the signal end exactly as in the
// quantitative semantics.
std::vector<char> bool_trace(const Formula& f, const Signal& s, const PredicateLibrary* lib) {
  const int n = static_cast<int>(s.states.size());
  const int last = n - 1;
  std::vector<char> out(static_cast<std::size_t>(n));
  auto clip = [last](int v) { return std::min(v, last); };
  switch (f.kind) {
    case FKind::kTrue: {
      std::fill(out.begin(), out.end(), 1);
      return out;
    }
    case FKind::kPred: {
      const Mu& mu = resolve_mu(f, lib);
      for (int t = 0; t < n; ++t)
        out[static_cast<std::size_t>(t)] =
            mu.eval(std::span<const double>(s.states[static_cast<std::size_t>(t)])) >=
            f.threshold;
      return out;
    }
    case FKind::kNot: {
      auto a = bool_trace(*f.left, s, lib);
      for (auto& v : a) v = !v;
      return a;
    }
    case FKind::kAnd: {
      auto a = bool_trace(*f.left, s, lib);
      auto b = bool_trace(*f.right, s, lib);
      for (int t = 0; t < n; ++t)
        out[static_cast<std::size_t>(t)] =
            a[static_cast<std::size_t>(t)] && b[static_cast<std::size_t>(t)];
      return out;
    }
    case FKind::kOr: {
      auto a = bool_trace(*f.left, s, lib);
      auto b = bool_trace(*f.right, s, lib);
      for (int t = 0; t < n; ++t)
        out[static_cast<std::size_t>(t)] =
            a[static_cast<std::size_t>(t)] || b[static_cast<std::size_t>(t)];
      return out;
    }
    case FKind::kImplies: {
      auto a = bool_trace(*f.left, s, lib);
      auto b = bool_trace(*f.right, s, lib);
      for (int t = 0; t < n; ++t)
        out[static_cast<std::size_t>(t)] =
            !a[static_cast<std::size_t>(t)] || b[static_cast<std::size_t>(t)];
      return out;
    }
    case FKind::kEventually: {
      auto a = bool_trace(*f.left, s, lib);
      for (int t = 0; t < n; ++t) {
        const int lo = clip(t + f.interval.lo);
        const int hi = f.interval.unbounded() ? last : clip(t + *f.interval.hi);
        char v = 0;
        for (int k = lo; k <= hi && !v; ++k) v = a[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(t)] = v;
      }
      return out;
    }
    case FKind::kAlways: {
      auto a = bool_trace(*f.left, s, lib);
      for (int t = 0; t < n; ++t) {
        const int lo = clip(t + f.interval.lo);
        const int hi = f.interval.unbounded() ? last : clip(t + *f.interval.hi);
        char v = 1;
        for (int k = lo; k <= hi && v; ++k) v = a[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(t)] = v;
      }
      return out;
    }
    case FKind::kUntil: {
      // There is a t' in [t+a, t+b] such that psi holds at t' and phi holds
      // at every step from t through t'.
      auto a = bool_trace(*f.left, s, lib);
      auto b = bool_trace(*f.right, s, lib);
      for (int t = 0; t < n; ++t) {
        const int lo = clip(t + f.interval.lo);
        const int hi = f.interval.unbounded() ? last : clip(t + *f.interval.hi);
        char v = 0;
        for (int tp = lo; tp <= hi && !v; ++tp) {
          if (!b[static_cast<std::size_t>(tp)]) continue;
          char all = 1;
          for (int k = t; k <= tp && all; ++k) all = a[static_cast<std::size_t>(k)];
          v = all;
        }
        out[static_cast<std::size_t>(t)] = v;
      }
      return out;
    }
  }
  throw std::logic_error("unreachable formula kind");
}

}  // namespace

bool boolean_sat(const Formula& f, const Signal& s, int t, const PredicateLibrary* lib) {
  s.validate();
  check_entry(f, s.last_index(), t);
  return bool_trace(f, s, lib)[static_cast<std::size_t>(t)] != 0;
}

RobustnessResult robustness_with_gradient(const Formula& f, const Signal& s, int t,
                                          const EvalOptions& opts, const PredicateLibrary* lib) {
  s.validate();
  check_entry(f, s.last_index(), t);
  RobustnessResult res;
  res.tape = std::make_shared<ad::Tape>();
  res.state_vars.reserve(s.states.size());
  for (const auto& x : s.states) res.state_vars.push_back(res.tape->inputs(x));
  res.var = robustness(f, res.state_vars, t, opts, lib);
  res.value = res.var.value();
  res.satisfied = res.value >= 0.0;
  return res;
}

}  // namespace stlsynth::stl
