#pragma once

// Independent brute-force evaluator of the quantitative-semantics recursions
// used as the test oracle. Deliberately written as direct per-suffix
// recursion (no traces, no shared folds) so it shares no code path with the
// production evaluator. Uses the same finite-signal convention: windows are
// clipped to [min(t+a,T), min(t+b,T)].

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "stlsynth/core/rng.hpp"
#include "stlsynth/stl/formula.hpp"

namespace stlsynth::testing {

inline const stl::Mu& oracle_mu(const stl::Formula& f, const stl::PredicateLibrary* lib) {
  if (f.mu) return *f.mu;
  const stl::Mu* m = lib ? lib->find(f.pred_name) : nullptr;
  if (!m) throw std::invalid_argument("oracle: unknown predicate " + f.pred_name);
  return *m;
}

inline double oracle_rho(const stl::Formula& f, const stl::Signal& s, int t,
                         const stl::PredicateLibrary* lib = nullptr) {
  const int last = s.last_index();
  auto window = [&](const stl::Interval& iv) {
    const int lo = std::min(t + iv.lo, last);
    const int hi = iv.unbounded() ? last : std::min(t + *iv.hi, last);
    return std::pair<int, int>(lo, hi);
  };
  switch (f.kind) {
    case stl::FKind::kTrue:
      return f.rho_max;
    case stl::FKind::kPred:
      return oracle_mu(f, lib).eval(
                 std::span<const double>(s.states[static_cast<std::size_t>(t)])) -
             f.threshold;
    case stl::FKind::kNot:
      return -oracle_rho(*f.left, s, t, lib);
    case stl::FKind::kAnd:
      return std::min(oracle_rho(*f.left, s, t, lib), oracle_rho(*f.right, s, t, lib));
    case stl::FKind::kOr:
      return std::max(oracle_rho(*f.left, s, t, lib), oracle_rho(*f.right, s, t, lib));
    case stl::FKind::kImplies:
      return std::max(-oracle_rho(*f.left, s, t, lib), oracle_rho(*f.right, s, t, lib));
    case stl::FKind::kEventually: {
      auto [lo, hi] = window(f.interval);
      double best = -std::numeric_limits<double>::infinity();
      for (int tp = lo; tp <= hi; ++tp) best = std::max(best, oracle_rho(*f.left, s, tp, lib));
      return best;
    }
    case stl::FKind::kAlways: {
      auto [lo, hi] = window(f.interval);
      double worst = std::numeric_limits<double>::infinity();
      for (int tp = lo; tp <= hi; ++tp) worst = std::min(worst, oracle_rho(*f.left, s, tp, lib));
      return worst;
    }
    case stl::FKind::kUntil: {
      auto [lo, hi] = window(f.interval);
      double best = -std::numeric_limits<double>::infinity();
      for (int tp = lo; tp <= hi; ++tp) {
        double inner = oracle_rho(*f.right, s, tp, lib);
        for (int tpp = t; tpp <= tp; ++tpp)
          inner = std::min(inner, oracle_rho(*f.left, s, tpp, lib));
        best = std::max(best, inner);
      }
      return best;
    }
  }
  throw std::logic_error("oracle: bad kind");
}

inline bool oracle_sat(const stl::Formula& f, const stl::Signal& s, int t,
                       const stl::PredicateLibrary* lib = nullptr) {
  const int last = s.last_index();
  auto window = [&](const stl::Interval& iv) {
    const int lo = std::min(t + iv.lo, last);
    const int hi = iv.unbounded() ? last : std::min(t + *iv.hi, last);
    return std::pair<int, int>(lo, hi);
  };
  switch (f.kind) {
    case stl::FKind::kTrue:
      return true;
    case stl::FKind::kPred:
      return oracle_mu(f, lib).eval(
                 std::span<const double>(s.states[static_cast<std::size_t>(t)])) >= f.threshold;
    case stl::FKind::kNot:
      return !oracle_sat(*f.left, s, t, lib);
    case stl::FKind::kAnd:
      return oracle_sat(*f.left, s, t, lib) && oracle_sat(*f.right, s, t, lib);
    case stl::FKind::kOr:
      return oracle_sat(*f.left, s, t, lib) || oracle_sat(*f.right, s, t, lib);
    case stl::FKind::kImplies:
      return !oracle_sat(*f.left, s, t, lib) || oracle_sat(*f.right, s, t, lib);
    case stl::FKind::kEventually: {
      auto [lo, hi] = window(f.interval);
      for (int tp = lo; tp <= hi; ++tp)
        if (oracle_sat(*f.left, s, tp, lib)) return true;
      return false;
    }
    case stl::FKind::kAlways: {
      auto [lo, hi] = window(f.interval);
      for (int tp = lo; tp <= hi; ++tp)
        if (!oracle_sat(*f.left, s, tp, lib)) return false;
      return true;
    }
    case stl::FKind::kUntil: {
      auto [lo, hi] = window(f.interval);
      for (int tp = lo; tp <= hi; ++tp) {
        if (!oracle_sat(*f.right, s, tp, lib)) continue;
        bool all = true;
        for (int tpp = t; tpp <= tp && all; ++tpp) all = oracle_sat(*f.left, s, tpp, lib);
        if (all) return true;
      }
      return false;
    }
  }
  throw std::logic_error("oracle: bad kind");
}

/// Library binding c0..c{dim-1} to the state channels.
inline stl::PredicateLibrary channel_library(int dim) {
  stl::PredicateLibrary lib;
  for (int i = 0; i < dim; ++i) lib.add("c" + std::to_string(i), stl::channel_mu(i));
  return lib;
}

/// Random formula over channel predicates, all operator kinds, bounded depth.
inline stl::FormulaPtr random_formula(Rng& rng, int max_depth, int dim) {
  auto leaf = [&]() -> stl::FormulaPtr {
    if (rng.uniform() < 0.06) return stl::f_true();
    const int ch = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(dim)));
    auto p = stl::pred("c" + std::to_string(ch), rng.uniform(-2.0, 2.0));
    return rng.uniform() < 0.5 ? p : stl::negate(p);
  };
  if (max_depth <= 0) return leaf();
  auto sub = [&]() { return random_formula(rng, max_depth - 1, dim); };
  auto interval = [&]() {
    if (rng.uniform() < 0.3) return stl::Interval{};  // unbounded
    const int a = static_cast<int>(rng.uniform_int(4));
    const int b = a + static_cast<int>(rng.uniform_int(5));
    return stl::Interval{a, b};
  };
  switch (rng.uniform_int(8)) {
    case 0: return leaf();
    case 1: return stl::negate(sub());
    case 2: return stl::conj(sub(), sub());
    case 3: return stl::disj(sub(), sub());
    case 4: return stl::implies(sub(), sub());
    case 5: return stl::eventually(sub(), interval());
    case 6: return stl::always(sub(), interval());
    default: return stl::until(sub(), sub(), interval());
  }
}

/// Random finite signal with entries in [-3, 3].
inline stl::Signal random_signal(Rng& rng, int max_len, int dim) {
  stl::Signal s;
  s.dt = 1.0;
  const int len = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_len - 1)));
  s.states.resize(static_cast<std::size_t>(len));
  for (auto& x : s.states) {
    x.resize(static_cast<std::size_t>(dim));
    for (auto& v : x) v = rng.uniform(-3.0, 3.0);
  }
  return s;
}

}  // namespace stlsynth::testing
