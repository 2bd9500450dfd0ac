#include "stlsynth/stl/formula.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace stlsynth::stl {

void Signal::validate() const {
  if (states.empty()) throw std::invalid_argument("signal: empty");
  const std::size_t dim = states.front().size();
  if (dim == 0) throw std::invalid_argument("signal: zero-dimensional states");
  for (const auto& x : states) {
    if (x.size() != dim) throw std::invalid_argument("signal: inconsistent state dimension");
    for (double v : x)
      if (!std::isfinite(v)) throw std::invalid_argument("signal: non-finite entry");
  }
}

MuPtr channel_mu(int index) {
  return make_mu([index](auto state) { return state[static_cast<std::size_t>(index)]; });
}

namespace {

std::shared_ptr<Formula> make(FKind kind, FormulaPtr left = nullptr,
                              FormulaPtr right = nullptr) {
  auto f = std::make_shared<Formula>();
  f->kind = kind;
  f->left = std::move(left);
  f->right = std::move(right);
  return f;
}

std::optional<int> max_h(const std::optional<int>& a, const std::optional<int>& b) {
  if (!a || !b) return std::nullopt;
  return std::max(*a, *b);
}

}  // namespace

std::optional<int> Formula::horizon() const {
  switch (kind) {
    case FKind::kTrue:
    case FKind::kPred:
      return 0;
    case FKind::kNot:
      return left->horizon();
    case FKind::kAnd:
    case FKind::kOr:
    case FKind::kImplies:
      return max_h(left->horizon(), right->horizon());
    case FKind::kEventually:
    case FKind::kAlways: {
      auto h = left->horizon();
      if (!h || interval.unbounded()) return std::nullopt;
      return *interval.hi + *h;
    }
    case FKind::kUntil: {
      auto h = max_h(left->horizon(), right->horizon());
      if (!h || interval.unbounded()) return std::nullopt;
      return *interval.hi + *h;
    }
  }
  return 0;
}

bool Formula::equals(const Formula& other) const {
  if (kind != other.kind) return false;
  switch (kind) {
    case FKind::kTrue:
      return rho_max == other.rho_max;
    case FKind::kPred:
      return pred_name == other.pred_name && threshold == other.threshold;
    case FKind::kNot:
      return left->equals(*other.left);
    case FKind::kAnd:
    case FKind::kOr:
    case FKind::kImplies:
      return left->equals(*other.left) && right->equals(*other.right);
    case FKind::kEventually:
    case FKind::kAlways:
      return interval == other.interval && left->equals(*other.left);
    case FKind::kUntil:
      return interval == other.interval && left->equals(*other.left) &&
             right->equals(*other.right);
  }
  return false;
}

FormulaPtr f_true(double rho_max) {
  if (!(rho_max > 0.0)) throw std::invalid_argument("true: rho_max must be positive");
  auto f = make(FKind::kTrue);
  f->rho_max = rho_max;
  return f;
}

FormulaPtr pred(std::string name, double threshold, MuPtr mu) {
  auto f = make(FKind::kPred);
  f->pred_name = std::move(name);
  f->threshold = threshold;
  f->mu = std::move(mu);
  return f;
}

FormulaPtr negate(FormulaPtr f) { return make(FKind::kNot, std::move(f)); }
FormulaPtr conj(FormulaPtr a, FormulaPtr b) { return make(FKind::kAnd, std::move(a), std::move(b)); }
FormulaPtr disj(FormulaPtr a, FormulaPtr b) { return make(FKind::kOr, std::move(a), std::move(b)); }
FormulaPtr implies(FormulaPtr a, FormulaPtr b) {
  return make(FKind::kImplies, std::move(a), std::move(b));
}

namespace {
void check_interval(const Interval& iv) {
  if (iv.lo < 0) throw std::invalid_argument("interval: negative lower bound");
  if (iv.hi && (*iv.hi < iv.lo))
    throw std::invalid_argument("interval: upper bound below lower bound");
}
}  // namespace

FormulaPtr eventually(FormulaPtr f, Interval iv) {
  check_interval(iv);
  auto n = make(FKind::kEventually, std::move(f));
  n->interval = iv;
  return n;
}

FormulaPtr always(FormulaPtr f, Interval iv) {
  check_interval(iv);
  auto n = make(FKind::kAlways, std::move(f));
  n->interval = iv;
  return n;
}

FormulaPtr until(FormulaPtr a, FormulaPtr b, Interval iv) {
  check_interval(iv);
  auto n = make(FKind::kUntil, std::move(a), std::move(b));
  n->interval = iv;
  return n;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string fmt_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Trim to the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

std::string fmt_interval(const Interval& iv) {
  if (iv.unbounded()) return "";
  return "[" + std::to_string(iv.lo) + "," + std::to_string(*iv.hi) + "]";
}

// Binding strength used to decide parenthesization; larger binds tighter.
int level(const Formula& f) {
  switch (f.kind) {
    case FKind::kImplies: return 0;
    case FKind::kOr: return 1;
    case FKind::kAnd: return 2;
    case FKind::kUntil: return 3;
    case FKind::kNot:
    case FKind::kEventually:
    case FKind::kAlways: return 4;
    case FKind::kTrue:
    case FKind::kPred: return 5;
  }
  return 5;
}

std::string print_at(const Formula& f, int parent_level) {
  std::string out;
  // Binary operators print their recursive side at their own level and the
  // other side one tighter, matching the parser's associativity.
  switch (f.kind) {
    case FKind::kTrue:
      out = "true";  // rho_max is not expressible in the text form
      break;
    case FKind::kPred:
      out = f.threshold == 0.0 ? f.pred_name : f.pred_name + " > " + fmt_number(f.threshold);
      break;
    case FKind::kNot:
      out = "neg " + print_at(*f.left, level(f));
      break;
    case FKind::kAnd:
      out = print_at(*f.left, level(f)) + " & " + print_at(*f.right, level(f) + 1);
      break;
    case FKind::kOr:
      out = print_at(*f.left, level(f)) + " | " + print_at(*f.right, level(f) + 1);
      break;
    case FKind::kImplies:
      out = print_at(*f.left, level(f) + 1) + " -> " + print_at(*f.right, level(f));
      break;
    case FKind::kEventually:
      out = "ev" + fmt_interval(f.interval) + " " + print_at(*f.left, level(f));
      break;
    case FKind::kAlways:
      out = "alw" + fmt_interval(f.interval) + " " + print_at(*f.left, level(f));
      break;
    case FKind::kUntil:
      out = print_at(*f.left, level(f)) + " until" + fmt_interval(f.interval) + " " +
            print_at(*f.right, level(f) + 1);
      break;
  }
  if (level(f) < parent_level && f.kind != FKind::kTrue && f.kind != FKind::kPred)
    return "(" + out + ")";
  return out;
}

}  // namespace

std::string Formula::print() const { return print_at(*this, 0); }

}  // namespace stlsynth::stl
