#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stlsynth::ad {

enum class Op : std::uint8_t {
  kConst,
  kInput,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kAddImm,   // a + k
  kMulImm,   // a * k
  kNeg,
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kSqrt,
  kSin,
  kCos,
  kTan,
  kAtan,
  kRelu,
  kLeakyRelu,
  kSquare,
  kMax2,
  kMin2,
};

const char* op_name(Op op);

class Tape;

/// Handle to a scalar node on a Tape. Cheap to copy; invalidated by clear().
class Var {
 public:
  Var() = default;
  double value() const;
  Tape* tape() const { return tape_; }
  std::int32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::int32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::int32_t id_ = -1;
};

/// Raised when an operation produces a non-finite value or violates a domain
/// precondition (division by zero, log of a non-positive value). Carries the
/// offending node so callers can attach context.
class EvalError : public std::runtime_error {
 public:
  EvalError(const std::string& message, Op op, std::int64_t node)
      : std::runtime_error(message), op_(op), node_(node) {}
  Op op() const { return op_; }
  std::int64_t node() const { return node_; }

 private:
  Op op_;
  std::int64_t node_;
};

/// Reverse-mode tape over scalar expressions. Nodes are appended in
/// topological order; local partials are computed at record time so the
/// reverse pass is a single fused-multiply loop. A Tape is single-threaded;
/// use one tape per concurrent computation.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(double v) { return push(Op::kConst, check(v, Op::kConst), -1, -1, 0.0, 0.0); }
  Var input(double v) { return push(Op::kInput, check(v, Op::kInput), -1, -1, 0.0, 0.0); }

  std::vector<Var> inputs(std::span<const double> vs) {
    std::vector<Var> out;
    out.reserve(vs.size());
    for (double v : vs) out.push_back(input(v));
    return out;
  }
  std::vector<Var> constants(std::span<const double> vs) {
    std::vector<Var> out;
    out.reserve(vs.size());
    for (double v : vs) out.push_back(constant(v));
    return out;
  }

  double value(Var v) const { return values_[static_cast<std::size_t>(v.id())]; }
  std::size_t size() const { return nodes_.size(); }
  void clear() {
    nodes_.clear();
    values_.clear();
    adjoints_.clear();
  }
  void reserve(std::size_t n) {
    nodes_.reserve(n);
    values_.reserve(n);
  }

  Var add(Var a, Var b) { return push(Op::kAdd, val(a) + val(b), a.id(), b.id(), 1.0, 1.0); }
  Var sub(Var a, Var b) { return push(Op::kSub, val(a) - val(b), a.id(), b.id(), 1.0, -1.0); }
  Var mul(Var a, Var b) {
    return push(Op::kMul, val(a) * val(b), a.id(), b.id(), val(b), val(a));
  }
  Var div(Var a, Var b) {
    const double bv = val(b);
    if (bv == 0.0) fail("division by zero", Op::kDiv, b.id());
    const double r = val(a) / bv;
    return push(Op::kDiv, r, a.id(), b.id(), 1.0 / bv, -r / bv);
  }
  Var add_imm(Var a, double k) { return push(Op::kAddImm, val(a) + k, a.id(), -1, 1.0, 0.0); }
  Var mul_imm(Var a, double k) { return push(Op::kMulImm, val(a) * k, a.id(), -1, k, 0.0); }
  Var neg(Var a) { return push(Op::kNeg, -val(a), a.id(), -1, -1.0, 0.0); }
  Var tanh(Var a) {
    const double t = std::tanh(val(a));
    return push(Op::kTanh, t, a.id(), -1, 1.0 - t * t, 0.0);
  }
  Var sigmoid(Var a) {
    const double s = 1.0 / (1.0 + std::exp(-val(a)));
    return push(Op::kSigmoid, s, a.id(), -1, s * (1.0 - s), 0.0);
  }
  Var exp(Var a) {
    const double e = std::exp(val(a));
    return push(Op::kExp, e, a.id(), -1, e, 0.0);
  }
  Var log(Var a) {
    const double x = val(a);
    if (x <= 0.0) fail("log of non-positive value", Op::kLog, a.id());
    return push(Op::kLog, std::log(x), a.id(), -1, 1.0 / x, 0.0);
  }
  Var sqrt(Var a) {
    const double x = val(a);
    if (x < 0.0) fail("sqrt of negative value", Op::kSqrt, a.id());
    const double r = std::sqrt(x);
    // Partial at exactly zero is taken as 0 to keep gradients finite.
    return push(Op::kSqrt, r, a.id(), -1, x > 0.0 ? 0.5 / r : 0.0, 0.0);
  }
  Var sin(Var a) { return push(Op::kSin, std::sin(val(a)), a.id(), -1, std::cos(val(a)), 0.0); }
  Var cos(Var a) { return push(Op::kCos, std::cos(val(a)), a.id(), -1, -std::sin(val(a)), 0.0); }
  Var tan(Var a) {
    const double t = std::tan(val(a));
    return push(Op::kTan, t, a.id(), -1, 1.0 + t * t, 0.0);
  }
  Var atan(Var a) {
    const double x = val(a);
    return push(Op::kAtan, std::atan(x), a.id(), -1, 1.0 / (1.0 + x * x), 0.0);
  }
  Var relu(Var a) {
    const double x = val(a);
    return push(Op::kRelu, x > 0.0 ? x : 0.0, a.id(), -1, x > 0.0 ? 1.0 : 0.0, 0.0);
  }
  // LeakyReLU(x) = max(slope*x, x); at the kink the first attaining argument
  // (slope*x) receives the gradient, consistent with max2's tie rule.
  Var leaky_relu(Var a, double slope = 0.01) {
    const double x = val(a);
    return push(Op::kLeakyRelu, x > 0.0 ? x : slope * x, a.id(), -1, x > 0.0 ? 1.0 : slope, 0.0);
  }
  Var square(Var a) { return push(Op::kSquare, val(a) * val(a), a.id(), -1, 2.0 * val(a), 0.0); }
  // Ties route the gradient to the first argument.
  Var max2(Var a, Var b) {
    const bool first = val(a) >= val(b);
    return push(Op::kMax2, first ? val(a) : val(b), a.id(), b.id(), first ? 1.0 : 0.0,
                first ? 0.0 : 1.0);
  }
  Var min2(Var a, Var b) {
    const bool first = val(a) <= val(b);
    return push(Op::kMin2, first ? val(a) : val(b), a.id(), b.id(), first ? 1.0 : 0.0,
                first ? 0.0 : 1.0);
  }

  /// Smooth maximum (1/t) log sum exp(t*x_i), stabilized by subtracting the
  /// running maximum (a detached constant, which leaves the gradient exact).
  /// Converges to max(xs) from above as t -> inf.
  Var softmax_agg(std::span<const Var> xs, double temperature);
  /// Smooth minimum, the negated-input dual of softmax_agg.
  Var softmin_agg(std::span<const Var> xs, double temperature);

  /// Reverse pass from a scalar root. After the call adjoint(v) holds
  /// d root / d v for every node recorded no later than root.
  void backward(Var root);
  double adjoint(Var v) const { return adjoints_[static_cast<std::size_t>(v.id())]; }
  std::span<const double> adjoints() const { return adjoints_; }

 private:
  struct Node {
    std::int32_t a;
    std::int32_t b;
    double da;
    double db;
    Op op;
  };

  double val(Var v) const {
    if (v.tape() != this) throw std::logic_error("Var used on a foreign tape");
    return values_[static_cast<std::size_t>(v.id())];
  }

  double check(double v, Op op) {
    if (!std::isfinite(v)) fail("non-finite value", op, static_cast<std::int64_t>(nodes_.size()));
    return v;
  }

  [[noreturn]] void fail(const char* what, Op op, std::int64_t node) {
    throw EvalError(std::string(what) + " in op " + op_name(op) + " (node " +
                        std::to_string(node) + ")",
                    op, node);
  }

  Var push(Op op, double value, std::int32_t a, std::int32_t b, double da, double db) {
    if (!std::isfinite(value)) fail("non-finite value", op, static_cast<std::int64_t>(nodes_.size()));
    nodes_.push_back(Node{a, b, da, db, op});
    values_.push_back(value);
    return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
  }

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
};

inline double Var::value() const { return tape_->value(*this); }

// ---------------------------------------------------------------------------
// Operator sugar. Mixed Var/double forms use immediate-operand nodes so that
// data constants do not double the node count.

inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape()->div(a, b); }
inline Var operator-(Var a) { return a.tape()->neg(a); }
inline Var operator+(Var a, double k) { return a.tape()->add_imm(a, k); }
inline Var operator+(double k, Var a) { return a.tape()->add_imm(a, k); }
inline Var operator-(Var a, double k) { return a.tape()->add_imm(a, -k); }
inline Var operator-(double k, Var a) { return a.tape()->add_imm(a.tape()->neg(a), k); }
inline Var operator*(Var a, double k) { return a.tape()->mul_imm(a, k); }
inline Var operator*(double k, Var a) { return a.tape()->mul_imm(a, k); }
inline Var operator/(Var a, double k) { return a.tape()->mul_imm(a, 1.0 / k); }
inline Var operator/(double k, Var a) { return a.tape()->div(a.tape()->constant(k), a); }

inline Var tanh(Var a) { return a.tape()->tanh(a); }
inline Var sigmoid(Var a) { return a.tape()->sigmoid(a); }
inline Var exp(Var a) { return a.tape()->exp(a); }
inline Var log(Var a) { return a.tape()->log(a); }
inline Var sqrt(Var a) { return a.tape()->sqrt(a); }
inline Var sin(Var a) { return a.tape()->sin(a); }
inline Var cos(Var a) { return a.tape()->cos(a); }
inline Var tan(Var a) { return a.tape()->tan(a); }
inline Var atan(Var a) { return a.tape()->atan(a); }
inline Var relu(Var a) { return a.tape()->relu(a); }
inline Var leaky_relu(Var a, double slope = 0.01) { return a.tape()->leaky_relu(a, slope); }
inline Var square(Var a) { return a.tape()->square(a); }
inline Var max2(Var a, Var b) { return a.tape()->max2(a, b); }
inline Var min2(Var a, Var b) { return a.tape()->min2(a, b); }
inline Var mul_imm(Var a, double k) { return a.tape()->mul_imm(a, k); }
inline Var add_imm(Var a, double k) { return a.tape()->add_imm(a, k); }
inline Var softmax_agg(std::span<const Var> xs, double t) {
  return xs.front().tape()->softmax_agg(xs, t);
}
inline Var softmin_agg(std::span<const Var> xs, double t) {
  return xs.front().tape()->softmin_agg(xs, t);
}
inline double to_double(Var v) { return v.value(); }

}  // namespace stlsynth::ad
