#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stlsynth/ad/tape.hpp"

namespace stlsynth::stl {

/// Uniformly sampled, finite, real-vector signal. `dt` is carried for
/// reporting only; temporal intervals are expressed in step counts.
struct Signal {
  std::vector<std::vector<double>> states;
  double dt = 1.0;

  int last_index() const { return static_cast<int>(states.size()) - 1; }
  int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
  void validate() const;
};

/// A differentiable map from a state vector to a scalar, evaluable both on
/// plain doubles and on tape variables.
class Mu {
 public:
  virtual ~Mu() = default;
  virtual double eval(std::span<const double> state) const = 0;
  virtual ad::Var eval(std::span<const ad::Var> state) const = 0;
};

using MuPtr = std::shared_ptr<const Mu>;

/// Wraps a generic callable (templated on the scalar type) as a Mu.
template <class F>
class LambdaMu final : public Mu {
 public:
  explicit LambdaMu(F f) : f_(std::move(f)) {}
  double eval(std::span<const double> state) const override { return f_(state); }
  ad::Var eval(std::span<const ad::Var> state) const override { return f_(state); }

 private:
  F f_;
};

template <class F>
MuPtr make_mu(F f) {
  return std::make_shared<LambdaMu<F>>(std::move(f));
}

/// Selects one state channel: mu(x) = x[index].
MuPtr channel_mu(int index);

/// Named predicate functions a formula's atoms are bound against at
/// evaluation time.
class PredicateLibrary {
 public:
  void add(const std::string& name, MuPtr mu) { map_[name] = std::move(mu); }
  const Mu* find(const std::string& name) const {
    auto it = map_.find(name);
    return it == map_.end() ? nullptr : it->second.get();
  }
  void merge(const PredicateLibrary& other) {
    for (const auto& [k, v] : other.map_) map_[k] = v;
  }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : map_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, MuPtr> map_;
};

enum class FKind : std::uint8_t {
  kTrue,
  kPred,
  kNot,
  kAnd,
  kOr,
  kImplies,
  kEventually,
  kAlways,
  kUntil,
};

/// Time window in step counts; `hi == nullopt` means unbounded. An omitted
/// interval on a temporal operator is {0, unbounded}.
struct Interval {
  int lo = 0;
  std::optional<int> hi;
  bool unbounded() const { return !hi.has_value(); }
  bool operator==(const Interval&) const = default;
};

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

inline constexpr double kDefaultRhoMax = 1e6;

/// Immutable STL formula AST node.
class Formula {
 public:
  FKind kind;
  double rho_max = kDefaultRhoMax;  // kTrue
  std::string pred_name;            // kPred
  double threshold = 0.0;           // kPred: predicate is mu(x) > threshold
  MuPtr mu;                         // kPred: optional inline binding
  FormulaPtr left, right;           // children (unary ops use left)
  Interval interval;                // temporal operators

  /// Future samples needed past t for a truncation-free verdict;
  /// nullopt when some reachable temporal operator is unbounded.
  std::optional<int> horizon() const;

  /// Structural equality; ignores inline mu bindings.
  bool equals(const Formula& other) const;

  /// Canonical text form; parse(print(f)) is structurally equal to f.
  std::string print() const;
};

FormulaPtr f_true(double rho_max = kDefaultRhoMax);
FormulaPtr pred(std::string name, double threshold = 0.0, MuPtr mu = nullptr);
FormulaPtr negate(FormulaPtr f);
FormulaPtr conj(FormulaPtr a, FormulaPtr b);
FormulaPtr disj(FormulaPtr a, FormulaPtr b);
FormulaPtr implies(FormulaPtr a, FormulaPtr b);
FormulaPtr eventually(FormulaPtr f, Interval iv = {});
FormulaPtr always(FormulaPtr f, Interval iv = {});
FormulaPtr until(FormulaPtr a, FormulaPtr b, Interval iv = {});

/// Error with 1-based line/column position in the formula text.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line, int column)
      : std::runtime_error(message + " at " + std::to_string(line) + ":" +
                           std::to_string(column)),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_, column_;
};

struct ParserOptions {
  double rho_max = kDefaultRhoMax;  // value bound to the `true` atom
};

/// Grammar (precedence low to high: -> | & until (neg, alw, ev) atoms):
///   formula    := or ('->' formula)?                      right-associative
///   or         := and ('|' and)*
///   and        := until ('&' until)*
///   until      := unary ('until' interval? unary)*        left-associative
///   unary      := ('neg'|'!') unary
///               | ('alw'|'ev') interval? unary
///               | primary
///   primary    := 'true' | ident (('<'|'>') number)? | '(' formula ')'
///   interval   := '[' int ',' int ']'
/// A bare ident is sugar for `ident > 0`; `name < c` compiles to neg(name > c).
FormulaPtr parse(const std::string& text, const ParserOptions& opts = {});

}  // namespace stlsynth::stl
