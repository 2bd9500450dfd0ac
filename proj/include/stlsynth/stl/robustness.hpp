#pragma once

// Quantitative (robustness) and Boolean semantics over finite uniformly
// sampled signals.
//
// Finite-signal convention: every temporal window [t+a, t+b] is clipped to
// the signal's last index T, i.e. t' ranges over [min(t+a,T), min(t+b,T)].
// For unbounded operators this is the end-truncation rule (eventually f ==
// eventually[0, T-t] f); for bounded operators nested under an unbounded one
// it extends the same rule so every suffix has a value. The public entry
// points reject queries whose verdict would depend on samples past the end:
// robustness(f, s, t) requires t + horizon(f) <= T whenever horizon(f) is
// finite.
//
// Aggregation order is pinned for reproducibility: windows fold left to
// right (earliest step first), binary connectives fold left then right, and
// exact min/max route gradients to the first attaining argument.

#include <memory>
#include <vector>

#include "stlsynth/ad/scalar.hpp"
#include "stlsynth/stl/formula.hpp"

namespace stlsynth::stl {

struct EvalOptions {
  /// Soft aggregation temperature. Values that are not finite and positive
  /// (0, negative, infinity) select exact min/max semantics.
  double temperature = 0.0;
  bool smooth() const { return temperature > 0.0 && std::isfinite(temperature); }
  static EvalOptions exact() { return {}; }
  static EvalOptions smoothed(double t) { return {t}; }
};

/// Robustness of a formula on a differentiable signal: states[t] are tape
/// variables (e.g. produced by a policy rollout). Returns the robustness at
/// suffix index t as a Var on the same tape.
ad::Var robustness(const Formula& f, std::span<const std::vector<ad::Var>> states, int t,
                   const EvalOptions& opts = {}, const PredicateLibrary* lib = nullptr);

/// Robustness on a plain signal (monitoring path; no gradients).
double robustness_value(const Formula& f, const Signal& s, int t, const EvalOptions& opts = {},
                        const PredicateLibrary* lib = nullptr);

/// Per-suffix robustness. Entry i corresponds to t = i; the trace covers
/// every t for which the verdict is definite: all of [0, T] when horizon(f)
/// is unbounded, otherwise [0, T - horizon(f)].
std::vector<double> robustness_trace(const Formula& f, const Signal& s,
                                     const EvalOptions& opts = {},
                                     const PredicateLibrary* lib = nullptr);

/// Boolean satisfaction from the inductive semantics (not derived from the
/// robustness value). Agrees with the sign of exact robustness except
/// possibly where the robustness is exactly 0; rho == 0 counts as satisfied.
bool boolean_sat(const Formula& f, const Signal& s, int t, const PredicateLibrary* lib = nullptr);

/// Differentiable robustness of a plain signal: lifts the signal onto a
/// fresh tape (kept alive by the result) so callers can take gradients with
/// respect to every state entry.
struct RobustnessResult {
  double value = 0.0;
  bool satisfied = false;  // value >= 0
  std::shared_ptr<ad::Tape> tape;
  ad::Var var;                                    // robustness node
  std::vector<std::vector<ad::Var>> state_vars;   // signal inputs on the tape
};

RobustnessResult robustness_with_gradient(const Formula& f, const Signal& s, int t,
                                          const EvalOptions& opts = {},
                                          const PredicateLibrary* lib = nullptr);

}  // namespace stlsynth::stl
