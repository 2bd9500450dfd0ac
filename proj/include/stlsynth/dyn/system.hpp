#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "stlsynth/ad/tape.hpp"
#include "stlsynth/core/rng.hpp"
#include "stlsynth/stl/formula.hpp"

namespace stlsynth::dyn {

struct ControlBounds {
  std::vector<double> lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double mid(int i) const { return 0.5 * (lo[static_cast<std::size_t>(i)] + hi[static_cast<std::size_t>(i)]); }
  double half_width(int i) const {
    return 0.5 * (hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]);
  }
  void validate() const {
    if (lo.size() != hi.size()) throw std::invalid_argument("control bounds: size mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) throw std::invalid_argument("control bounds: lower must be < upper");
  }
};

/// Gaussian control-channel disturbance with diagonal covariance.
struct DisturbanceModel {
  std::vector<double> mean;
  std::vector<double> variance;  // diagonal of the covariance

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const {
    if (mean.size() != variance.size())
      throw std::invalid_argument("disturbance model: size mismatch");
    for (double v : variance)
      if (v < 0.0) throw std::invalid_argument("disturbance model: negative variance");
  }

  /// T i.i.d. draws from the given stream.
  std::vector<std::vector<double>> sample(int steps, Rng& rng) const {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(steps));
    for (auto& d : out) {
      d.resize(mean.size());
      for (std::size_t i = 0; i < mean.size(); ++i)
        d[i] = mean[i] + std::sqrt(variance[i]) * rng.normal();
    }
    return out;
  }

  std::vector<std::vector<double>> zeros(int steps) const {
    return std::vector<std::vector<double>>(static_cast<std::size_t>(steps),
                                            std::vector<double>(mean.size(), 0.0));
  }
};

/// Discrete-time controlled system x_{t+1} = f(x_t, u_t, d_t). Disturbances
/// are data (never differentiated); states and controls come in a plain and
/// a tape flavor performing identical arithmetic.
class System {
 public:
  virtual ~System() = default;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual int disturbance_dim() const = 0;
  virtual double dt() const = 0;
  virtual const ControlBounds& bounds() const = 0;
  virtual void step(std::span<const double> x, std::span<const double> u,
                    std::span<const double> d, std::span<double> out) const = 0;
  virtual void step(std::span<const ad::Var> x, std::span<const ad::Var> u,
                    std::span<const double> d, std::span<ad::Var> out) const = 0;
};

/// Unrolls a fixed control sequence (the Eq-6 shooting parameterization).
/// Controls must already satisfy the bounds; disturbances may be zeros.
stl::Signal rollout_openloop(const System& sys, std::span<const double> x0,
                             std::span<const std::vector<double>> controls,
                             std::span<const std::vector<double>> disturbances);

/// Tape variant with the controls as differentiable inputs; states are
/// produced on the same tape. Returns the state trajectory (length T+1).
std::vector<std::vector<ad::Var>> rollout_openloop_tape(
    ad::Tape& tape, const System& sys, std::span<const double> x0,
    std::span<const std::vector<ad::Var>> controls,
    std::span<const std::vector<double>> disturbances);

}  // namespace stlsynth::dyn
