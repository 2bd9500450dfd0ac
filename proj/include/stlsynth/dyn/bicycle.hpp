#pragma once

// Kinematic bicycle with zero-order-held controls and disturbance:
//   xdot   = V cos(psi + beta)
//   ydot   = V sin(psi + beta)
//   psidot = (V / l_R) sin(beta)
//   Vdot   = a + d_a,       tan(beta) = l_R tan(delta + d_delta) / (l_R + l_F)
// State (x, y, psi, V); control (a, delta); disturbance (d_delta, d_a).
// Each dt is integrated with fixed-substep RK4 on the held-input ODE, then V
// is clipped to [v_min, v_max] with gradient pass-through inside the range.

#include "stlsynth/ad/scalar.hpp"
#include "stlsynth/dyn/system.hpp"

namespace stlsynth::dyn {

struct BicycleParams {
  double dt = 0.5;
  double lf = 0.5;
  double lr = 0.7;
  double v_min = 0.0;
  double v_max = 5.0;
  int substeps = 4;
  ControlBounds bounds{{-3.0, -0.344}, {3.0, 0.344}};          // (a, delta)
  DisturbanceModel disturbance{{0.0, 0.0}, {0.05, 0.02}};      // (d_delta, d_a)
};

namespace detail {

// Clip with gradient pass-through strictly inside the range; at the
// boundaries the tie rule routes the gradient to the value argument.
inline double clip(double v, double lo, double hi) { return min2(max2(v, lo), hi); }
inline ad::Var clip(ad::Var v, double lo, double hi) {
  ad::Tape& t = *v.tape();
  return t.min2(t.max2(v, t.constant(lo)), t.constant(hi));
}

template <class S>
void bicycle_step_impl(const BicycleParams& p, std::span<const S> x, std::span<const S> u,
                       std::span<const double> d, std::span<S> out) {
  const S& accel = u[0];
  const S& steer = u[1];
  const double d_delta = d.empty() ? 0.0 : d[0];
  const double d_accel = d.empty() ? 0.0 : d[1];

  // Held inputs: beta is constant over the step.
  const S beta = atan(mul_imm(tan(add_imm(steer, d_delta)), p.lr / (p.lr + p.lf)));
  const S sin_beta = sin(beta);
  const S vdot = add_imm(accel, d_accel);

  S sx = x[0], sy = x[1], psi = x[2], v = x[3];
  const double h = p.dt / p.substeps;
  for (int k = 0; k < p.substeps; ++k) {
    // RK4 stages; beta and vdot are stage-independent.
    auto deriv = [&](const S& psi_s, const S& v_s, S& dx, S& dy, S& dpsi) {
      const S heading = psi_s + beta;
      dx = v_s * cos(heading);
      dy = v_s * sin(heading);
      dpsi = mul_imm(v_s, 1.0 / p.lr) * sin_beta;
    };
    S k1x, k1y, k1p, k2x, k2y, k2p, k3x, k3y, k3p, k4x, k4y, k4p;
    deriv(psi, v, k1x, k1y, k1p);
    const S v2 = v + mul_imm(vdot, 0.5 * h);
    deriv(psi + mul_imm(k1p, 0.5 * h), v2, k2x, k2y, k2p);
    deriv(psi + mul_imm(k2p, 0.5 * h), v2, k3x, k3y, k3p);
    const S v4 = v + mul_imm(vdot, h);
    deriv(psi + mul_imm(k3p, h), v4, k4x, k4y, k4p);
    const double w = h / 6.0;
    sx = sx + mul_imm(k1x + mul_imm(k2x + k3x, 2.0) + k4x, w);
    sy = sy + mul_imm(k1y + mul_imm(k2y + k3y, 2.0) + k4y, w);
    psi = psi + mul_imm(k1p + mul_imm(k2p + k3p, 2.0) + k4p, w);
    v = v4;
  }
  out[0] = sx;
  out[1] = sy;
  out[2] = psi;
  out[3] = clip(v, p.v_min, p.v_max);
}

}  // namespace detail

class BicycleSystem final : public System {
 public:
  explicit BicycleSystem(BicycleParams params = {}) : p_(std::move(params)) {
    p_.bounds.validate();
    p_.disturbance.validate();
  }

  const BicycleParams& params() const { return p_; }
  int state_dim() const override { return 4; }
  int control_dim() const override { return 2; }
  int disturbance_dim() const override { return 2; }
  double dt() const override { return p_.dt; }
  const ControlBounds& bounds() const override { return p_.bounds; }

  void step(std::span<const double> x, std::span<const double> u, std::span<const double> d,
            std::span<double> out) const override {
    for (double v : x)
      if (!std::isfinite(v)) throw std::invalid_argument("bicycle step: non-finite state");
    for (double v : u)
      if (!std::isfinite(v)) throw std::invalid_argument("bicycle step: non-finite control");
    detail::bicycle_step_impl<double>(p_, x, u, d, out);
  }
  void step(std::span<const ad::Var> x, std::span<const ad::Var> u, std::span<const double> d,
            std::span<ad::Var> out) const override {
    detail::bicycle_step_impl<ad::Var>(p_, x, u, d, out);
  }

 private:
  BicycleParams p_;
};

}  // namespace stlsynth::dyn
