#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stlsynth/dyn/bicycle.hpp"

using namespace stlsynth;
using namespace stlsynth::dyn;

namespace {

// Independent fine-grained integrator: classic RK4 with many substeps on the
// held-input bicycle ODE, written without the production step code.
std::vector<double> fine_rk4(const BicycleParams& p, std::span<const double> x,
                             std::span<const double> u, std::span<const double> d,
                             int substeps) {
  const double beta =
      std::atan(p.lr * std::tan(u[1] + d[0]) / (p.lr + p.lf));
  auto f = [&](const std::vector<double>& s) {
    return std::vector<double>{s[3] * std::cos(s[2] + beta), s[3] * std::sin(s[2] + beta),
                               s[3] / p.lr * std::sin(beta), u[0] + d[1]};
  };
  std::vector<double> s(x.begin(), x.end());
  const double h = p.dt / substeps;
  for (int k = 0; k < substeps; ++k) {
    auto k1 = f(s);
    std::vector<double> tmp(4);
    for (int i = 0; i < 4; ++i) tmp[i] = s[i] + 0.5 * h * k1[i];
    auto k2 = f(tmp);
    for (int i = 0; i < 4; ++i) tmp[i] = s[i] + 0.5 * h * k2[i];
    auto k3 = f(tmp);
    for (int i = 0; i < 4; ++i) tmp[i] = s[i] + h * k3[i];
    auto k4 = f(tmp);
    for (int i = 0; i < 4; ++i) s[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  s[3] = std::clamp(s[3], p.v_min, p.v_max);
  return s;
}

}  // namespace

TEST_CASE("stationary and straight-line motion") {
  BicycleSystem sys;
  std::vector<double> out(4);

  std::vector<double> rest = {1.0, 2.0, 0.3, 0.0};
  sys.step(rest, std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0}, out);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(rest[i]).epsilon(1e-12));

  std::vector<double> cruise = {0.0, 0.0, 0.0, 2.0};
  sys.step(cruise, std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0}, out);
  CHECK(out[0] == doctest::Approx(1.0));  // 2 m/s * 0.5 s
  CHECK(out[1] == doctest::Approx(0.0));
  CHECK(out[2] == doctest::Approx(0.0));
  CHECK(out[3] == doctest::Approx(2.0));
}

TEST_CASE("speed clamp") {
  BicycleSystem sys;
  std::vector<double> out(4);
  std::vector<double> fast = {0.0, 0.0, 0.0, 4.8};
  sys.step(fast, std::vector<double>{3.0, 0.0}, std::vector<double>{0.0, 0.0}, out);
  CHECK(out[3] == 5.0);

  std::vector<double> slow = {0.0, 0.0, 0.0, 0.2};
  sys.step(slow, std::vector<double>{-3.0, 0.0}, std::vector<double>{0.0, 0.0}, out);
  CHECK(out[3] == 0.0);
}

TEST_CASE("one step matches a 100-substep RK4 oracle") {
  BicycleSystem sys;
  std::vector<double> x = {1.0, -0.5, 0.4, 3.0};
  std::vector<double> u = {0.8, 0.2};
  std::vector<double> d = {0.01, -0.02};
  std::vector<double> out(4);
  sys.step(x, u, d, out);
  auto ref = fine_rk4(sys.params(), x, u, d, 100);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(out[i] - ref[i]) <= 1e-4);
}

TEST_CASE("open-loop rollout shapes and determinism") {
  BicycleSystem sys;
  std::vector<double> x0 = {0.0, 0.0, 0.0, 0.0};

  auto empty = rollout_openloop(sys, x0, {}, {});
  CHECK(empty.states.size() == 1);

  std::vector<std::vector<double>> zero_u(5, {0.0, 0.0});
  std::vector<std::vector<double>> zero_d(5, {0.0, 0.0});
  auto still = rollout_openloop(sys, x0, zero_u, zero_d);
  for (const auto& s : still.states)
    for (int i = 0; i < 4; ++i) CHECK(s[static_cast<std::size_t>(i)] == doctest::Approx(0.0));

  Rng rng(3);
  std::vector<std::vector<double>> u(10);
  for (auto& c : u) c = {rng.uniform(-3.0, 3.0), rng.uniform(-0.344, 0.344)};
  std::vector<std::vector<double>> d(10, {0.0, 0.0});
  auto a = rollout_openloop(sys, x0, u, d);
  auto b = rollout_openloop(sys, x0, u, d);
  REQUIRE(a.states.size() == 11);
  for (std::size_t t = 0; t < a.states.size(); ++t)
    for (int i = 0; i < 4; ++i)
      CHECK(a.states[t][static_cast<std::size_t>(i)] == b.states[t][static_cast<std::size_t>(i)]);

  std::vector<std::vector<double>> bad(9, {0.0, 0.0});
  CHECK_THROWS(rollout_openloop(sys, x0, u, bad));
}

TEST_CASE("speed bound holds along any admissible rollout") {
  BicycleSystem sys;
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x0 = {0.0, 0.0, rng.uniform(-3.0, 3.0), rng.uniform(0.0, 5.0)};
    std::vector<std::vector<double>> u(30), d(30);
    for (auto& c : u) c = {rng.uniform(-3.0, 3.0), rng.uniform(-0.344, 0.344)};
    Rng drng(trial);
    for (auto& c : d) c = sys.params().disturbance.sample(1, drng)[0];
    auto traj = rollout_openloop(sys, x0, u, d);
    for (const auto& s : traj.states) {
      CHECK(s[3] >= 0.0);
      CHECK(s[3] <= 5.0);
    }
  }
}

TEST_CASE("gradient of final position w.r.t. controls matches finite differences") {
  BicycleSystem sys;
  std::vector<double> x0 = {0.0, 0.0, 0.1, 2.0};
  const int T = 6;
  std::vector<std::vector<double>> u(T), d(T, {0.0, 0.0});
  Rng rng(29);
  // Keep V well inside (0, 5) so the clamp subgradient is inactive.
  for (auto& c : u) c = {rng.uniform(-0.4, 0.4), rng.uniform(-0.2, 0.2)};

  ad::Tape tape;
  std::vector<std::vector<ad::Var>> uv;
  for (const auto& c : u) uv.push_back(tape.inputs(c));
  auto states = rollout_openloop_tape(tape, sys, x0, uv, d);
  auto final_x = states.back()[0];
  tape.backward(final_x);

  const double h = 1e-6;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < 2; ++k) {
      auto lo = u, hi = u;
      lo[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] -= h;
      hi[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] += h;
      const double fd = (rollout_openloop(sys, x0, hi, d).states.back()[0] -
                         rollout_openloop(sys, x0, lo, d).states.back()[0]) /
                        (2.0 * h);
      const double grad = tape.adjoint(uv[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]);
      CHECK(std::abs(grad - fd) <= std::max(1e-6, 1e-4 * std::abs(fd)));
    }
  }
}

TEST_CASE("disturbance sampling statistics and determinism") {
  DisturbanceModel m{{0.0, 0.0}, {0.05, 0.02}};

  DisturbanceModel zero{{0.4, -0.2}, {0.0, 0.0}};
  Rng r0(1);
  for (const auto& draw : zero.sample(100, r0)) {
    CHECK(draw[0] == 0.4);
    CHECK(draw[1] == -0.2);
  }

  Rng r1(7);
  const int n = 100000;
  auto draws = m.sample(n, r1);
  double mean0 = 0.0, mean1 = 0.0;
  for (const auto& d : draws) {
    mean0 += d[0];
    mean1 += d[1];
  }
  mean0 /= n;
  mean1 /= n;
  CHECK(std::abs(mean0) <= 3.0 * std::sqrt(0.05 / n));
  CHECK(std::abs(mean1) <= 3.0 * std::sqrt(0.02 / n));

  Rng a(42), b(42);
  auto da = m.sample(50, a);
  auto db = m.sample(50, b);
  for (int t = 0; t < 50; ++t) {
    CHECK(da[static_cast<std::size_t>(t)][0] == db[static_cast<std::size_t>(t)][0]);
    CHECK(da[static_cast<std::size_t>(t)][1] == db[static_cast<std::size_t>(t)][1]);
  }

  CHECK_THROWS(DisturbanceModel({0.0}, {-1.0}).validate());
}
