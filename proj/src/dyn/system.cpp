#include "stlsynth/dyn/system.hpp"

namespace stlsynth::dyn {

namespace {
void check_lengths(const System& sys, std::size_t x0, std::size_t controls,
                   std::size_t disturbances) {
  if (static_cast<int>(x0) != sys.state_dim())
    throw std::invalid_argument("rollout: initial state dimension mismatch");
  if (controls != disturbances)
    throw std::invalid_argument("rollout: controls/disturbances length mismatch");
}
}  // namespace

stl::Signal rollout_openloop(const System& sys, std::span<const double> x0,
                             std::span<const std::vector<double>> controls,
                             std::span<const std::vector<double>> disturbances) {
  check_lengths(sys, x0.size(), controls.size(), disturbances.size());
  stl::Signal s;
  s.dt = sys.dt();
  s.states.reserve(controls.size() + 1);
  s.states.emplace_back(x0.begin(), x0.end());
  std::vector<double> next(static_cast<std::size_t>(sys.state_dim()));
  for (std::size_t t = 0; t < controls.size(); ++t) {
    sys.step(s.states.back(), controls[t], disturbances[t], next);
    s.states.push_back(next);
  }
  return s;
}

std::vector<std::vector<ad::Var>> rollout_openloop_tape(
    ad::Tape& tape, const System& sys, std::span<const double> x0,
    std::span<const std::vector<ad::Var>> controls,
    std::span<const std::vector<double>> disturbances) {
  check_lengths(sys, x0.size(), controls.size(), disturbances.size());
  std::vector<std::vector<ad::Var>> states;
  states.reserve(controls.size() + 1);
  states.push_back(tape.constants(x0));
  std::vector<ad::Var> next(static_cast<std::size_t>(sys.state_dim()));
  for (std::size_t t = 0; t < controls.size(); ++t) {
    sys.step(states.back(), controls[t], disturbances[t], next);
    states.push_back(next);
  }
  return states;
}

}  // namespace stlsynth::dyn
