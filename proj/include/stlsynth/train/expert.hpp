#pragma once

#include "stlsynth/train/train.hpp"

namespace stlsynth::train {

enum class SpecKind { kPhi, kReachAvoid };

struct ExpertOptions {
  SpecKind kind = SpecKind::kPhi;
  int horizon = 55;
  int max_attempts = 30;  // re-tries with jittered gains before giving up
};

/// Waypoint-following proportional controller that produces a demonstration
/// satisfying the case-study specification: approach the coverage region,
/// dwell inside below the speed limit, detour around the obstacle, then stop
/// inside the goal. The result is validated (exact Boolean satisfaction and
/// rho > 0 under zero disturbance); returns nullopt when no attempt passes.
std::optional<Demo> scripted_expert(const dyn::System& sys, const env::CaseStudyLayout& layout,
                                    const env::EnvSample& sample, std::span<const double> x0,
                                    const ExpertOptions& opts, Rng& rng, const Task& task);

struct DemoGenStats {
  int generated = 0;
  int rejected = 0;
};

/// n validated demos on freshly sampled (x_0, e).
DemoSet generate_demos(const Task& task, const env::CaseStudyLayout& layout,
                       const ExpertOptions& opts, int n, std::uint64_t seed,
                       DemoGenStats* stats = nullptr);

/// JSON-lines I/O; one demo per line:
///   {"env": {...}, "x_cov": .., "ood": .., "states": [[x,y,psi,V]..],
///    "controls": [[a,delta]..], "dt": ..}
void save_demos(const DemoSet& demos, const std::string& path);

/// Loads and validates: every demo must satisfy the task formula under the
/// exact Boolean semantics and lie inside the workspace.
DemoSet load_demos(const std::string& path, const Task& task);

}  // namespace stlsynth::train
