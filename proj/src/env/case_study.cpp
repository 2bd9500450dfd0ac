#include "stlsynth/env/case_study.hpp"

#include "stlsynth/ad/scalar.hpp"

namespace stlsynth::env {

EnvSample case_study_env(const CaseStudyLayout& layout, double x_cov) {
  EnvSample sample;
  sample.x_cov = x_cov;
  sample.out_of_distribution = x_cov < layout.xcov_min || x_cov > layout.xcov_max;
  Environment& e = sample.env;
  e.workspace = layout.workspace;
  e.regions = {
      Region{RegionKind::kStart, layout.start_cx, layout.start_cy, layout.start_r},
      Region{RegionKind::kCoverage, x_cov, layout.cov_y, layout.cov_r},
      // The obstacle x sits halfway between the coverage and goal centers.
      Region{RegionKind::kObstacle, 0.5 * (x_cov + layout.goal_x), layout.obs_y, layout.obs_r},
      Region{RegionKind::kGoal, layout.goal_x, layout.goal_y, layout.goal_r},
  };
  return sample;
}

EnvSample sample_case_study_env(const CaseStudyLayout& layout, Rng& rng) {
  return case_study_env(layout, rng.uniform(layout.xcov_min, layout.xcov_max));
}

std::vector<double> sample_initial_state(const CaseStudyLayout& layout, Rng& rng) {
  return {rng.uniform(layout.x0_xmin, layout.x0_xmax), rng.uniform(layout.x0_ymin, layout.x0_ymax),
          0.0, 0.0};
}

stl::PredicateLibrary case_study_predicates(const Environment& e) {
  stl::PredicateLibrary lib = bind_predicates(e);
  lib.merge(bicycle_channel_predicates());
  return lib;
}

namespace {
void require(const Environment& e, RegionKind kind) {
  if (!e.has(kind))
    throw std::invalid_argument(std::string("environment lacks the required '") +
                                kind_name(kind) + "' region");
}

stl::FormulaPtr less_than(const char* name, double c) {
  return stl::negate(stl::pred(name, c));
}
}  // namespace

stl::FormulaPtr build_phi(const Environment& e, const CaseStudyLayout& layout) {
  require(e, RegionKind::kCoverage);
  require(e, RegionKind::kGoal);
  require(e, RegionKind::kObstacle);
  using namespace stl;
  FormulaPtr phi_cov = conj(less_than("cov", 0.0), less_than("V", layout.cov_speed));
  FormulaPtr phi_goal = always(conj(less_than("goal", 0.0), less_than("V", layout.goal_speed)));
  FormulaPtr phi_obs = less_than("obs", 0.0);
  return conj(until(eventually(always(phi_cov, Interval{0, layout.cov_hold_steps})),
                    eventually(phi_goal)),
              always(negate(phi_obs)));
}

stl::FormulaPtr build_reach_avoid(const Environment& e, const CaseStudyLayout& layout) {
  require(e, RegionKind::kGoal);
  require(e, RegionKind::kObstacle);
  using namespace stl;
  FormulaPtr phi_goal = always(conj(less_than("goal", 0.0), less_than("V", layout.goal_speed)));
  return conj(eventually(phi_goal), always(negate(less_than("obs", 0.0))));
}

Environment sample_driving_env(const DrivingLayout& layout, Rng& rng) {
  Environment e;
  e.workspace = layout.workspace;
  e.channel_order = {RegionKind::kStart, RegionKind::kObstacle, RegionKind::kGoal,
                     RegionKind::kRoadBoundary};
  e.regions.push_back(Region{RegionKind::kStart, layout.start_cx, layout.start_cy, layout.start_r});
  e.regions.push_back(Region{RegionKind::kGoal, layout.goal_x, layout.goal_y, layout.goal_r});
  // Lane edges rendered as huge circles whose boundary approximates the edge
  // lines; predicates use exact half-planes.
  const double big = 1000.0;
  const double mid_x = 0.5 * (layout.workspace.xmin + layout.workspace.xmax);
  e.regions.push_back(Region{RegionKind::kRoadBoundary, mid_x, layout.lane_ylo - big, big});
  e.regions.push_back(Region{RegionKind::kRoadBoundary, mid_x, layout.lane_yhi + big, big});
  const double span = (layout.obs_xmax - layout.obs_xmin) / layout.n_obstacles;
  for (int i = 0; i < layout.n_obstacles; ++i) {
    const double x = layout.obs_xmin + span * (i + rng.uniform());
    const double y = rng.uniform(layout.lane_ylo + layout.obs_r, layout.lane_yhi - layout.obs_r);
    e.regions.push_back(Region{RegionKind::kObstacle, x, y, layout.obs_r});
  }
  return e;
}

stl::PredicateLibrary driving_predicates(const Environment& e, const DrivingLayout& layout) {
  stl::PredicateLibrary lib = bind_predicates(e);
  lib.merge(bicycle_channel_predicates());
  const double ylo = layout.lane_ylo, yhi = layout.lane_yhi;
  lib.add("road_lo", stl::make_mu([ylo](auto state) { return add_imm(state[1], -ylo); }));
  lib.add("road_hi", stl::make_mu(
                         [yhi](auto state) { return add_imm(mul_imm(state[1], -1.0), yhi); }));
  return lib;
}

stl::FormulaPtr build_psi(const Environment& e, const DrivingLayout& layout) {
  require(e, RegionKind::kGoal);
  require(e, RegionKind::kObstacle);
  using namespace stl;
  FormulaPtr psi_obs = always(
      conj(conj(pred("road_lo", 0.0), pred("road_hi", 0.0)), negate(less_than("obs", 0.0))));
  FormulaPtr psi_slow =
      always(implies(less_than("obs", layout.near_dist), less_than("V", layout.slow_speed)));
  FormulaPtr psi_goal = eventually(always(
      conj(less_than("goal", 0.0), pred("V", layout.goal_speed)),
      Interval{0, layout.goal_hold_steps}));
  return conj(conj(psi_obs, psi_slow), psi_goal);
}

}  // namespace stlsynth::env
