#pragma once

#include <optional>

#include "stlsynth/env/environment.hpp"

namespace stlsynth::env {

/// Geometry of the coverage/obstacle/goal family. The coverage circle sits
/// at (x_cov, cov_y) with x_cov drawn from Uniform[xcov_min, xcov_max]; the
/// obstacle x is always midway between the coverage and goal centers.
struct CaseStudyLayout {
  Workspace workspace{0.0, 14.0, 0.0, 10.0};
  double goal_x = 13.0, goal_y = 5.0, goal_r = 1.0;
  double cov_y = 8.0, cov_r = 1.0;
  double obs_y = 6.5, obs_r = 1.0;
  double start_cx = 0.5, start_cy = 5.0, start_r = 1.0;  // start image channel
  // Initial-state set X_0: positions uniform in this box, psi = 0, V = 0.
  double x0_xmin = 0.0, x0_xmax = 1.0, x0_ymin = 4.0, x0_ymax = 6.0;
  double xcov_min = 1.0, xcov_max = 10.0;

  // Thresholds of the case-study specification.
  double cov_speed = 2.0;    // V < 2.0 inside coverage
  double goal_speed = 0.5;   // V < 0.5 inside goal
  int cov_hold_steps = 8;    // alw[0, 8]
};

struct EnvSample {
  Environment env;
  double x_cov = 0.0;
  bool out_of_distribution = false;
};

/// Environment with an explicit coverage x-position. Positions outside
/// [xcov_min, xcov_max] are valid but flagged out-of-distribution.
EnvSample case_study_env(const CaseStudyLayout& layout, double x_cov);

/// x_cov ~ Uniform[xcov_min, xcov_max].
EnvSample sample_case_study_env(const CaseStudyLayout& layout, Rng& rng);

/// Uniform draw from X_0 (position in the start box, psi = 0, V = 0).
std::vector<double> sample_initial_state(const CaseStudyLayout& layout, Rng& rng);

/// Full predicate set for the case study: region predicates plus the state
/// channels (x, y, psi, V).
stl::PredicateLibrary case_study_predicates(const Environment& e);

/// The coverage specification
///   phi = ((ev alw[0,8] phi_cov) until (ev phi_goal)) & alw neg phi_obs
/// with phi_cov = cov < 0 & V < 2, phi_goal = alw (goal < 0 & V < 0.5),
/// phi_obs = obs < 0. The AST equals parsing the canonical text form.
/// Throws if the environment lacks a referenced region kind.
stl::FormulaPtr build_phi(const Environment& e, const CaseStudyLayout& layout = {});

/// The reduced reach-avoid specification ev phi_goal & alw neg phi_obs.
stl::FormulaPtr build_reach_avoid(const Environment& e, const CaseStudyLayout& layout = {});

/// Driving family: a horizontal lane with obstacles at varying positions and
/// a goal disc near the end of the lane.
struct DrivingLayout {
  Workspace workspace{0.0, 20.0, 0.0, 6.0};
  double lane_ylo = 1.5, lane_yhi = 4.5;
  double goal_x = 18.0, goal_y = 3.0, goal_r = 1.2;
  double obs_r = 0.6;
  int n_obstacles = 2;
  double obs_xmin = 4.0, obs_xmax = 14.0;
  double start_cx = 1.0, start_cy = 3.0, start_r = 0.8;
  double x0_xmin = 0.5, x0_xmax = 1.5, x0_ymin = 2.5, x0_ymax = 3.5;

  double near_dist = 1.2;    // psi_near: dist to obstacle < 1.2
  double slow_speed = 0.55;  // V < 0.55 when near
  double goal_speed = 1.0;   // V > 1.0 in the goal
  int goal_hold_steps = 2;   // alw[0, 2]
};

Environment sample_driving_env(const DrivingLayout& layout, Rng& rng);

/// Predicates for the driving family: regions, exact half-plane road margins
/// ("road_lo" = y - lane_ylo, "road_hi" = lane_yhi - y) and state channels.
stl::PredicateLibrary driving_predicates(const Environment& e, const DrivingLayout& layout);

/// The driving specification
///   psi = alw (road_lo > 0 & road_hi > 0 & neg obs < 0)
///       & alw ((obs < 1.2) -> (V < 0.55))
///       & ev alw[0,2] (goal < 0 & V > 1)
stl::FormulaPtr build_psi(const Environment& e, const DrivingLayout& layout = {});

}  // namespace stlsynth::env
