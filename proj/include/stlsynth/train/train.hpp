#pragma once

#include <functional>
#include <optional>

#include "stlsynth/dyn/system.hpp"
#include "stlsynth/env/case_study.hpp"
#include "stlsynth/policy/policy.hpp"
#include "stlsynth/stl/robustness.hpp"

namespace stlsynth::train {

/// Everything the synthesis loop needs to know about the problem: the
/// system, the (x_0, e) distribution, and how an environment binds to the
/// specification. The formula AST is environment-independent (atoms are
/// names); only the predicate library varies per environment.
struct Task {
  const dyn::System* sys = nullptr;
  stl::FormulaPtr formula;
  std::function<stl::PredicateLibrary(const env::Environment&)> predicates;
  std::function<env::EnvSample(Rng&)> sample_env;
  std::function<std::vector<double>(Rng&)> sample_x0;
  policy::Normalizer normalizer;
  int image_resolution = 32;
};

/// The coverage task phi (Eq. 5 shape) or the reduced reach-avoid task on
/// the bicycle case-study family.
Task make_case_study_task(const dyn::System& sys, const env::CaseStudyLayout& layout,
                          bool reach_avoid_only, int image_resolution);

struct TrainConfig {
  int horizon = 55;           // T
  int dataset_size = 256;     // N
  int n_adv = 32;             // N_adv
  int epochs_full = 200;      // N_full
  int epochs_mini = 50;       // N_mini
  int adversarial_iters = 5;  // K
  double gamma = 1.4;         // imitation weight in Eq. 2
  double gamma_imit = 0.5;    // control-error weight inside Delta (Eq. 4)
  double lr = 1e-3;
  int batch_size = 32;
  int demo_batch = 8;         // demos per optimization step
  std::uint64_t seed = 0;
  stl::EvalOptions robustness{};  // exact by default; smooth via temperature
  bool disturbance_in_training = true;
  int adv_budget_factor = 50;  // raw-sample budget = factor * n_adv
  int probe_count = 256;
  int threads = 1;

  void validate() const;
};

struct TrainSample {
  std::vector<double> x0;
  env::EnvSample env;
  env::EnvImage image;
  stl::PredicateLibrary lib;
  std::uint64_t replay_seed = 0;  // adversarial samples: seed that violated
  bool adversarial = false;
};

using Dataset = std::vector<TrainSample>;

/// One expert demonstration: a dynamically feasible trajectory with its
/// controls and environment. Valid demos satisfy the task formula under the
/// exact Boolean semantics.
struct Demo {
  env::EnvSample env;
  env::EnvImage image;
  stl::PredicateLibrary lib;
  std::vector<std::vector<double>> states;    // length T_i + 1
  std::vector<std::vector<double>> controls;  // length T_i
  double dt = 0.5;

  int steps() const { return static_cast<int>(controls.size()); }
};

using DemoSet = std::vector<Demo>;

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// Gradient-descent step (pass the negated gradient to ascend).
  void step(std::span<double> params, std::span<const double> grad);
  void reset();
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Thrown when the training loss stops being finite. The caller's parameter
/// vector holds the last finite iterate.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean LeakyReLU(-rho) over the dataset (Eq. 3), each rho from a fresh
/// seeded rollout with disturbance. Fills `grad` (size = parameter count)
/// with d loss / d theta if non-null.
double loss_stl(const PolicyParams& params, const Task& task, const TrainConfig& cfg,
                std::span<const TrainSample> samples, std::span<const std::uint64_t> dist_seeds,
                std::vector<double>* grad);

/// Eq. 4: mean over demos of (1/T_i) sum_t [mse_t(states) + gamma_imit *
/// mse_t(controls)], states compared after policy normalization, controls
/// after bound normalization; rollouts are zero-disturbance and teacher-free.
double loss_imitation(const PolicyParams& params, const Task& task, const TrainConfig& cfg,
                      std::span<const Demo> demos, std::vector<double>* grad);

struct EpochStats {
  double loss_stl = 0.0;
  double loss_imit = 0.0;
  double loss_train = 0.0;
};

/// Minibatch Adam on Eq. 2 for `epochs` epochs. Deterministic given
/// (cfg.seed, phase_salt). Each sample redraws its disturbance every epoch.
std::vector<EpochStats> train_epochs(PolicyParams& params, const Task& task,
                                     const Dataset& dataset, const DemoSet& demos,
                                     const TrainConfig& cfg, int epochs,
                                     std::uint64_t phase_salt, Adam& opt);

/// Uniformly samples (x_0, e), keeps samples whose disturbed rollout
/// violates the formula (exact rho < 0), until n_adv found or the raw-sample
/// budget runs out. Every returned sample stores the violating seed.
std::vector<TrainSample> adversarial_search(const PolicyParams& params, const Task& task,
                                            const TrainConfig& cfg, std::uint64_t phase_salt,
                                            int* raw_drawn = nullptr);

/// Re-rolls an adversarial sample with its stored seed; returns exact rho.
double replay_rho(const PolicyParams& params, const Task& task, const TrainConfig& cfg,
                  const TrainSample& sample);

struct ProbeReport {
  double violation_rate = 0.0;
  double mean_rho = 0.0;
  double median_rho = 0.0;
  double satisfaction_rate = 0.0;
};

/// Evaluates params on a fixed probe set (plain rollouts, one seeded
/// disturbance draw each, exact robustness).
ProbeReport evaluate_probes(const PolicyParams& params, const Task& task, const TrainConfig& cfg,
                            std::span<const TrainSample> probes,
                            std::vector<double>* rhos = nullptr);

/// The held-out probe set used by synthesize()'s per-iteration reports.
Dataset make_probe_set(const Task& task, const TrainConfig& cfg);

struct IterationReport {
  int k = 0;  // 0 = after initial full training
  ProbeReport probe;
  int adv_found = 0;
  int adv_drawn = 0;
};

struct SynthesisResult {
  PolicyParams params;
  std::vector<IterationReport> reports;
  std::vector<EpochStats> history;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Algorithm 1: uniform dataset, N_full epochs, then K rounds of
/// (adversarial search; fresh S_0; S = S_0 + S_adv; N_mini epochs).
SynthesisResult synthesize(const Task& task, const TrainConfig& cfg, const PolicyHyper& hyper,
                           const DemoSet& demos, const ProgressFn& progress = nullptr);

/// Fresh uniform dataset of n samples (salt distinguishes refreshes).
Dataset sample_dataset(const Task& task, const TrainConfig& cfg, int n, std::uint64_t salt);

}  // namespace stlsynth::train
