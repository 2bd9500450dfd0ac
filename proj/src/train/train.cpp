#include "stlsynth/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

namespace stlsynth::train {

namespace {

// Stream-id tags for deriving decorrelated RNG streams from the master seed.
enum Stream : std::uint64_t {
  kInit = 1,
  kData = 2,
  kOrder = 3,
  kDist = 4,
  kAdv = 5,
  kAdvDist = 6,
  kProbe = 7,
  kProbeDist = 8,
  kDemoPick = 9,
};

TrainSample make_sample(const Task& task, std::uint64_t seed) {
  Rng rng(seed);
  TrainSample s;
  s.env = task.sample_env(rng);
  s.x0 = task.sample_x0(rng);
  s.image = env::render(s.env.env, task.image_resolution);
  s.lib = task.predicates(s.env.env);
  return s;
}

std::vector<std::vector<double>> draw_disturbance(const dyn::System& sys, int steps,
                                                  std::uint64_t seed, bool enabled) {
  const auto* bicycle = dynamic_cast<const dyn::BicycleSystem*>(&sys);
  if (!bicycle) throw std::logic_error("train: unsupported system type");
  if (!enabled) return bicycle->params().disturbance.zeros(steps);
  Rng rng(seed);
  return bicycle->params().disturbance.sample(steps, rng);
}

}  // namespace

Task make_case_study_task(const dyn::System& sys, const env::CaseStudyLayout& layout,
                          bool reach_avoid_only, int image_resolution) {
  Task task;
  task.sys = &sys;
  task.image_resolution = image_resolution;
  const auto probe = env::case_study_env(layout, 0.5 * (layout.xcov_min + layout.xcov_max));
  task.formula = reach_avoid_only ? env::build_reach_avoid(probe.env, layout)
                                  : env::build_phi(probe.env, layout);
  task.predicates = [](const env::Environment& e) { return env::case_study_predicates(e); };
  task.sample_env = [layout](Rng& rng) { return env::sample_case_study_env(layout, rng); };
  task.sample_x0 = [layout](Rng& rng) { return env::sample_initial_state(layout, rng); };
  task.normalizer = policy::bicycle_normalizer(layout.workspace);
  return task;
}

void TrainConfig::validate() const {
  if (horizon <= 0 || dataset_size < 0 || n_adv < 0 || epochs_full < 0 || epochs_mini < 0 ||
      adversarial_iters < 0 || batch_size <= 0 || probe_count < 0)
    throw std::invalid_argument("train config: counts must be non-negative");
  if (gamma < 0.0 || gamma_imit < 0.0) throw std::invalid_argument("train config: gamma >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
  }
}

void Adam::reset() {
  t_ = 0;
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
}

namespace {

// Per-sample STL loss LeakyReLU(-rho) with gradient, on a caller tape.
double stl_sample_grad(ad::Tape& tape, const PolicyParams& params, const Task& task,
                       const TrainConfig& cfg, const TrainSample& sample, std::uint64_t dist_seed,
                       std::vector<double>* grad) {
  tape.clear();
  const int T = cfg.horizon;
  auto dist = draw_disturbance(*task.sys, T, dist_seed, cfg.disturbance_in_training);
  const std::vector<std::vector<double>> prefix = {sample.x0};
  auto rolled = policy::rollout_tape(tape, params, *task.sys, prefix, &sample.image, dist, T,
                                     policy::GradScope::kAll);
  auto rho = stl::robustness(*task.formula, rolled.states, 0, cfg.robustness, &sample.lib);
  auto loss = tape.leaky_relu(tape.neg(rho));
  if (grad) {
    tape.backward(loss);
    for (std::size_t i = 0; i < params.data.size(); ++i)
      (*grad)[i] = tape.adjoint(rolled.params[i]);
  }
  return loss.value();
}

// Per-demo imitation loss on a caller tape:
//   (1/T_i) sum_t [ mean_c dx~^2 + gamma_imit * mean_c du~^2 ]
// with states in the policy's normalized coordinates and controls scaled to
// [-1, 1] by the bounds.
double imitation_demo_grad(ad::Tape& tape, const PolicyParams& params, const Task& task,
                           const TrainConfig& cfg, const Demo& demo, std::vector<double>* grad) {
  tape.clear();
  const int T = demo.steps();
  const dyn::System& sys = *task.sys;
  auto dist = draw_disturbance(sys, T, 0, /*enabled=*/false);
  const std::vector<std::vector<double>> prefix = {demo.states.front()};
  auto rolled = policy::rollout_tape(tape, params, sys, prefix, &demo.image, dist, T,
                                     policy::GradScope::kAll);

  const auto& norm = params.norm;
  const int n = sys.state_dim();
  const int m = sys.control_dim();
  const auto& bounds = sys.bounds();
  ad::Var acc = tape.constant(0.0);
  for (int t = 1; t <= T; ++t) {
    ad::Var step_err = tape.constant(0.0);
    for (int k = 0; k < n; ++k) {
      const double ref =
          (demo.states[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] -
           norm.offset[static_cast<std::size_t>(k)]) /
          norm.scale[static_cast<std::size_t>(k)];
      auto xn = ad::mul_imm(
          ad::add_imm(rolled.states[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)],
                      -norm.offset[static_cast<std::size_t>(k)]),
          1.0 / norm.scale[static_cast<std::size_t>(k)]);
      step_err = step_err + ad::square(ad::add_imm(xn, -ref));
    }
    acc = acc + ad::mul_imm(step_err, 1.0 / n);
  }
  for (int t = 0; t < T; ++t) {
    ad::Var step_err = tape.constant(0.0);
    for (int k = 0; k < m; ++k) {
      const double scale = 1.0 / bounds.half_width(k);
      const double ref =
          (demo.controls[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] -
           bounds.mid(k)) *
          scale;
      auto un = ad::mul_imm(
          ad::add_imm(rolled.controls[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)],
                      -bounds.mid(k)),
          scale);
      step_err = step_err + ad::square(ad::add_imm(un, -ref));
    }
    acc = acc + ad::mul_imm(step_err, cfg.gamma_imit / m);
  }
  auto loss = tape.mul_imm(acc, 1.0 / T);
  if (grad) {
    tape.backward(loss);
    for (std::size_t i = 0; i < params.data.size(); ++i)
      (*grad)[i] = tape.adjoint(rolled.params[i]);
  }
  return loss.value();
}

// Runs fn(i) for i in [0, n) across `threads` workers; worker w handles the
// contiguous block [w*n/threads, (w+1)*n/threads). Results must be written
// to per-index slots so the subsequent ordered reduction is independent of
// the thread count.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < threads; ++w) {
    const int lo = n * w / threads;
    const int hi = n * (w + 1) / threads;
    pool.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct BatchGrad {
  double loss_stl = 0.0;
  double loss_imit = 0.0;
  std::vector<double> grad;
};

// One optimization step's loss and gradient: Eq. 2 over a sample batch and a
// demo batch. Per-sample gradients are reduced in index order so the result
// is independent of the thread count.
BatchGrad batch_gradient(const PolicyParams& params, const Task& task, const TrainConfig& cfg,
                         std::span<const TrainSample* const> batch,
                         std::span<const std::uint64_t> dist_seeds,
                         std::span<const Demo* const> demo_batch) {
  const std::size_t np = params.data.size();
  const int ns = static_cast<int>(batch.size());
  const int nd = static_cast<int>(demo_batch.size());
  std::vector<std::vector<double>> sample_grads(static_cast<std::size_t>(ns + nd),
                                                std::vector<double>(np, 0.0));
  std::vector<double> sample_losses(static_cast<std::size_t>(ns + nd), 0.0);

  parallel_for(ns + nd, cfg.threads, [&](int i) {
    thread_local ad::Tape tape;
    auto& grad = sample_grads[static_cast<std::size_t>(i)];
    if (i < ns) {
      sample_losses[static_cast<std::size_t>(i)] =
          stl_sample_grad(tape, params, task, cfg, *batch[static_cast<std::size_t>(i)],
                          dist_seeds[static_cast<std::size_t>(i)], &grad);
    } else {
      sample_losses[static_cast<std::size_t>(i)] = imitation_demo_grad(
          tape, params, task, cfg, *demo_batch[static_cast<std::size_t>(i - ns)], &grad);
    }
  });

  BatchGrad out;
  out.grad.assign(np, 0.0);
  for (int i = 0; i < ns; ++i) {
    out.loss_stl += sample_losses[static_cast<std::size_t>(i)];
    const auto& g = sample_grads[static_cast<std::size_t>(i)];
    const double w = 1.0 / ns;
    for (std::size_t j = 0; j < np; ++j) out.grad[j] += w * g[j];
  }
  out.loss_stl /= std::max(1, ns);
  if (nd > 0 && cfg.gamma > 0.0) {
    double imit = 0.0;
    for (int i = 0; i < nd; ++i) {
      imit += sample_losses[static_cast<std::size_t>(ns + i)];
      const auto& g = sample_grads[static_cast<std::size_t>(ns + i)];
      const double w = cfg.gamma / nd;
      for (std::size_t j = 0; j < np; ++j) out.grad[j] += w * g[j];
    }
    out.loss_imit = imit / nd;
  }
  return out;
}

}  // namespace

double loss_stl(const PolicyParams& params, const Task& task, const TrainConfig& cfg,
                std::span<const TrainSample> samples, std::span<const std::uint64_t> dist_seeds,
                std::vector<double>* grad) {
  if (samples.empty()) throw std::invalid_argument("loss_stl: empty dataset");
  if (samples.size() != dist_seeds.size())
    throw std::invalid_argument("loss_stl: one disturbance seed per sample required");
  const std::size_t np = params.data.size();
  if (grad) grad->assign(np, 0.0);
  ad::Tape tape;
  std::vector<double> g(np);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    total += stl_sample_grad(tape, params, task, cfg, samples[i], dist_seeds[i],
                             grad ? &g : nullptr);
    if (grad)
      for (std::size_t j = 0; j < np; ++j) (*grad)[j] += g[j] / static_cast<double>(samples.size());
  }
  return total / static_cast<double>(samples.size());
}

double loss_imitation(const PolicyParams& params, const Task& task, const TrainConfig& cfg,
                      std::span<const Demo> demos, std::vector<double>* grad) {
  if (demos.empty()) throw std::invalid_argument("loss_imitation: empty demo set");
  const std::size_t np = params.data.size();
  if (grad) grad->assign(np, 0.0);
  ad::Tape tape;
  std::vector<double> g(np);
  double total = 0.0;
  for (const Demo& d : demos) {
    total += imitation_demo_grad(tape, params, task, cfg, d, grad ? &g : nullptr);
    if (grad)
      for (std::size_t j = 0; j < np; ++j) (*grad)[j] += g[j] / static_cast<double>(demos.size());
  }
  return total / static_cast<double>(demos.size());
}

std::vector<EpochStats> train_epochs(PolicyParams& params, const Task& task,
                                     const Dataset& dataset, const DemoSet& demos,
                                     const TrainConfig& cfg, int epochs,
                                     std::uint64_t phase_salt, Adam& opt) {
  cfg.validate();
  std::vector<EpochStats> history;
  if (epochs <= 0 || dataset.empty()) return history;
  const int n = static_cast<int>(dataset.size());
  std::vector<int> order(static_cast<std::size_t>(n));

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(cfg.seed, kOrder, phase_salt, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(std::span<int>(order));

    EpochStats stats;
    int steps = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      std::vector<const TrainSample*> batch;
      std::vector<std::uint64_t> seeds;
      for (int i = start; i < stop; ++i) {
        const int idx = order[static_cast<std::size_t>(i)];
        batch.push_back(&dataset[static_cast<std::size_t>(idx)]);
        seeds.push_back(mix_seed(cfg.seed, kDist,
                                 phase_salt * 100000 + static_cast<std::uint64_t>(epoch),
                                 static_cast<std::uint64_t>(idx)));
      }
      std::vector<const Demo*> demo_batch;
      if (!demos.empty() && cfg.gamma > 0.0) {
        const int nd = std::min<int>(cfg.demo_batch, static_cast<int>(demos.size()));
        std::vector<int> demo_order(demos.size());
        std::iota(demo_order.begin(), demo_order.end(), 0);
        Rng demo_rng(mix_seed(cfg.seed, kDemoPick,
                              phase_salt * 100000 + static_cast<std::uint64_t>(epoch),
                              static_cast<std::uint64_t>(start)));
        demo_rng.shuffle(std::span<int>(demo_order));
        for (int i = 0; i < nd; ++i)
          demo_batch.push_back(&demos[static_cast<std::size_t>(demo_order[static_cast<std::size_t>(i)])]);
      }

      BatchGrad bg = batch_gradient(params, task, cfg, batch, seeds, demo_batch);
      const double loss_total = bg.loss_stl + cfg.gamma * bg.loss_imit;
      if (!std::isfinite(loss_total))
        throw TrainingDiverged("training loss became non-finite at epoch " +
                               std::to_string(epoch));
      opt.step(params.data, bg.grad);
      stats.loss_stl += bg.loss_stl;
      stats.loss_imit += bg.loss_imit;
      stats.loss_train += loss_total;
      ++steps;
    }
    stats.loss_stl /= steps;
    stats.loss_imit /= steps;
    stats.loss_train /= steps;
    history.push_back(stats);
  }
  return history;
}

Dataset sample_dataset(const Task& task, const TrainConfig& cfg, int n, std::uint64_t salt) {
  Dataset out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.push_back(make_sample(task, mix_seed(cfg.seed, kData, salt, static_cast<std::uint64_t>(i))));
  return out;
}

namespace {

double plain_rho(const PolicyParams& params, const Task& task, const TrainConfig& cfg,
                 const TrainSample& sample, std::uint64_t dist_seed, bool disturb) {
  auto dist = draw_disturbance(*task.sys, cfg.horizon, dist_seed, disturb);
  const std::vector<std::vector<double>> prefix = {sample.x0};
  auto rolled = policy::rollout(params, *task.sys, prefix, &sample.image, dist, cfg.horizon);
  return stl::robustness_value(*task.formula, rolled.signal, 0, stl::EvalOptions::exact(),
                               &sample.lib);
}

}  // namespace

std::vector<TrainSample> adversarial_search(const PolicyParams& params, const Task& task,
                                            const TrainConfig& cfg, std::uint64_t phase_salt,
                                            int* raw_drawn) {
  std::vector<TrainSample> found;
  const int budget = cfg.adv_budget_factor * std::max(1, cfg.n_adv);
  int drawn = 0;
  for (; drawn < budget && static_cast<int>(found.size()) < cfg.n_adv; ++drawn) {
    TrainSample s =
        make_sample(task, mix_seed(cfg.seed, kAdv, phase_salt, static_cast<std::uint64_t>(drawn)));
    s.replay_seed =
        mix_seed(cfg.seed, kAdvDist, phase_salt, static_cast<std::uint64_t>(drawn));
    const double rho = plain_rho(params, task, cfg, s, s.replay_seed, true);
    if (rho < 0.0) {
      s.adversarial = true;
      found.push_back(std::move(s));
    }
  }
  if (raw_drawn) *raw_drawn = drawn;
  return found;
}

double replay_rho(const PolicyParams& params, const Task& task, const TrainConfig& cfg,
                  const TrainSample& sample) {
  return plain_rho(params, task, cfg, sample, sample.replay_seed, true);
}

Dataset make_probe_set(const Task& task, const TrainConfig& cfg) {
  Dataset probes;
  probes.reserve(static_cast<std::size_t>(cfg.probe_count));
  for (int i = 0; i < cfg.probe_count; ++i) {
    TrainSample s = make_sample(task, mix_seed(cfg.seed, kProbe, 0, static_cast<std::uint64_t>(i)));
    s.replay_seed = mix_seed(cfg.seed, kProbeDist, 0, static_cast<std::uint64_t>(i));
    probes.push_back(std::move(s));
  }
  return probes;
}

ProbeReport evaluate_probes(const PolicyParams& params, const Task& task, const TrainConfig& cfg,
                            std::span<const TrainSample> probes, std::vector<double>* rhos_out) {
  ProbeReport report;
  if (probes.empty()) return report;
  std::vector<double> rhos(probes.size(), 0.0);
  parallel_for(static_cast<int>(probes.size()), cfg.threads, [&](int i) {
    rhos[static_cast<std::size_t>(i)] = plain_rho(params, task, cfg, probes[static_cast<std::size_t>(i)],
                                                  probes[static_cast<std::size_t>(i)].replay_seed, true);
  });
  int violations = 0;
  double sum = 0.0;
  for (double r : rhos) {
    if (r < 0.0) ++violations;
    sum += r;
  }
  if (rhos_out) *rhos_out = rhos;
  report.violation_rate = static_cast<double>(violations) / static_cast<double>(probes.size());
  report.satisfaction_rate = 1.0 - report.violation_rate;
  report.mean_rho = sum / static_cast<double>(probes.size());
  std::sort(rhos.begin(), rhos.end());
  const std::size_t nn = rhos.size();
  report.median_rho = nn % 2 ? rhos[nn / 2] : 0.5 * (rhos[nn / 2 - 1] + rhos[nn / 2]);
  return report;
}

SynthesisResult synthesize(const Task& task, const TrainConfig& cfg, const PolicyHyper& hyper,
                           const DemoSet& demos, const ProgressFn& progress) {
  cfg.validate();
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };

  SynthesisResult result;
  Rng init_rng(mix_seed(cfg.seed, kInit, 0));
  result.params = policy::init_params(hyper, task.normalizer, init_rng);

  Dataset probes = make_probe_set(task, cfg);
  Dataset dataset = sample_dataset(task, cfg, cfg.dataset_size, /*salt=*/0);

  Adam opt(result.params.data.size(), cfg.lr);
  auto hist = train_epochs(result.params, task, dataset, demos, cfg, cfg.epochs_full, 0, opt);
  result.history.insert(result.history.end(), hist.begin(), hist.end());

  IterationReport rep0;
  rep0.k = 0;
  rep0.probe = evaluate_probes(result.params, task, cfg, probes);
  result.reports.push_back(rep0);
  say("initial training done: violation_rate=" + std::to_string(rep0.probe.violation_rate));

  for (int k = 1; k <= cfg.adversarial_iters; ++k) {
    IterationReport rep;
    rep.k = k;
    auto adv = adversarial_search(result.params, task, cfg, static_cast<std::uint64_t>(k),
                                  &rep.adv_drawn);
    rep.adv_found = static_cast<int>(adv.size());

    dataset = sample_dataset(task, cfg, cfg.dataset_size, static_cast<std::uint64_t>(k));
    for (auto& s : adv) dataset.push_back(std::move(s));

    Adam mini_opt(result.params.data.size(), cfg.lr);
    auto mini_hist = train_epochs(result.params, task, dataset, demos, cfg, cfg.epochs_mini,
                                  static_cast<std::uint64_t>(k), mini_opt);
    result.history.insert(result.history.end(), mini_hist.begin(), mini_hist.end());

    rep.probe = evaluate_probes(result.params, task, cfg, probes);
    result.reports.push_back(rep);
    say("adversarial iteration " + std::to_string(k) +
        ": found=" + std::to_string(rep.adv_found) +
        " violation_rate=" + std::to_string(rep.probe.violation_rate));
  }
  return result;
}

}  // namespace stlsynth::train
