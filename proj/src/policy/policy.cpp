#include "stlsynth/policy/policy.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "stlsynth/policy/network.hpp"

namespace stlsynth::policy {

Normalizer bicycle_normalizer(const env::Workspace& ws, double v_max) {
  Normalizer n;
  n.offset = {0.5 * (ws.xmin + ws.xmax), 0.5 * (ws.ymin + ws.ymax), 0.0, 0.0};
  n.scale = {0.5 * ws.width(), 0.5 * ws.height(), std::numbers::pi, v_max};
  return n;
}

Segments make_segments(const PolicyHyper& h) {
  Segments s;
  std::size_t off = 0;
  auto block = [&off](std::size_t len) {
    Segments::Block b{off, len};
    off += len;
    return b;
  };
  const auto k2 = static_cast<std::size_t>(h.kernel) * h.kernel;
  s.conv1_w = block(static_cast<std::size_t>(h.conv1_filters) * h.image_channels * k2);
  s.conv1_b = block(static_cast<std::size_t>(h.conv1_filters));
  s.conv2_w = block(static_cast<std::size_t>(h.conv2_filters) * h.conv1_filters * k2);
  s.conv2_b = block(static_cast<std::size_t>(h.conv2_filters));
  s.fc_feat_w = block(static_cast<std::size_t>(h.n_c) * h.conv2_flat());
  s.fc_feat_b = block(static_cast<std::size_t>(h.n_c));
  s.fc_h0_w = block(static_cast<std::size_t>(h.n_h) * h.n_c);
  s.fc_h0_b = block(static_cast<std::size_t>(h.n_h));
  s.fc_c0_w = block(static_cast<std::size_t>(h.n_h) * h.n_c);
  s.fc_c0_b = block(static_cast<std::size_t>(h.n_h));
  s.lstm_wx = block(static_cast<std::size_t>(4 * h.n_h) * h.state_dim);
  s.lstm_wh = block(static_cast<std::size_t>(4 * h.n_h) * h.n_h);
  s.lstm_b = block(static_cast<std::size_t>(4 * h.n_h));
  s.head_offset = off;
  s.head_w1 = block(static_cast<std::size_t>(h.head_hidden) * h.n_h);
  s.head_b1 = block(static_cast<std::size_t>(h.head_hidden));
  s.head_w2 = block(static_cast<std::size_t>(h.control_dim) * h.head_hidden);
  s.head_b2 = block(static_cast<std::size_t>(h.control_dim));
  s.total = off;
  return s;
}

PolicyParams init_params(const PolicyHyper& hyper, const Normalizer& norm, Rng& rng) {
  PolicyParams p;
  p.hyper = hyper;
  p.norm = norm;
  p.seg = make_segments(hyper);
  p.data.assign(p.seg.total, 0.0);
  auto fill = [&](const Segments::Block& b, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < b.len; ++i) p.data[b.off + i] = rng.uniform(-bound, bound);
  };
  const int k2 = hyper.kernel * hyper.kernel;
  fill(p.seg.conv1_w, hyper.image_channels * k2);
  fill(p.seg.conv2_w, hyper.conv1_filters * k2);
  fill(p.seg.fc_feat_w, hyper.conv2_flat());
  fill(p.seg.fc_h0_w, hyper.n_c);
  fill(p.seg.fc_c0_w, hyper.n_c);
  fill(p.seg.lstm_wx, hyper.state_dim);
  fill(p.seg.lstm_wh, hyper.n_h);
  fill(p.seg.head_w1, hyper.n_h);
  fill(p.seg.head_w2, hyper.head_hidden);
  // Forget-gate bias +1 for stable long-horizon credit assignment.
  for (int j = 0; j < hyper.n_h; ++j)
    p.data[p.seg.lstm_b.off + static_cast<std::size_t>(hyper.n_h + j)] = 1.0;
  return p;
}

nlohmann::json checkpoint_to_json(const PolicyParams& p) {
  const PolicyHyper& h = p.hyper;
  return nlohmann::json{
      {"format_version", 1},
      {"hyper",
       {{"state_dim", h.state_dim},
        {"control_dim", h.control_dim},
        {"n_h", h.n_h},
        {"n_c", h.n_c},
        {"image_size", h.image_size},
        {"image_channels", h.image_channels},
        {"conv1_filters", h.conv1_filters},
        {"conv2_filters", h.conv2_filters},
        {"kernel", h.kernel},
        {"stride", h.stride},
        {"head_hidden", h.head_hidden}}},
      {"normalizer", {{"offset", p.norm.offset}, {"scale", p.norm.scale}}},
      {"data", p.data}};
}

PolicyParams checkpoint_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("checkpoint: unsupported format version");
  PolicyParams p;
  const auto& h = j.at("hyper");
  p.hyper.state_dim = h.at("state_dim").get<int>();
  p.hyper.control_dim = h.at("control_dim").get<int>();
  p.hyper.n_h = h.at("n_h").get<int>();
  p.hyper.n_c = h.at("n_c").get<int>();
  p.hyper.image_size = h.at("image_size").get<int>();
  p.hyper.image_channels = h.at("image_channels").get<int>();
  p.hyper.conv1_filters = h.at("conv1_filters").get<int>();
  p.hyper.conv2_filters = h.at("conv2_filters").get<int>();
  p.hyper.kernel = h.at("kernel").get<int>();
  p.hyper.stride = h.at("stride").get<int>();
  p.hyper.head_hidden = h.at("head_hidden").get<int>();
  p.norm.offset = j.at("normalizer").at("offset").get<std::vector<double>>();
  p.norm.scale = j.at("normalizer").at("scale").get<std::vector<double>>();
  p.data = j.at("data").get<std::vector<double>>();
  p.seg = make_segments(p.hyper);
  if (p.data.size() != p.seg.total)
    throw std::runtime_error("checkpoint: parameter count does not match hyperparameters");
  return p;
}

void save_checkpoint(const PolicyParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint file " + path);
  out << checkpoint_to_json(p).dump();
}

PolicyParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint file " + path);
  nlohmann::json j;
  in >> j;
  return checkpoint_from_json(j);
}

namespace {

void check_prefix(const PolicyParams& params, std::span<const std::vector<double>> prefix,
                  std::size_t dist_count, int horizon) {
  if (prefix.empty()) throw std::invalid_argument("rollout: empty prefix");
  const int p = static_cast<int>(prefix.size()) - 1;
  if (p > horizon) throw std::invalid_argument("rollout: prefix longer than horizon");
  for (const auto& x : prefix)
    if (static_cast<int>(x.size()) != params.hyper.state_dim)
      throw std::invalid_argument("rollout: prefix state dimension mismatch");
  if (static_cast<int>(dist_count) != horizon - p)
    throw std::invalid_argument("rollout: need exactly T - p disturbance vectors");
}

}  // namespace

Hidden<double> encode_env(const PolicyParams& params, const env::EnvImage& image) {
  if (image.channels != params.hyper.image_channels ||
      image.width != params.hyper.image_size || image.height != params.hyper.image_size)
    throw std::invalid_argument("encode_env: image shape does not match the policy");
  ParamView<double> pv{params.data, &params.seg};
  return encode_env_impl<double>(params.hyper, pv, image);
}

std::vector<double> lstm_consume(const PolicyParams& params, std::span<const double> state,
                                 Hidden<double>& hidden) {
  ParamView<double> pv{params.data, &params.seg};
  auto xn = normalize_state<double>(params.norm, state);
  return lstm_step<double>(params.hyper, pv, xn, hidden);
}

std::vector<double> control_head(const PolicyParams& params, const dyn::ControlBounds& bounds,
                                 std::span<const double> lstm_out) {
  ParamView<double> pv{params.data, &params.seg};
  return control_head_impl<double>(params.hyper, pv, bounds, lstm_out);
}

Rollout rollout(const PolicyParams& params, const dyn::System& sys,
                std::span<const std::vector<double>> prefix, const env::EnvImage* image,
                std::span<const std::vector<double>> disturbances, int horizon,
                const Hidden<double>* hidden) {
  check_prefix(params, prefix, disturbances.size(), horizon);
  const int p = static_cast<int>(prefix.size()) - 1;
  Rollout out;
  out.prefix = p;
  out.signal.dt = sys.dt();
  out.signal.states.assign(prefix.begin(), prefix.end());
  out.signal.states.reserve(static_cast<std::size_t>(horizon) + 1);
  out.controls.assign(static_cast<std::size_t>(horizon),
                      std::vector<double>(static_cast<std::size_t>(sys.control_dim()), 0.0));
  out.disturbances.assign(
      static_cast<std::size_t>(horizon),
      std::vector<double>(static_cast<std::size_t>(sys.disturbance_dim()), 0.0));

  Hidden<double> h = hidden ? *hidden : encode_env(params, *image);
  for (int t = 0; t < p; ++t) lstm_consume(params, out.signal.states[static_cast<std::size_t>(t)], h);

  std::vector<double> next(static_cast<std::size_t>(sys.state_dim()));
  for (int t = p; t < horizon; ++t) {
    auto o = lstm_consume(params, out.signal.states[static_cast<std::size_t>(t)], h);
    auto u = control_head(params, sys.bounds(), o);
    const auto& d = disturbances[static_cast<std::size_t>(t - p)];
    sys.step(out.signal.states[static_cast<std::size_t>(t)], u, d, next);
    out.signal.states.push_back(next);
    out.controls[static_cast<std::size_t>(t)] = std::move(u);
    out.disturbances[static_cast<std::size_t>(t)] = d;
  }
  return out;
}

TapeRollout rollout_tape(ad::Tape& tape, const PolicyParams& params, const dyn::System& sys,
                         std::span<const std::vector<double>> prefix, const env::EnvImage* image,
                         std::span<const std::vector<double>> disturbances, int horizon,
                         GradScope scope, const Hidden<double>* hidden) {
  check_prefix(params, prefix, disturbances.size(), horizon);
  const int p = static_cast<int>(prefix.size()) - 1;
  TapeRollout out;
  out.prefix = p;
  out.params.reserve(params.data.size());
  const std::size_t head_off = params.seg.head_offset;
  for (std::size_t i = 0; i < params.data.size(); ++i) {
    const bool trainable = scope == GradScope::kAll || i >= head_off;
    out.params.push_back(trainable ? tape.input(params.data[i]) : tape.constant(params.data[i]));
  }
  ParamView<ad::Var> pv{out.params, &params.seg};

  Hidden<ad::Var> h;
  if (hidden) {
    h.h = tape.constants(hidden->h);
    h.c = tape.constants(hidden->c);
  } else {
    if (image == nullptr) throw std::invalid_argument("rollout_tape: need an image or a hidden state");
    if (image->channels != params.hyper.image_channels ||
        image->width != params.hyper.image_size || image->height != params.hyper.image_size)
      throw std::invalid_argument("rollout_tape: image shape does not match the policy");
    h = encode_env_impl<ad::Var>(params.hyper, pv, *image);
  }

  out.states.reserve(static_cast<std::size_t>(horizon) + 1);
  for (const auto& x : prefix) out.states.push_back(tape.constants(x));
  out.controls.assign(static_cast<std::size_t>(horizon), {});

  for (int t = 0; t < p; ++t) {
    auto xn = normalize_state<ad::Var>(params.norm, out.states[static_cast<std::size_t>(t)]);
    lstm_step<ad::Var>(params.hyper, pv, xn, h);
  }
  std::vector<ad::Var> next(static_cast<std::size_t>(sys.state_dim()));
  for (int t = p; t < horizon; ++t) {
    try {
      auto xn = normalize_state<ad::Var>(params.norm, out.states[static_cast<std::size_t>(t)]);
      auto o = lstm_step<ad::Var>(params.hyper, pv, xn, h);
      auto u = control_head_impl<ad::Var>(params.hyper, pv, sys.bounds(), o);
      sys.step(out.states[static_cast<std::size_t>(t)], u,
               disturbances[static_cast<std::size_t>(t - p)], next);
      out.states.push_back(next);
      out.controls[static_cast<std::size_t>(t)] = std::move(u);
    } catch (const ad::EvalError& e) {
      throw std::runtime_error("rollout_tape: " + std::string(e.what()) + " at step " +
                               std::to_string(t));
    }
  }
  return out;
}

}  // namespace stlsynth::policy
