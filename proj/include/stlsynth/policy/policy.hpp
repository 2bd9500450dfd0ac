#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stlsynth/core/rng.hpp"
#include "stlsynth/dyn/system.hpp"
#include "stlsynth/env/environment.hpp"

namespace stlsynth::policy {

/// Network sizes. The CNN is two stride-2 3x3 conv layers with leaky-relu,
/// a flatten, and a linear projection to the environment code c_e; two
/// linear+tanh maps turn c_e into the LSTM hidden-state tuple (h_0, c_0).
struct PolicyHyper {
  int state_dim = 4;
  int control_dim = 2;
  int n_h = 32;  // LSTM hidden size
  int n_c = 16;  // environment code size
  int image_size = 32;
  int image_channels = 4;
  int conv1_filters = 8;
  int conv2_filters = 16;
  int kernel = 3;
  int stride = 2;
  int head_hidden = 32;

  int conv1_out() const { return (image_size - kernel) / stride + 1; }
  int conv2_out() const { return (conv1_out() - kernel) / stride + 1; }
  int conv2_flat() const { return conv2_out() * conv2_out() * conv2_filters; }
  bool operator==(const PolicyHyper&) const = default;
};

/// Per-channel affine state normalization applied before states enter the
/// LSTM: xn[i] = (x[i] - offset[i]) / scale[i].
struct Normalizer {
  std::vector<double> offset, scale;
  bool operator==(const Normalizer&) const = default;
};

/// Normalizer for the bicycle: workspace-affine positions to [-1, 1],
/// psi / pi, V / v_max.
Normalizer bicycle_normalizer(const env::Workspace& ws, double v_max = 5.0);

/// Offsets of the flat parameter vector. The control-head MLP is stored
/// last so the online-adapted subset is the contiguous tail.
struct Segments {
  struct Block {
    std::size_t off = 0, len = 0;
  };
  Block conv1_w, conv1_b, conv2_w, conv2_b, fc_feat_w, fc_feat_b, fc_h0_w, fc_h0_b, fc_c0_w,
      fc_c0_b, lstm_wx, lstm_wh, lstm_b, head_w1, head_b1, head_w2, head_b2;
  std::size_t total = 0;
  std::size_t head_offset = 0;  // start of the adapted subset
};

Segments make_segments(const PolicyHyper& h);

/// All learnable parameters, flat. The partition theta = [theta_hat,
/// theta_tilde] is positional: theta_tilde (the control head, adapted
/// online) is data[seg.head_offset..], theta_hat everything before it.
struct PolicyParams {
  PolicyHyper hyper;
  Normalizer norm;
  std::vector<double> data;
  Segments seg;

  std::size_t head_size() const { return seg.total - seg.head_offset; }
  std::span<double> head() { return std::span<double>(data).subspan(seg.head_offset); }
  std::span<const double> head() const {
    return std::span<const double>(data).subspan(seg.head_offset);
  }
};

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per block; biases zero except
/// the LSTM forget gate at +1.
PolicyParams init_params(const PolicyHyper& hyper, const Normalizer& norm, Rng& rng);

nlohmann::json checkpoint_to_json(const PolicyParams& p);
PolicyParams checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const PolicyParams& p, const std::string& path);
PolicyParams load_checkpoint(const std::string& path);

/// LSTM hidden-state tuple.
template <class S>
struct Hidden {
  std::vector<S> h, c;
};

/// Closed-loop trajectory from a prefix. Transition t -> t+1 for t >=
/// prefix uses the stored control and disturbance; prefix controls and
/// disturbances are zero-filled placeholders (unknown to the policy).
struct Rollout {
  stl::Signal signal;
  std::vector<std::vector<double>> controls;
  std::vector<std::vector<double>> disturbances;
  int prefix = 0;
};

/// Inference-path rollout (no tape). `prefix` holds states x_0..x_p;
/// `disturbances` covers the generated steps p..T-1. When `hidden` is given
/// it is the LSTM state before consuming prefix.back() and the environment
/// encoder is skipped (the image may then be null).
Rollout rollout(const PolicyParams& params, const dyn::System& sys,
                std::span<const std::vector<double>> prefix, const env::EnvImage* image,
                std::span<const std::vector<double>> disturbances, int horizon,
                const Hidden<double>* hidden = nullptr);

/// Which parameter blocks become differentiable inputs on the tape.
enum class GradScope { kAll, kHeadOnly };

struct TapeRollout {
  std::vector<std::vector<ad::Var>> states;    // x_0..x_T
  std::vector<std::vector<ad::Var>> controls;  // u_t for t in [prefix, T), empty before
  std::vector<ad::Var> params;                 // aligned with PolicyParams.data
  int prefix = 0;
};

/// Differentiable rollout on `tape`: same arithmetic as rollout(), with
/// parameters in scope lifted as inputs (gradients readable through
/// TapeRollout.params after backward).
TapeRollout rollout_tape(ad::Tape& tape, const PolicyParams& params, const dyn::System& sys,
                         std::span<const std::vector<double>> prefix, const env::EnvImage* image,
                         std::span<const std::vector<double>> disturbances, int horizon,
                         GradScope scope = GradScope::kAll,
                         const Hidden<double>* hidden = nullptr);

/// Plain-path environment encoding, exposed so deployment can cache h_0
/// once per episode (it does not depend on the adapted head).
Hidden<double> encode_env(const PolicyParams& params, const env::EnvImage& image);

/// Advance the plain-path LSTM by one state sample; returns the output o_t.
std::vector<double> lstm_consume(const PolicyParams& params, std::span<const double> state,
                                 Hidden<double>& hidden);

/// Bounded control from an LSTM output: u = half_width * tanh(u') + mid.
std::vector<double> control_head(const PolicyParams& params, const dyn::ControlBounds& bounds,
                                 std::span<const double> lstm_out);

}  // namespace stlsynth::policy
