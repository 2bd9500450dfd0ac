#pragma once

// Scalar-generic network layers. Instantiated with S = double for inference
// and S = ad::Var for training/adaptation; both run identical arithmetic in
// identical order.

#include <span>
#include <vector>

#include "stlsynth/ad/scalar.hpp"
#include "stlsynth/env/environment.hpp"
#include "stlsynth/policy/policy.hpp"

namespace stlsynth::policy {

template <class S>
struct ParamView {
  std::span<const S> data;
  const Segments* seg;
  std::span<const S> operator[](const Segments::Block& b) const {
    return data.subspan(b.off, b.len);
  }
};

// y = W x + b with row-major W[out][in].
template <class S>
void affine(std::span<const S> w, std::span<const S> b, std::span<const S> x,
            std::vector<S>& out) {
  const std::size_t rows = b.size();
  const std::size_t cols = x.size();
  out.clear();
  out.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    S acc = b[r];
    const std::size_t base = r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc = acc + w[base + c] * x[c];
    out.push_back(acc);
  }
}

template <class S>
std::vector<S> normalize_state(const Normalizer& n, std::span<const S> x) {
  std::vector<S> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.push_back(mul_imm(add_imm(x[i], -n.offset[i]), 1.0 / n.scale[i]));
  return out;
}

// First conv layer; the image is binary data, so each output is the bias
// plus the sum of weights at lit pixels, then leaky-relu.
template <class S>
std::vector<S> conv_image(const PolicyHyper& hy, std::span<const S> w, std::span<const S> b,
                          const env::EnvImage& img) {
  const int out_hw = hy.conv1_out();
  const int k = hy.kernel, stride = hy.stride;
  std::vector<S> out;
  out.reserve(static_cast<std::size_t>(hy.conv1_filters) * out_hw * out_hw);
  for (int f = 0; f < hy.conv1_filters; ++f) {
    const std::size_t wbase =
        static_cast<std::size_t>(f) * hy.image_channels * k * k;
    for (int oy = 0; oy < out_hw; ++oy) {
      for (int ox = 0; ox < out_hw; ++ox) {
        S acc = b[static_cast<std::size_t>(f)];
        for (int c = 0; c < hy.image_channels; ++c) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              if (!img.at(c, oy * stride + ky, ox * stride + kx)) continue;
              acc = acc + w[wbase + static_cast<std::size_t>((c * k + ky) * k + kx)];
            }
          }
        }
        out.push_back(leaky_relu(acc));
      }
    }
  }
  return out;
}

// Second conv layer over dense activations laid out [f][y][x].
template <class S>
std::vector<S> conv_dense(const PolicyHyper& hy, std::span<const S> w, std::span<const S> b,
                          std::span<const S> in) {
  const int in_hw = hy.conv1_out();
  const int out_hw = hy.conv2_out();
  const int k = hy.kernel, stride = hy.stride;
  std::vector<S> out;
  out.reserve(static_cast<std::size_t>(hy.conv2_filters) * out_hw * out_hw);
  for (int f = 0; f < hy.conv2_filters; ++f) {
    const std::size_t wbase = static_cast<std::size_t>(f) * hy.conv1_filters * k * k;
    for (int oy = 0; oy < out_hw; ++oy) {
      for (int ox = 0; ox < out_hw; ++ox) {
        S acc = b[static_cast<std::size_t>(f)];
        for (int c = 0; c < hy.conv1_filters; ++c) {
          const std::size_t cbase = static_cast<std::size_t>(c) * in_hw * in_hw;
          for (int ky = 0; ky < k; ++ky) {
            const std::size_t row = cbase + static_cast<std::size_t>(oy * stride + ky) * in_hw;
            for (int kx = 0; kx < k; ++kx) {
              acc = acc + w[wbase + static_cast<std::size_t>((c * k + ky) * k + kx)] *
                              in[row + static_cast<std::size_t>(ox * stride + kx)];
            }
          }
        }
        out.push_back(leaky_relu(acc));
      }
    }
  }
  return out;
}

// h_0 = MLP(CNN(e)); two heads because the LSTM hidden state is a tuple.
template <class S>
Hidden<S> encode_env_impl(const PolicyHyper& hy, const ParamView<S>& pv,
                          const env::EnvImage& img) {
  auto a1 = conv_image<S>(hy, pv[pv.seg->conv1_w], pv[pv.seg->conv1_b], img);
  auto a2 = conv_dense<S>(hy, pv[pv.seg->conv2_w], pv[pv.seg->conv2_b], a1);
  std::vector<S> code;
  affine<S>(pv[pv.seg->fc_feat_w], pv[pv.seg->fc_feat_b], a2, code);
  Hidden<S> h0;
  affine<S>(pv[pv.seg->fc_h0_w], pv[pv.seg->fc_h0_b], code, h0.h);
  affine<S>(pv[pv.seg->fc_c0_w], pv[pv.seg->fc_c0_b], code, h0.c);
  for (auto& v : h0.h) v = tanh(v);
  for (auto& v : h0.c) v = tanh(v);
  return h0;
}

// Standard LSTM cell (gate order i, f, g, o). Returns o_t and advances the
// hidden tuple in place.
template <class S>
std::vector<S> lstm_step(const PolicyHyper& hy, const ParamView<S>& pv, std::span<const S> x,
                         Hidden<S>& state) {
  const std::size_t n = static_cast<std::size_t>(hy.n_h);
  auto wx = pv[pv.seg->lstm_wx];
  auto wh = pv[pv.seg->lstm_wh];
  auto bias = pv[pv.seg->lstm_b];
  std::vector<S> out;
  out.reserve(n);
  std::vector<S> next_c, next_h;
  next_c.reserve(n);
  next_h.reserve(n);
  const std::size_t in_dim = x.size();
  std::vector<S> z;
  z.reserve(4 * n);
  for (std::size_t r = 0; r < 4 * n; ++r) {
    S acc = bias[r];
    const std::size_t xb = r * in_dim;
    for (std::size_t c2 = 0; c2 < in_dim; ++c2) acc = acc + wx[xb + c2] * x[c2];
    const std::size_t hb = r * n;
    for (std::size_t c2 = 0; c2 < n; ++c2) acc = acc + wh[hb + c2] * state.h[c2];
    z.push_back(acc);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const S i_g = sigmoid(z[j]);
    const S f_g = sigmoid(z[n + j]);
    const S g_g = tanh(z[2 * n + j]);
    const S o_g = sigmoid(z[3 * n + j]);
    const S c_new = f_g * state.c[j] + i_g * g_g;
    const S h_new = o_g * tanh(c_new);
    next_c.push_back(c_new);
    next_h.push_back(h_new);
    out.push_back(h_new);
  }
  state.c = std::move(next_c);
  state.h = std::move(next_h);
  return out;
}

// u = (hi - lo)/2 * tanh(MLP(o)) + (hi + lo)/2, strictly inside the bounds.
template <class S>
std::vector<S> control_head_impl(const PolicyHyper&, const ParamView<S>& pv,
                                 const dyn::ControlBounds& bounds, std::span<const S> o) {
  std::vector<S> hid;
  affine<S>(pv[pv.seg->head_w1], pv[pv.seg->head_b1], o, hid);
  for (auto& v : hid) v = leaky_relu(v);
  std::vector<S> raw;
  affine<S>(pv[pv.seg->head_w2], pv[pv.seg->head_b2], hid, raw);
  std::vector<S> u;
  u.reserve(raw.size());
  for (int i = 0; i < static_cast<int>(raw.size()); ++i)
    u.push_back(add_imm(mul_imm(tanh(raw[static_cast<std::size_t>(i)]), bounds.half_width(i)),
                        bounds.mid(i)));
  return u;
}

}  // namespace stlsynth::policy
