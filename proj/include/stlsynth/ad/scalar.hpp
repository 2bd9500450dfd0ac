#pragma once

// Plain-double counterparts of the tape operations. Generic numeric code is
// written once against this vocabulary and instantiated with either double
// (fast inference path) or ad::Var (differentiable path); both perform the
// same arithmetic in the same order, so values agree bit for bit.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "stlsynth/ad/tape.hpp"

namespace stlsynth {

inline double tanh(double x) { return std::tanh(x); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tan(double x) { return std::tan(x); }
inline double atan(double x) { return std::atan(x); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double leaky_relu(double x, double slope = 0.01) { return x > 0.0 ? x : slope * x; }
inline double square(double x) { return x * x; }
inline double max2(double a, double b) { return a >= b ? a : b; }
inline double min2(double a, double b) { return a <= b ? a : b; }
inline double mul_imm(double a, double k) { return a * k; }
inline double add_imm(double a, double k) { return a + k; }
inline double to_double(double v) { return v; }

inline double softmax_agg(std::span<const double> xs, double temperature) {
  double m = xs[0];
  for (double x : xs.subspan(1)) m = std::max(m, x);
  double acc = 0.0;
  for (double x : xs) acc += std::exp((x - m) * temperature);
  return std::log(acc) * (1.0 / temperature) + m;
}

inline double softmin_agg(std::span<const double> xs, double temperature) {
  double m = xs[0];
  for (double x : xs.subspan(1)) m = std::min(m, x);
  double acc = 0.0;
  for (double x : xs) acc += std::exp((x - m) * -temperature);
  return std::log(acc) * (-1.0 / temperature) + m;
}

// Pull the Var overloads into scope so unqualified calls in generic code
// resolve for both scalar types.
using ad::add_imm;
using ad::atan;
using ad::cos;
using ad::exp;
using ad::leaky_relu;
using ad::log;
using ad::max2;
using ad::min2;
using ad::mul_imm;
using ad::relu;
using ad::sigmoid;
using ad::sin;
using ad::softmax_agg;
using ad::softmin_agg;
using ad::sqrt;
using ad::square;
using ad::tan;
using ad::tanh;
using ad::to_double;

}  // namespace stlsynth
