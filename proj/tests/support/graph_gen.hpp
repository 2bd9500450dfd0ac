#pragma once

// Replayable random scalar expression graphs for gradient checks. A recipe
// evaluates both as plain doubles (finite-difference oracle) and on a tape.

#include <cmath>
#include <vector>

#include "stlsynth/ad/tape.hpp"
#include "stlsynth/core/rng.hpp"

namespace stlsynth::testing {

struct Instr {
  ad::Op op;
  int a = -1, b = -1;
  double imm = 0.0;
};

struct GraphRecipe {
  int n_inputs = 0;
  std::vector<Instr> instrs;
  // Flags gradient checks should skip: set while evaluating when a max/min
  // pick or a kink is within `tie_margin` of flipping.
  mutable bool near_tie = false;
  double tie_margin = 2e-5;
};

inline double eval_step(const GraphRecipe& g, const Instr& in, double a, double b) {
  switch (in.op) {
    case ad::Op::kAdd: return a + b;
    case ad::Op::kSub: return a - b;
    case ad::Op::kMul: return a * b;
    case ad::Op::kDiv: return a / b;
    case ad::Op::kAddImm: return a + in.imm;
    case ad::Op::kMulImm: return a * in.imm;
    case ad::Op::kNeg: return -a;
    case ad::Op::kTanh: return std::tanh(a);
    case ad::Op::kSigmoid: return 1.0 / (1.0 + std::exp(-a));
    case ad::Op::kExp: return std::exp(a);
    case ad::Op::kLog: return std::log(a);
    case ad::Op::kSqrt: return std::sqrt(a);
    case ad::Op::kSin: return std::sin(a);
    case ad::Op::kCos: return std::cos(a);
    case ad::Op::kTan: return std::tan(a);
    case ad::Op::kAtan: return std::atan(a);
    case ad::Op::kRelu:
      if (std::abs(a) < g.tie_margin) g.near_tie = true;
      return a > 0.0 ? a : 0.0;
    case ad::Op::kLeakyRelu:
      if (std::abs(a) < g.tie_margin) g.near_tie = true;
      return a > 0.0 ? a : in.imm * a;
    case ad::Op::kSquare: return a * a;
    case ad::Op::kMax2:
      if (std::abs(a - b) < g.tie_margin) g.near_tie = true;
      return a >= b ? a : b;
    case ad::Op::kMin2:
      if (std::abs(a - b) < g.tie_margin) g.near_tie = true;
      return a <= b ? a : b;
    default: throw std::logic_error("graph_gen: bad op");
  }
}

inline double eval_plain(const GraphRecipe& g, std::span<const double> inputs) {
  std::vector<double> vals(inputs.begin(), inputs.end());
  vals.reserve(inputs.size() + g.instrs.size());
  for (const Instr& in : g.instrs) {
    const double a = vals[static_cast<std::size_t>(in.a)];
    const double b = in.b >= 0 ? vals[static_cast<std::size_t>(in.b)] : 0.0;
    vals.push_back(eval_step(g, in, a, b));
  }
  return vals.back();
}

inline ad::Var eval_tape(const GraphRecipe& g, ad::Tape& tape, std::span<const double> inputs) {
  std::vector<ad::Var> vars = tape.inputs(inputs);
  for (const Instr& in : g.instrs) {
    const ad::Var a = vars[static_cast<std::size_t>(in.a)];
    const ad::Var b = in.b >= 0 ? vars[static_cast<std::size_t>(in.b)] : ad::Var{};
    ad::Var v;
    switch (in.op) {
      case ad::Op::kAdd: v = tape.add(a, b); break;
      case ad::Op::kSub: v = tape.sub(a, b); break;
      case ad::Op::kMul: v = tape.mul(a, b); break;
      case ad::Op::kDiv: v = tape.div(a, b); break;
      case ad::Op::kAddImm: v = tape.add_imm(a, in.imm); break;
      case ad::Op::kMulImm: v = tape.mul_imm(a, in.imm); break;
      case ad::Op::kNeg: v = tape.neg(a); break;
      case ad::Op::kTanh: v = tape.tanh(a); break;
      case ad::Op::kSigmoid: v = tape.sigmoid(a); break;
      case ad::Op::kExp: v = tape.exp(a); break;
      case ad::Op::kLog: v = tape.log(a); break;
      case ad::Op::kSqrt: v = tape.sqrt(a); break;
      case ad::Op::kSin: v = tape.sin(a); break;
      case ad::Op::kCos: v = tape.cos(a); break;
      case ad::Op::kTan: v = tape.tan(a); break;
      case ad::Op::kAtan: v = tape.atan(a); break;
      case ad::Op::kRelu: v = tape.relu(a); break;
      case ad::Op::kLeakyRelu: v = tape.leaky_relu(a, in.imm); break;
      case ad::Op::kSquare: v = tape.square(a); break;
      case ad::Op::kMax2: v = tape.max2(a, b); break;
      case ad::Op::kMin2: v = tape.min2(a, b); break;
      default: throw std::logic_error("graph_gen: bad op");
    }
    vars.push_back(v);
  }
  return vars.back();
}

/// Random graph touching all op kinds, with operand-domain guards (log gets
/// positive arguments, division avoids small denominators, exp stays small).
inline GraphRecipe random_graph(Rng& rng, std::span<const double> inputs, int extra_nodes) {
  GraphRecipe g;
  g.n_inputs = static_cast<int>(inputs.size());
  std::vector<double> vals(inputs.begin(), inputs.end());
  const ad::Op unary[] = {ad::Op::kNeg,  ad::Op::kTanh, ad::Op::kSigmoid, ad::Op::kAtan,
                          ad::Op::kSin,  ad::Op::kCos,  ad::Op::kRelu,    ad::Op::kLeakyRelu,
                          ad::Op::kSquare, ad::Op::kAddImm, ad::Op::kMulImm};
  const ad::Op binary[] = {ad::Op::kAdd, ad::Op::kSub, ad::Op::kMul,
                           ad::Op::kMax2, ad::Op::kMin2, ad::Op::kDiv};
  for (int n = 0; n < extra_nodes; ++n) {
    for (int attempt = 0;; ++attempt) {
      Instr in;
      in.a = static_cast<int>(rng.uniform_int(vals.size()));
      const double av = vals[static_cast<std::size_t>(in.a)];
      const double guarded = rng.uniform();
      if (guarded < 0.12) {
        // Domain-restricted unary ops on a guarded operand.
        if (rng.uniform() < 0.34 && av > 0.1) in.op = ad::Op::kLog;
        else if (rng.uniform() < 0.5 && av > 0.05) in.op = ad::Op::kSqrt;
        else if (std::abs(av) < 1.2) in.op = ad::Op::kExp;
        else if (std::abs(std::cos(av)) > 0.4) in.op = ad::Op::kTan;
        else if (attempt < 8) continue;
        else in.op = ad::Op::kTanh;
      } else if (guarded < 0.55) {
        in.op = unary[rng.uniform_int(std::size(unary))];
        if (in.op == ad::Op::kAddImm) in.imm = rng.uniform(-2.0, 2.0);
        if (in.op == ad::Op::kMulImm) in.imm = rng.uniform(-2.0, 2.0);
        if (in.op == ad::Op::kLeakyRelu) in.imm = 0.01;
      } else {
        in.op = binary[rng.uniform_int(std::size(binary))];
        in.b = static_cast<int>(rng.uniform_int(vals.size()));
        if (in.op == ad::Op::kDiv && std::abs(vals[static_cast<std::size_t>(in.b)]) < 0.3) {
          if (attempt < 8) continue;
          in.op = ad::Op::kAdd;
        }
      }
      const double bv = in.b >= 0 ? vals[static_cast<std::size_t>(in.b)] : 0.0;
      const double v = eval_step(g, in, av, bv);
      if (!std::isfinite(v) || std::abs(v) > 50.0) {
        if (attempt < 8) continue;
        in.op = ad::Op::kTanh;
        in.b = -1;
      }
      g.instrs.push_back(in);
      vals.push_back(eval_step(g, in, av, bv));
      break;
    }
  }
  g.near_tie = false;
  return g;
}

}  // namespace stlsynth::testing
