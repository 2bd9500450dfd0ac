#include "stlsynth/ad/tape.hpp"

#include <algorithm>
#include <cstring>

namespace stlsynth::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::kConst: return "const";
    case Op::kInput: return "input";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kAddImm: return "add_imm";
    case Op::kMulImm: return "mul_imm";
    case Op::kNeg: return "neg";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSqrt: return "sqrt";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kTan: return "tan";
    case Op::kAtan: return "atan";
    case Op::kRelu: return "relu";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kSquare: return "square";
    case Op::kMax2: return "max2";
    case Op::kMin2: return "min2";
  }
  return "?";
}

Var Tape::softmax_agg(std::span<const Var> xs, double temperature) {
  if (xs.empty()) throw std::invalid_argument("softmax_agg: empty argument list");
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax_agg: temperature must be > 0");
  double m = val(xs[0]);
  for (Var x : xs.subspan(1)) m = std::max(m, val(x));
  Var acc = exp(mul_imm(add_imm(xs[0], -m), temperature));
  for (Var x : xs.subspan(1)) acc = add(acc, exp(mul_imm(add_imm(x, -m), temperature)));
  return add_imm(mul_imm(log(acc), 1.0 / temperature), m);
}

Var Tape::softmin_agg(std::span<const Var> xs, double temperature) {
  if (xs.empty()) throw std::invalid_argument("softmin_agg: empty argument list");
  if (!(temperature > 0.0)) throw std::invalid_argument("softmin_agg: temperature must be > 0");
  double m = val(xs[0]);
  for (Var x : xs.subspan(1)) m = std::min(m, val(x));
  Var acc = exp(mul_imm(add_imm(xs[0], -m), -temperature));
  for (Var x : xs.subspan(1)) acc = add(acc, exp(mul_imm(add_imm(x, -m), -temperature)));
  return add_imm(mul_imm(log(acc), -1.0 / temperature), m);
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::logic_error("backward: root not on this tape");
  const std::size_t n = nodes_.size();
  adjoints_.assign(n, 0.0);
  const auto r = static_cast<std::size_t>(root.id());
  adjoints_[r] = 1.0;
  for (std::size_t i = r + 1; i-- > 0;) {
    const double adj = adjoints_[i];
    if (adj == 0.0) continue;
    const Node& node = nodes_[i];
    if (node.a >= 0) adjoints_[static_cast<std::size_t>(node.a)] += node.da * adj;
    if (node.b >= 0) adjoints_[static_cast<std::size_t>(node.b)] += node.db * adj;
  }
}

}  // namespace stlsynth::ad
