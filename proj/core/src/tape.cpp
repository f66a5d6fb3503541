#include "prbcast/tape.hpp"

#include <cmath>
#include <string>

#include "prbcast/errors.hpp"

namespace prbcast::ad {

namespace {

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " x " +
                   b.shape_str());
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a) {
  throw ShapeError(std::string(op) + ": unsupported shape " + a.shape_str());
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t dim = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const std::vector<std::size_t>& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.dim = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

std::size_t last_dim(const Tensor& t) { return t.rank() == 0 ? 1 : t.shape().back(); }

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kRelu: return "relu";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSoftmaxLast: return "softmax_last";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kReduceSum: return "reduce_sum";
    case OpKind::kReduceMean: return "reduce_mean";
    case OpKind::kReshape: return "reshape";
    case OpKind::kTransposeLast2: return "transpose_last2";
    case OpKind::kScale: return "scale";
    case OpKind::kAddConst: return "add_const";
    case OpKind::kLayerNorm: return "layer_norm";
  }
  return "?";
}

const Tensor& Var::value() const { return tape_->node_at(id_).value; }

Var Tape::push_node(Node node) {
  if (node.kind != OpKind::kLeaf && node.kind != OpKind::kConstant && !node.value.all_finite()) {
    throw NumericError(std::string(op_name(node.kind)) + ": non-finite output");
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.requires_grad = true;
  n.value = std::move(value);
  return push_node(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(value);
  return push_node(std::move(n));
}

namespace {

Tape* common_tape(const char* op, const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands from different tapes");
  }
  return a.tape();
}

Var unary(OpKind kind, const Var& x, Tensor value, double scalar = 0.0) {
  Node n;
  n.kind = kind;
  n.inputs = {x.id()};
  n.value = std::move(value);
  n.scalar = scalar;
  return x.tape()->push_node(std::move(n));
}

Var elementwise_map(OpKind kind, const Var& x, double (*fn)(double)) {
  Tensor out(x.value().shape());
  const Tensor& in = x.value();
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = fn(in[i]);
  return unary(kind, x, std::move(out));
}

Var binary_elementwise(OpKind kind, const char* name, const Var& a, const Var& b) {
  Tape* tape = common_tape(name, a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) shape_fail(name, av, bv);
  Tensor out(av.shape());
  switch (kind) {
    case OpKind::kAdd:
      for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] + bv[i];
      break;
    case OpKind::kSub:
      for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] - bv[i];
      break;
    case OpKind::kMul:
      for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] * bv[i];
      break;
    case OpKind::kDiv:
      for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] / bv[i];
      break;
    default:
      throw ContractError("binary_elementwise: bad op");
  }
  Node n;
  n.kind = kind;
  n.inputs = {a.id(), b.id()};
  n.value = std::move(out);
  return tape->push_node(std::move(n));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape* tape = common_tape("matmul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out;
  if (av.rank() == 2 && bv.rank() == 2) {
    if (av.dim(1) != bv.dim(0)) shape_fail("matmul", av, bv);
    out = Tensor({av.dim(0), bv.dim(1)});
    gemm_nn(av.data(), bv.data(), out.data(), av.dim(0), av.dim(1), bv.dim(1));
  } else if (av.rank() == 3 && bv.rank() == 3) {
    if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1)) shape_fail("matmul", av, bv);
    out = Tensor({av.dim(0), av.dim(1), bv.dim(2)});
    const std::size_t m = av.dim(1), k = av.dim(2), n = bv.dim(2);
    for (std::size_t bidx = 0; bidx < av.dim(0); ++bidx) {
      gemm_nn(av.data() + bidx * m * k, bv.data() + bidx * k * n, out.data() + bidx * m * n, m, k,
              n);
    }
  } else if (av.rank() == 3 && bv.rank() == 2) {
    if (av.dim(2) != bv.dim(0)) shape_fail("matmul", av, bv);
    out = Tensor({av.dim(0), av.dim(1), bv.dim(1)});
    const std::size_t m = av.dim(1), k = av.dim(2), n = bv.dim(1);
    for (std::size_t bidx = 0; bidx < av.dim(0); ++bidx) {
      gemm_nn(av.data() + bidx * m * k, bv.data(), out.data() + bidx * m * n, m, k, n);
    }
  } else {
    shape_fail("matmul", av, bv);
  }
  Node n;
  n.kind = OpKind::kMatmul;
  n.inputs = {a.id(), b.id()};
  n.value = std::move(out);
  return tape->push_node(std::move(n));
}

Var add(const Var& a, const Var& b) { return binary_elementwise(OpKind::kAdd, "add", a, b); }
Var sub(const Var& a, const Var& b) { return binary_elementwise(OpKind::kSub, "sub", a, b); }
Var mul(const Var& a, const Var& b) { return binary_elementwise(OpKind::kMul, "mul", a, b); }
Var div(const Var& a, const Var& b) { return binary_elementwise(OpKind::kDiv, "div", a, b); }

Var add_bias(const Var& x, const Var& bias) {
  Tape* tape = common_tape("add_bias", x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || xv.rank() < 1 || xv.shape().back() != bv.dim(0)) {
    shape_fail("add_bias", xv, bv);
  }
  Tensor out(xv.shape());
  const std::size_t d = bv.dim(0);
  const std::size_t rows = xv.numel() / d;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = xv.data() + r * d;
    double* dst = out.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] + bv[j];
  }
  Node n;
  n.kind = OpKind::kAddBias;
  n.inputs = {x.id(), bias.id()};
  n.value = std::move(out);
  return tape->push_node(std::move(n));
}

Var tanh(const Var& x) {
  return elementwise_map(OpKind::kTanh, x, +[](double v) { return std::tanh(v); });
}
Var sigmoid(const Var& x) { return elementwise_map(OpKind::kSigmoid, x, &stable_sigmoid); }
Var relu(const Var& x) {
  return elementwise_map(OpKind::kRelu, x, +[](double v) { return v > 0.0 ? v : 0.0; });
}
Var softplus(const Var& x) { return elementwise_map(OpKind::kSoftplus, x, &stable_softplus); }
Var exp(const Var& x) {
  return elementwise_map(OpKind::kExp, x, +[](double v) { return std::exp(v); });
}
Var log(const Var& x) {
  return elementwise_map(OpKind::kLog, x, +[](double v) { return std::log(v); });
}

Var softmax_last(const Var& x) {
  const Tensor& xv = x.value();
  const std::size_t d = last_dim(xv);
  if (d == 0) shape_fail("softmax_last", xv);
  const std::size_t rows = xv.numel() / d;
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = xv.data() + r * d;
    double* dst = out.data() + r * d;
    double mx = src[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, src[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dst[j] = std::exp(src[j] - mx);
      sum += dst[j];
    }
    for (std::size_t j = 0; j < d; ++j) dst[j] /= sum;
  }
  return unary(OpKind::kSoftmaxLast, x, std::move(out));
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  Tape* tape = parts[0].tape();
  const std::size_t rank = parts[0].value().rank();
  if (axis >= rank) shape_fail("concat", parts[0].value());
  std::vector<std::size_t> out_shape = parts[0].value().shape();
  std::size_t total = 0;
  for (const Var& p : parts) {
    common_tape("concat", parts[0], p);
    const auto& s = p.value().shape();
    if (s.size() != rank) shape_fail("concat", parts[0].value(), p.value());
    for (std::size_t i = 0; i < rank; ++i) {
      if (i != axis && s[i] != out_shape[i]) shape_fail("concat", parts[0].value(), p.value());
    }
    total += s[axis];
  }
  out_shape[axis] = total;
  Tensor out(out_shape);
  const AxisSplit sp = split_at(out_shape, axis);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    const std::size_t d = pv.shape()[axis];
    for (std::size_t o = 0; o < sp.outer; ++o) {
      const double* src = pv.data() + o * d * sp.inner;
      double* dst = out.data() + o * sp.dim * sp.inner + offset * sp.inner;
      for (std::size_t i = 0; i < d * sp.inner; ++i) dst[i] = src[i];
    }
    offset += d;
  }
  Node n;
  n.kind = OpKind::kConcat;
  for (const Var& p : parts) n.inputs.push_back(p.id());
  n.value = std::move(out);
  n.axis = axis;
  return tape->push_node(std::move(n));
}

Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  if (axis >= xv.rank() || start + len > xv.dim(axis) || len == 0) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") on axis " + std::to_string(axis) + " of " + xv.shape_str());
  }
  std::vector<std::size_t> out_shape = xv.shape();
  out_shape[axis] = len;
  Tensor out(out_shape);
  const AxisSplit sp = split_at(xv.shape(), axis);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const double* src = xv.data() + (o * sp.dim + start) * sp.inner;
    double* dst = out.data() + o * len * sp.inner;
    for (std::size_t i = 0; i < len * sp.inner; ++i) dst[i] = src[i];
  }
  Node n;
  n.kind = OpKind::kSlice;
  n.inputs = {x.id()};
  n.value = std::move(out);
  n.axis = axis;
  n.start = start;
  return x.tape()->push_node(std::move(n));
}

Var reduce_sum(const Var& x) {
  double sum = 0.0;
  for (std::size_t i = 0; i < x.value().numel(); ++i) sum += x.value()[i];
  return unary(OpKind::kReduceSum, x, Tensor::scalar(sum));
}

Var reduce_mean(const Var& x) {
  if (x.value().numel() == 0) shape_fail("reduce_mean", x.value());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.value().numel(); ++i) sum += x.value()[i];
  return unary(OpKind::kReduceMean, x, Tensor::scalar(sum / static_cast<double>(x.value().numel())));
}

Var reshape(const Var& x, std::vector<std::size_t> shape) {
  Tensor out(std::move(shape), x.value().vec());
  return unary(OpKind::kReshape, x, std::move(out));
}

Var transpose_last2(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() < 2) shape_fail("transpose_last2", xv);
  std::vector<std::size_t> out_shape = xv.shape();
  const std::size_t r = out_shape[xv.rank() - 2];
  const std::size_t c = out_shape[xv.rank() - 1];
  out_shape[xv.rank() - 2] = c;
  out_shape[xv.rank() - 1] = r;
  Tensor out(out_shape);
  const std::size_t outer = xv.numel() / (r * c);
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = xv.data() + o * r * c;
    double* dst = out.data() + o * r * c;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
  }
  return unary(OpKind::kTransposeLast2, x, std::move(out));
}

Var scale(const Var& x, double factor) {
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] * factor;
  return unary(OpKind::kScale, x, std::move(out), factor);
}

Var add_const(const Var& x, double c) {
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] + c;
  return unary(OpKind::kAddConst, x, std::move(out), c);
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  Tape* tape = common_tape("layer_norm", x, gain);
  common_tape("layer_norm", x, bias);
  const Tensor& xv = x.value();
  const std::size_t d = last_dim(xv);
  if (gain.value().rank() != 1 || gain.value().dim(0) != d || bias.value().rank() != 1 ||
      bias.value().dim(0) != d) {
    shape_fail("layer_norm", xv, gain.value());
  }
  const std::size_t rows = xv.numel() / d;
  Tensor out(xv.shape());
  const Tensor& g = gain.value();
  const Tensor& b = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = xv.data() + r * d;
    double* dst = out.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += src[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (src[j] - mean) * (src[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) dst[j] = g[j] * ((src[j] - mean) * inv) + b[j];
  }
  Node n;
  n.kind = OpKind::kLayerNorm;
  n.inputs = {x.id(), gain.id(), bias.id()};
  n.value = std::move(out);
  n.scalar = eps;
  return tape->push_node(std::move(n));
}

// -- backward -----------------------------------------------------------------

std::vector<Tensor> Tape::backward(const Var& loss) const {
  if (loss.tape() != this) throw ContractError("backward: loss from another tape");
  const Node& loss_node = nodes_[loss.id()];
  if (loss_node.value.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + loss_node.value.shape_str());
  }

  std::vector<Tensor> grads(nodes_.size());
  auto grad_of = [&](std::uint32_t id) -> Tensor& {
    if (grads[id].numel() == 0) grads[id] = Tensor::zeros(nodes_[id].value.shape());
    return grads[id];
  };
  // Constants never need gradients; skip allocating them.
  auto wants_grad = [&](std::uint32_t id) { return nodes_[id].kind != OpKind::kConstant; };

  grad_of(loss.id())[0] = 1.0;

  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    if (grads[id].numel() == 0) continue;
    const Node& node = nodes_[id];
    const Tensor& g = grads[id];
    switch (node.kind) {
      case OpKind::kLeaf:
      case OpKind::kConstant:
        break;
      case OpKind::kMatmul: {
        const Tensor& av = nodes_[node.inputs[0]].value;
        const Tensor& bv = nodes_[node.inputs[1]].value;
        const bool want_a = wants_grad(node.inputs[0]);
        const bool want_b = wants_grad(node.inputs[1]);
        if (av.rank() == 2) {
          const std::size_t m = av.dim(0), k = av.dim(1), nn = bv.dim(1);
          if (want_a) gemm_nt(g.data(), bv.data(), grad_of(node.inputs[0]).data(), m, nn, k);
          if (want_b) gemm_tn(av.data(), g.data(), grad_of(node.inputs[1]).data(), m, k, nn);
        } else {
          const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2);
          const std::size_t nn = bv.rank() == 3 ? bv.dim(2) : bv.dim(1);
          for (std::size_t bi = 0; bi < batch; ++bi) {
            const double* bptr = bv.rank() == 3 ? bv.data() + bi * k * nn : bv.data();
            if (want_a) {
              gemm_nt(g.data() + bi * m * nn, bptr, grad_of(node.inputs[0]).data() + bi * m * k, m,
                      nn, k);
            }
            if (want_b) {
              double* gb = bv.rank() == 3 ? grad_of(node.inputs[1]).data() + bi * k * nn
                                          : grad_of(node.inputs[1]).data();
              gemm_tn(av.data() + bi * m * k, g.data() + bi * m * nn, gb, m, k, nn);
            }
          }
        }
        break;
      }
      case OpKind::kAdd:
        for (int side = 0; side < 2; ++side) {
          if (!wants_grad(node.inputs[side])) continue;
          Tensor& gi = grad_of(node.inputs[side]);
          for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += g[i];
        }
        break;
      case OpKind::kSub: {
        if (wants_grad(node.inputs[0])) {
          Tensor& ga = grad_of(node.inputs[0]);
          for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (wants_grad(node.inputs[1])) {
          Tensor& gb = grad_of(node.inputs[1]);
          for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
        }
        break;
      }
      case OpKind::kMul: {
        const Tensor& av = nodes_[node.inputs[0]].value;
        const Tensor& bv = nodes_[node.inputs[1]].value;
        if (wants_grad(node.inputs[0])) {
          Tensor& ga = grad_of(node.inputs[0]);
          for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv[i];
        }
        if (wants_grad(node.inputs[1])) {
          Tensor& gb = grad_of(node.inputs[1]);
          for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av[i];
        }
        break;
      }
      case OpKind::kDiv: {
        const Tensor& av = nodes_[node.inputs[0]].value;
        const Tensor& bv = nodes_[node.inputs[1]].value;
        if (wants_grad(node.inputs[0])) {
          Tensor& ga = grad_of(node.inputs[0]);
          for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / bv[i];
        }
        if (wants_grad(node.inputs[1])) {
          Tensor& gb = grad_of(node.inputs[1]);
          for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
        }
        break;
      }
      case OpKind::kAddBias: {
        const std::size_t d = nodes_[node.inputs[1]].value.dim(0);
        if (wants_grad(node.inputs[0])) {
          Tensor& gx = grad_of(node.inputs[0]);
          for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
        }
        if (wants_grad(node.inputs[1])) {
          Tensor& gb = grad_of(node.inputs[1]);
          const std::size_t rows = g.numel() / d;
          for (std::size_t r = 0; r < rows; ++r) {
            const double* src = g.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) gb[j] += src[j];
          }
        }
        break;
      }
      case OpKind::kTanh: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const Tensor& y = node.value;
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case OpKind::kSigmoid: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const Tensor& y = node.value;
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case OpKind::kRelu: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const Tensor& xv = nodes_[node.inputs[0]].value;
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += xv[i] > 0.0 ? g[i] : 0.0;
        break;
      }
      case OpKind::kSoftplus: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const Tensor& xv = nodes_[node.inputs[0]].value;
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * stable_sigmoid(xv[i]);
        break;
      }
      case OpKind::kExp: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const Tensor& y = node.value;
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * y[i];
        break;
      }
      case OpKind::kLog: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const Tensor& xv = nodes_[node.inputs[0]].value;
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] / xv[i];
        break;
      }
      case OpKind::kSoftmaxLast: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const Tensor& y = node.value;
        const std::size_t d = last_dim(y);
        const std::size_t rows = y.numel() / d;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* yr = y.data() + r * d;
          const double* gr = g.data() + r * d;
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
          double* gxr = gx.data() + r * d;
          for (std::size_t j = 0; j < d; ++j) gxr[j] += yr[j] * (gr[j] - dot);
        }
        break;
      }
      case OpKind::kConcat: {
        const AxisSplit sp = split_at(node.value.shape(), node.axis);
        std::size_t offset = 0;
        for (std::uint32_t input : node.inputs) {
          const std::size_t d = nodes_[input].value.shape()[node.axis];
          if (wants_grad(input)) {
            Tensor& gi = grad_of(input);
            for (std::size_t o = 0; o < sp.outer; ++o) {
              const double* src = g.data() + o * sp.dim * sp.inner + offset * sp.inner;
              double* dst = gi.data() + o * d * sp.inner;
              for (std::size_t i = 0; i < d * sp.inner; ++i) dst[i] += src[i];
            }
          }
          offset += d;
        }
        break;
      }
      case OpKind::kSlice: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const AxisSplit sp = split_at(nodes_[node.inputs[0]].value.shape(), node.axis);
        const std::size_t len = node.value.shape()[node.axis];
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const double* src = g.data() + o * len * sp.inner;
          double* dst = gx.data() + (o * sp.dim + node.start) * sp.inner;
          for (std::size_t i = 0; i < len * sp.inner; ++i) dst[i] += src[i];
        }
        break;
      }
      case OpKind::kReduceSum: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const double gv = g[0];
        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gv;
        break;
      }
      case OpKind::kReduceMean: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const double gv = g[0] / static_cast<double>(gx.numel());
        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += gv;
        break;
      }
      case OpKind::kReshape: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
        break;
      }
      case OpKind::kTransposeLast2: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        const Tensor& xv = nodes_[node.inputs[0]].value;
        const std::size_t r = xv.shape()[xv.rank() - 2];
        const std::size_t c = xv.shape()[xv.rank() - 1];
        const std::size_t outer = xv.numel() / (r * c);
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = g.data() + o * r * c;  // shape (c, r)
          double* dst = gx.data() + o * r * c;       // shape (r, c)
          for (std::size_t i = 0; i < c; ++i) {
            for (std::size_t j = 0; j < r; ++j) dst[j * c + i] += src[i * r + j];
          }
        }
        break;
      }
      case OpKind::kScale: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * node.scalar;
        break;
      }
      case OpKind::kAddConst: {
        if (!wants_grad(node.inputs[0])) break;
        Tensor& gx = grad_of(node.inputs[0]);
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
        break;
      }
      case OpKind::kLayerNorm: {
        const Tensor& xv = nodes_[node.inputs[0]].value;
        const Tensor& gv = nodes_[node.inputs[1]].value;
        const std::size_t d = last_dim(xv);
        const std::size_t rows = xv.numel() / d;
        const bool want_x = wants_grad(node.inputs[0]);
        const bool want_gain = wants_grad(node.inputs[1]);
        const bool want_bias = wants_grad(node.inputs[2]);
        std::vector<double> xhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* src = xv.data() + r * d;
          const double* gr = g.data() + r * d;
          double mean = 0.0;
          for (std::size_t j = 0; j < d; ++j) mean += src[j];
          mean /= static_cast<double>(d);
          double var = 0.0;
          for (std::size_t j = 0; j < d; ++j) var += (src[j] - mean) * (src[j] - mean);
          var /= static_cast<double>(d);
          const double inv = 1.0 / std::sqrt(var + node.scalar);
          for (std::size_t j = 0; j < d; ++j) xhat[j] = (src[j] - mean) * inv;
          if (want_gain) {
            Tensor& gg = grad_of(node.inputs[1]);
            for (std::size_t j = 0; j < d; ++j) gg[j] += gr[j] * xhat[j];
          }
          if (want_bias) {
            Tensor& gb = grad_of(node.inputs[2]);
            for (std::size_t j = 0; j < d; ++j) gb[j] += gr[j];
          }
          if (want_x) {
            Tensor& gx = grad_of(node.inputs[0]);
            double mean_dy = 0.0, mean_dyx = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dy = gr[j] * gv[j];
              mean_dy += dy;
              mean_dyx += dy * xhat[j];
            }
            mean_dy /= static_cast<double>(d);
            mean_dyx /= static_cast<double>(d);
            double* gxr = gx.data() + r * d;
            for (std::size_t j = 0; j < d; ++j) {
              const double dy = gr[j] * gv[j];
              gxr[j] += inv * (dy - mean_dy - xhat[j] * mean_dyx);
            }
          }
        }
        break;
      }
    }
  }

  // Parameters off every path to the loss still get (zero) gradients.
  for (std::uint32_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].requires_grad && grads[id].numel() == 0) {
      grads[id] = Tensor::zeros(nodes_[id].value.shape());
    }
  }
  return grads;
}

}  // namespace prbcast::ad
