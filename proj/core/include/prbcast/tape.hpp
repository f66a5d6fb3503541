#pragma once

#include <cstdint>
#include <vector>

#include "prbcast/tensor.hpp"

namespace prbcast::ad {

enum class OpKind : std::uint8_t {
  kLeaf,
  kConstant,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kAddBias,
  kTanh,
  kSigmoid,
  kRelu,
  kSoftplus,
  kExp,
  kLog,
  kSoftmaxLast,
  kConcat,
  kSlice,
  kReduceSum,
  kReduceMean,
  kReshape,
  kTransposeLast2,
  kScale,
  kAddConst,
  kLayerNorm,
};

const char* op_name(OpKind kind);

struct Node {
  OpKind kind = OpKind::kConstant;
  bool requires_grad = false;  ///< leaves only
  std::vector<std::uint32_t> inputs;
  Tensor value;
  // op attributes (slice/concat axis, scale factor, layer-norm epsilon)
  std::size_t axis = 0;
  std::size_t start = 0;
  double scalar = 0.0;
};

class Tape;

/// Lightweight handle to a tape node.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const { return value().shape(); }
  std::uint32_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  explicit operator bool() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Append-only record of one forward computation. Node order is the
/// topological order; a backward sweep walks it in reverse.
///
/// Every forward op verifies its output is finite and throws NumericError
/// otherwise, so a diverging training run fails at the op that produced
/// the first NaN rather than at the loss.
class Tape {
 public:
  /// A trainable input; receives a gradient (zeros if off every path to
  /// the loss).
  Var leaf(Tensor value);

  /// Data the sweep treats as fixed. No gradient is stored for it.
  Var constant(Tensor value);

  std::size_t size() const { return nodes_.size(); }
  const Node& node_at(std::uint32_t id) const { return nodes_[id]; }

  /// Reverse-mode gradients of a scalar loss, indexed by node id. Slots for
  /// unreached non-leaf nodes stay empty; leaf slots are always populated.
  /// The tape itself is not mutated, so repeated sweeps from the same state
  /// give identical results.
  std::vector<Tensor> backward(const Var& loss) const;

  /// Internal: appends a node (used by the op builders below).
  Var push_node(Node node);

 private:
  std::vector<Node> nodes_;
};

// -- graph builders ----------------------------------------------------------
// Each op checks shape compatibility (ShapeError names the op and both
// shapes) and output finiteness (NumericError).

/// (M,K)x(K,N), batched (B,M,K)x(B,K,N), or broadcast (B,M,K)x(K,N).
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  ///< elementwise
Var div(const Var& a, const Var& b);  ///< elementwise
/// x (..., D) + bias (D), broadcast over leading axes.
Var add_bias(const Var& x, const Var& bias);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var softplus(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
/// Softmax along the last axis.
Var softmax_last(const Var& x);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t len);
Var reduce_sum(const Var& x);   ///< scalar
Var reduce_mean(const Var& x);  ///< scalar
Var reshape(const Var& x, std::vector<std::size_t> shape);
Var transpose_last2(const Var& x);
Var scale(const Var& x, double factor);
Var add_const(const Var& x, double c);
/// Normalizes the last axis to zero mean / unit variance, then applies a
/// learned gain and bias (both of the last-axis length).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

}  // namespace prbcast::ad
