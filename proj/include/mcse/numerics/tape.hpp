#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mcse/numerics/tensor.hpp"

namespace mcse {

// Reverse-mode differentiation tape. Nodes are recorded in construction
// order, which is topological by definition; backward() seeds the scalar loss
// and sweeps the records in reverse, accumulating adjoints into every node.
//
// A tape is single-writer. Batch parallelism is independent tapes per element
// with gradient summation outside.
class Tape {
 public:
  using NodeId = int;

  // Leaf node. Parameters and constants use the same mechanism; the adjoint
  // of any leaf is available after backward().
  NodeId input(Tensor value);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  // Valid after backward().
  const Tensor& grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  // y = x · w; x: (..., K), w: (K, N) -> (..., N). Leading dims fold.
  NodeId matmul(NodeId x, NodeId w);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);                 // elementwise, same shape
  NodeId mul_const(NodeId x, Tensor c);           // elementwise by a constant
  NodeId bias_add(NodeId x, NodeId b);            // b: (N), broadcast over lead
  NodeId affine(NodeId x, double alpha, double beta);
  NodeId tanh(NodeId x);
  NodeId sigmoid(NodeId x);

  // Inverse of the cIRM compression at K = C = 1: 2·atanh(x), with the input
  // clamped to |x| <= 1 - 1e-7. Clamped entries get zero gradient and are
  // counted on the tape.
  NodeId decompress(NodeId x);

  // sqrt(re^2 + im^2) with subgradient 0 at the origin.
  NodeId magnitude(NodeId re, NodeId im);

  // out.data[i] = in.data[map[i]]; adjoint scatter-adds. Covers transposes,
  // sequence shuffles and their inverses, and feature-plane extraction.
  NodeId gather(NodeId x, std::vector<std::int64_t> map, std::vector<int> shape);

  NodeId concat_last(NodeId a, NodeId b);

  // Single-direction LSTM. x: (B, S, I) -> (B, S, H). Weights wx: (I, 4H),
  // wh: (H, 4H), bias: (4H); gate order [input, forget, cell, output].
  // reverse=true runs the recurrence from the end of the sequence; outputs
  // stay at their original positions.
  NodeId lstm(NodeId x, NodeId wx, NodeId wh, NodeId bias, bool reverse);

  // Overlap-add inverse STFT of one channel. re, im: (F, T) with
  // F = window.size()/2 + 1 -> (hop*(T-1) + window.size()) samples.
  NodeId istft(NodeId re, NodeId im, std::vector<double> window, int hop);

  // Scalar sum |x - target|, elementwise, subgradient 0 at ties.
  NodeId l1_to_const(NodeId x, Tensor target);

  // Scalar combination sum_i w_i · x_i of scalar nodes.
  NodeId weighted_sum(std::vector<NodeId> xs, std::vector<double> ws);

  // Seeds d(loss)/d(loss) = 1 and fills every node's adjoint. The loss must
  // be a scalar (numel 1).
  void backward(NodeId loss);

  std::int64_t decompress_clamp_count() const { return clamp_count_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  NodeId record(Tensor value, std::function<void(Tape&)> back);
  Tensor& grad_mut(NodeId id) { return nodes_[static_cast<std::size_t>(id)].grad; }

  std::vector<Node> nodes_;
  std::int64_t clamp_count_ = 0;
};

}  // namespace mcse
