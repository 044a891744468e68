#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "epose/nn/mat.hpp"

namespace epose::nn {

class Tape;

// Handle into a tape; only valid for the tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order; backward() walks
// them in reverse, so the graph is always topologically sorted by index.
// Parameter leaves can reference external storage to avoid copies.
class Tape {
 public:
  Var leaf(Mat value);
  Var leaf_ref(const Mat* value);  // external storage, must outlive the tape
  Var scalar(double v) { return leaf(Mat::scalar(v)); }

  const Mat& val(Var v) const { return value_of(v.id); }
  // Valid after backward(); zero matrix if the node was never reached.
  const Mat& grad(Var v) const;
  // True once backward reached this node (an all-zero grad still counts).
  bool has_grad(Var v) const { return !nodes_[static_cast<std::size_t>(v.id)].grad.a.empty(); }

  Var matmul(Var a, Var b);     // A * B
  Var matmul_nt(Var a, Var b);  // A * B^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var add_rowvec(Var x, Var b);
  Var scale(Var a, double k);
  Var add_scalar(Var a, double k);
  Var relu(Var a);
  Var tanh_op(Var a);
  Var exp_op(Var a);
  Var slice_cols(Var a, int start, int len);
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var row(Var a, int r);
  Var mean_rows(Var a);  // 1 x cols
  Var sum(Var a);        // 1 x 1
  Var square(Var a);
  Var pick(Var a, int idx);  // row vector entry -> 1 x 1

  // Row-wise softmax (all entries active).
  Var softmax_rows(Var a);
  // Masked softmax / log-softmax over a row vector; masked-out entries get
  // probability 0 (log-probability -inf) and no gradient.
  Var masked_softmax_vec(Var a, std::vector<std::uint8_t> mask);
  Var masked_log_softmax_vec(Var a, std::vector<std::uint8_t> mask);
  // Shannon entropy -sum p*logp over unmasked entries of a log-prob row.
  Var entropy_from_logp(Var logp, std::vector<std::uint8_t> mask);

  struct BnStats {
    Mat mean, var;  // per-column batch statistics (biased variance)
  };
  // Batch normalization over rows. train=true normalizes with batch
  // statistics (optionally reported via out_stats); train=false uses the
  // provided running statistics. gamma/beta are 1 x cols.
  Var batchnorm(Var x, Var gamma, Var beta, const Mat* run_mean, const Mat* run_var,
                bool train, double eps, BnStats* out_stats);

  // Accumulates gradients of `loss` (1x1) into every reachable node.
  void backward(Var loss);

  void clear();
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* ext = nullptr;  // set for leaf_ref nodes
    Mat grad;
    std::function<void(Tape&)> back;  // null for leaves
  };

  const Mat& value_of(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ext ? *n.ext : n.value;
  }
  Mat& grad_of(int id);
  void add_grad(int id, const Mat& g);

  Var push(Mat value, std::function<void(Tape&)> back);

  std::vector<Node> nodes_;

  friend struct TapeOps;
};

}  // namespace epose::nn
