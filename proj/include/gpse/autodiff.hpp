#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gpse/tensor.hpp"

namespace gpse {

// Tape-based reverse-mode differentiation over Tensors. Ops build a DAG of
// nodes; backward() topologically sorts from the loss and accumulates into
// grad buffers. Gradients add across backward calls until zeroed.
struct VarNode {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<VarNode>> parents;
  std::function<void(VarNode&)> backward_fn;

  Tensor& ensure_grad();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<VarNode> n) : node_(std::move(n)) {}

  static Var constant(Tensor t);
  static Var leaf(Tensor t, bool requires_grad);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  Tensor& grad() { return node_->ensure_grad(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::shared_ptr<VarNode> node() const { return node_; }
  double scalar() const;

 private:
  std::shared_ptr<VarNode> node_;
};

// Global switch: when disabled, ops propagate values but record no graph
// (read-only inference from multiple threads is then safe).
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();

 private:
  bool prev_;
};

// Runs reverse-mode accumulation from a scalar loss.
void backward(const Var& loss);

namespace ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);         // elementwise
Var scale(const Var& a, double s);
Var square(const Var& a);
Var silu(const Var& a);
Var mean_all(const Var& a);                  // scalar
Var sum_all(const Var& a);                   // scalar

// y = x w^T + b; x [N, Din], w [Dout, Din], b [Dout] -> [N, Dout]
Var linear(const Var& x, const Var& w, const Var& b);

// x [N,Ci,H,W], w [Co,Ci,kh,kw], b [Co]; zero padding
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

// Normalizes over (C/groups, H, W) per sample; gamma/beta are per-channel.
Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups,
               double eps = 1e-6);

Var upsample_nearest2(const Var& x);
Var concat_channels(const Var& a, const Var& b);

// Zero-pad H/W at the high end to (new_h, new_w); crop takes the low corner.
Var pad_hw(const Var& x, int new_h, int new_w);
Var crop_hw(const Var& x, int new_h, int new_w);

// y[n,c,:,:] = x[n,c,:,:] + s[n,c]; s shape [N, C]
Var channel_bias(const Var& x, const Var& s);

// FiLM-style conditioning: y[n,c,:,:] = x[n,c,:,:] * (1 + s[n,c]) + b[n,c]
Var channel_film(const Var& x, const Var& s, const Var& b);

// y[n,...] = x[n,...] * s[n]; s is a plain per-sample constant
Var row_scale(const Var& x, const std::vector<double>& s);

// Mean over complex elements of squared magnitude; x is a [N,2,H,W] tensor
// holding re/im planes, so this equals 2 * mean of squared entries.
Var complex_mse(const Var& err);

}  // namespace ops

}  // namespace gpse
