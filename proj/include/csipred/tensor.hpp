#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "csipred/common.hpp"

namespace csipred::ag {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily during backward
  bool requires_grad = false;
  bool backward_ran = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents

  std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
  void accumulate(const std::vector<double>& contribution);
};

}  // namespace detail

// N-dimensional real array participating in reverse-mode differentiation.
// Copies are shallow handles onto one node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int dim(std::size_t axis) const;
  std::int64_t numel() const;

  std::vector<double>& values();
  const std::vector<double>& values() const;
  const std::vector<double>& grad() const;  // throws when no gradient present
  bool has_grad() const;
  void zero_grad();
  bool requires_grad() const;

  double scalar() const;  // numel() must be 1
  // Copy of the values with no graph history.
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Disables graph construction while alive (evaluation-mode forward passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Reverse-mode accumulation from a scalar loss. Gradients sum across fan-out;
// a second call on the same loss node throws.
void backward(const Tensor& loss);

// Elementwise / reduction ops.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);

// Activations.
Tensor leaky_relu(const Tensor& x, double negative_slope = 0.2);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// x:[N,D] * weight:[O,D]^T + bias:[O] -> [N,O].
Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Cross-correlation with zero padding. x:[N,C,H,W], kernel:[F,C,kh,kw],
// bias:[F] -> [N,F,H',W'] with H' = floor((H+2*pad-kh)/stride)+1.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride, int pad);

// Exact adjoint of conv2d's linear map (same kernel layout [F,C,kh,kw]),
// mapping [N,F,H',W'] back to [N,C,H,W] with H,W given by output_hw; bias has
// one entry per output channel C. output_hw must be consistent: a conv2d with
// the same stride/pad applied to it must reproduce x's spatial size.
Tensor conv2d_transpose(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride,
                        int pad, std::array<int, 2> output_hw);

// Per-channel standardization with learned affine; training mode uses batch
// statistics (and updates the running ones), eval mode uses the running
// statistics. x:[N,C,H,W], gamma/beta:[C].
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var,
                  double momentum, double eps, bool training);

// Concatenate along the channel axis: [N,Ca,H,W] + [N,Cb,H,W] -> [N,Ca+Cb,H,W].
Tensor concat_channels(const Tensor& a, const Tensor& b);

// [N,...] -> [N,D].
Tensor flatten2d(const Tensor& x);

// Mean-reduced losses. bce_loss clamps probabilities to [eps_c, 1-eps_c]
// before the logarithm; target is the common 0/1 label of the whole batch.
inline constexpr double kBceClamp = 1e-7;
Tensor bce_loss(const Tensor& probabilities, double target);
Tensor l1_loss(const Tensor& a, const Tensor& b);
Tensor mse_loss(const Tensor& a, const Tensor& b);

}  // namespace csipred::ag
