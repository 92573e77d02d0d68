#include "csipred/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace csipred::ag {

namespace {

thread_local int g_no_grad_depth = 0;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw RuntimeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                       shape_str(b.shape()));
}

bool track_any(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> values) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return node;
}

Tensor finish_op(std::shared_ptr<detail::Node> node, bool tracked,
                 std::vector<std::shared_ptr<detail::Node>> parents,
                 std::function<void(detail::Node&)> backward_fn) {
  if (tracked) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void ensure_grad(detail::Node& node) {
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
}

// ---- convolution kernels -------------------------------------------------
// All three share the index pattern ih = oh*stride - pad + kh (same for w).
// "gather" computes the cross-correlation output, "scatter" its adjoint, and
// "weight_grad" the correlation between the big (input-sized) and small
// (output-sized) operands. All accumulate (+=) into out.

struct ConvDims {
  int n, c_in, h_in, w_in;   // big tensor
  int f_out, h_out, w_out;   // small tensor
  int kh, kw, stride, pad;
};

void conv_gather(double* out, const double* big, const double* kernel, const ConvDims& d) {
  for (int n = 0; n < d.n; ++n) {
    for (int f = 0; f < d.f_out; ++f) {
      double* out_plane = out + (static_cast<std::size_t>(n) * d.f_out + f) *
                                    static_cast<std::size_t>(d.h_out) * d.w_out;
      for (int oh = 0; oh < d.h_out; ++oh) {
        const int ih_base = oh * d.stride - d.pad;
        const int kh0 = std::max(0, -ih_base);
        const int kh1 = std::min(d.kh, d.h_in - ih_base);
        for (int ow = 0; ow < d.w_out; ++ow) {
          const int iw_base = ow * d.stride - d.pad;
          const int kw0 = std::max(0, -iw_base);
          const int kw1 = std::min(d.kw, d.w_in - iw_base);
          double acc = 0.0;
          for (int c = 0; c < d.c_in; ++c) {
            const double* x_plane = big + (static_cast<std::size_t>(n) * d.c_in + c) *
                                              static_cast<std::size_t>(d.h_in) * d.w_in;
            const double* w_plane = kernel + (static_cast<std::size_t>(f) * d.c_in + c) *
                                                 static_cast<std::size_t>(d.kh) * d.kw;
            for (int kh = kh0; kh < kh1; ++kh) {
              const double* x_row = x_plane + static_cast<std::size_t>(ih_base + kh) * d.w_in;
              const double* w_row = w_plane + static_cast<std::size_t>(kh) * d.kw;
              for (int kw = kw0; kw < kw1; ++kw) acc += x_row[iw_base + kw] * w_row[kw];
            }
          }
          out_plane[static_cast<std::size_t>(oh) * d.w_out + ow] += acc;
        }
      }
    }
  }
}

void conv_scatter(double* out, const double* small, const double* kernel, const ConvDims& d) {
  for (int n = 0; n < d.n; ++n) {
    for (int f = 0; f < d.f_out; ++f) {
      const double* s_plane = small + (static_cast<std::size_t>(n) * d.f_out + f) *
                                          static_cast<std::size_t>(d.h_out) * d.w_out;
      for (int oh = 0; oh < d.h_out; ++oh) {
        const int ih_base = oh * d.stride - d.pad;
        const int kh0 = std::max(0, -ih_base);
        const int kh1 = std::min(d.kh, d.h_in - ih_base);
        for (int ow = 0; ow < d.w_out; ++ow) {
          const int iw_base = ow * d.stride - d.pad;
          const int kw0 = std::max(0, -iw_base);
          const int kw1 = std::min(d.kw, d.w_in - iw_base);
          const double s = s_plane[static_cast<std::size_t>(oh) * d.w_out + ow];
          if (s == 0.0) continue;
          for (int c = 0; c < d.c_in; ++c) {
            double* o_plane = out + (static_cast<std::size_t>(n) * d.c_in + c) *
                                        static_cast<std::size_t>(d.h_in) * d.w_in;
            const double* w_plane = kernel + (static_cast<std::size_t>(f) * d.c_in + c) *
                                                 static_cast<std::size_t>(d.kh) * d.kw;
            for (int kh = kh0; kh < kh1; ++kh) {
              double* o_row = o_plane + static_cast<std::size_t>(ih_base + kh) * d.w_in;
              const double* w_row = w_plane + static_cast<std::size_t>(kh) * d.kw;
              for (int kw = kw0; kw < kw1; ++kw) o_row[iw_base + kw] += s * w_row[kw];
            }
          }
        }
      }
    }
  }
}

void conv_weight_grad(double* dkernel, const double* big, const double* small,
                      const ConvDims& d) {
  for (int n = 0; n < d.n; ++n) {
    for (int f = 0; f < d.f_out; ++f) {
      const double* s_plane = small + (static_cast<std::size_t>(n) * d.f_out + f) *
                                          static_cast<std::size_t>(d.h_out) * d.w_out;
      for (int oh = 0; oh < d.h_out; ++oh) {
        const int ih_base = oh * d.stride - d.pad;
        const int kh0 = std::max(0, -ih_base);
        const int kh1 = std::min(d.kh, d.h_in - ih_base);
        for (int ow = 0; ow < d.w_out; ++ow) {
          const int iw_base = ow * d.stride - d.pad;
          const int kw0 = std::max(0, -iw_base);
          const int kw1 = std::min(d.kw, d.w_in - iw_base);
          const double s = s_plane[static_cast<std::size_t>(oh) * d.w_out + ow];
          if (s == 0.0) continue;
          for (int c = 0; c < d.c_in; ++c) {
            const double* x_plane = big + (static_cast<std::size_t>(n) * d.c_in + c) *
                                              static_cast<std::size_t>(d.h_in) * d.w_in;
            double* dw_plane = dkernel + (static_cast<std::size_t>(f) * d.c_in + c) *
                                             static_cast<std::size_t>(d.kh) * d.kw;
            for (int kh = kh0; kh < kh1; ++kh) {
              const double* x_row = x_plane + static_cast<std::size_t>(ih_base + kh) * d.w_in;
              double* dw_row = dw_plane + static_cast<std::size_t>(kh) * d.kw;
              for (int kw = kw0; kw < kw1; ++kw) dw_row[kw] += s * x_row[iw_base + kw];
            }
          }
        }
      }
    }
  }
}

int conv_out_dim(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

void detail::Node::accumulate(const std::vector<double>& contribution) {
  ensure_grad(*this);
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += contribution[i];
}

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  for (int d : shape)
    if (d <= 0) throw RuntimeError("tensor: non-positive dimension in " + shape_str(shape));
  auto n = static_cast<std::size_t>(shape_numel(shape));
  auto node = new_node(std::move(shape), std::vector<double>(n, fill));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape))
    throw RuntimeError("tensor: value count does not match shape " + shape_str(shape));
  auto node = new_node(std::move(shape), std::move(values));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }

int Tensor::dim(std::size_t axis) const { return node_->shape.at(axis); }

std::int64_t Tensor::numel() const { return node_->numel(); }

std::vector<double>& Tensor::values() { return node_->value; }
const std::vector<double>& Tensor::values() const { return node_->value; }

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) throw RuntimeError("tensor: gradient not populated");
  return node_->grad;
}

bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

void Tensor::zero_grad() {
  if (defined() && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }

double Tensor::scalar() const {
  if (numel() != 1) throw RuntimeError("tensor: scalar() on non-scalar " + shape_str(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const {
  auto node = new_node(node_->shape, node_->value);
  return Tensor(std::move(node));
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

void backward(const Tensor& loss) {
  if (!loss.defined()) throw RuntimeError("backward: undefined tensor");
  if (loss.numel() != 1) throw RuntimeError("backward: loss must be scalar");
  auto root = loss.node();
  if (!root->requires_grad) throw RuntimeError("backward: loss does not require grad");
  if (root->backward_ran)
    throw RuntimeError("backward: already ran for this loss node; rebuild the graph");
  root->backward_ran = true;

  // Reverse post-order DFS over the parent DAG: every node appears before the
  // nodes it feeds into, so each grad is complete when its backward runs.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& frame = stack.back();
    if (frame.next_parent < frame.node->parents.size()) {
      detail::Node* parent = frame.node->parents[frame.next_parent++].get();
      if (visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(frame.node);
      stack.pop_back();
    }
  }

  root->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

// ---- elementwise ops -----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  bool tracked = track_any({&a, &b});
  auto an = a.node(), bn = b.node();
  return finish_op(new_node(a.shape(), std::move(out)), tracked, {an, bn},
                   [an, bn](detail::Node& self) {
                     if (an->requires_grad) an->accumulate(self.grad);
                     if (bn->requires_grad) bn->accumulate(self.grad);
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  bool tracked = track_any({&a, &b});
  auto an = a.node(), bn = b.node();
  return finish_op(new_node(a.shape(), std::move(out)), tracked, {an, bn},
                   [an, bn](detail::Node& self) {
                     if (an->requires_grad) an->accumulate(self.grad);
                     if (bn->requires_grad) {
                       ensure_grad(*bn);
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         bn->grad[i] -= self.grad[i];
                     }
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.values());
  const auto& bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  bool tracked = track_any({&a, &b});
  auto an = a.node(), bn = b.node();
  return finish_op(new_node(a.shape(), std::move(out)), tracked, {an, bn},
                   [an, bn](detail::Node& self) {
                     if (an->requires_grad) {
                       ensure_grad(*an);
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         an->grad[i] += self.grad[i] * bn->value[i];
                     }
                     if (bn->requires_grad) {
                       ensure_grad(*bn);
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         bn->grad[i] += self.grad[i] * an->value[i];
                     }
                   });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values());
  for (double& v : out) v *= factor;
  bool tracked = track_any({&a});
  auto an = a.node();
  return finish_op(new_node(a.shape(), std::move(out)), tracked, {an},
                   [an, factor](detail::Node& self) {
                     ensure_grad(*an);
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       an->grad[i] += factor * self.grad[i];
                   });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  bool tracked = track_any({&a});
  auto an = a.node();
  return finish_op(new_node({1}, {acc}), tracked, {an}, [an](detail::Node& self) {
    ensure_grad(*an);
    const double g = self.grad[0];
    for (double& v : an->grad) v += g;
  });
}

// ---- activations -----------------------------------------------------------

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  std::vector<double> out(x.values());
  for (double& v : out)
    if (v < 0.0) v *= negative_slope;
  bool tracked = track_any({&x});
  auto xn = x.node();
  return finish_op(new_node(x.shape(), std::move(out)), tracked, {xn},
                   [xn, negative_slope](detail::Node& self) {
                     ensure_grad(*xn);
                     for (std::size_t i = 0; i < self.grad.size(); ++i)
                       xn->grad[i] +=
                           self.grad[i] * (xn->value[i] >= 0.0 ? 1.0 : negative_slope);
                   });
}

Tensor tanh(const Tensor& x) {
  std::vector<double> out(x.values());
  for (double& v : out) v = std::tanh(v);
  bool tracked = track_any({&x});
  auto xn = x.node();
  return finish_op(new_node(x.shape(), std::move(out)), tracked, {xn},
                   [xn](detail::Node& self) {
                     ensure_grad(*xn);
                     for (std::size_t i = 0; i < self.grad.size(); ++i) {
                       double y = self.value[i];
                       xn->grad[i] += self.grad[i] * (1.0 - y * y);
                     }
                   });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.values());
  for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
  bool tracked = track_any({&x});
  auto xn = x.node();
  return finish_op(new_node(x.shape(), std::move(out)), tracked, {xn},
                   [xn](detail::Node& self) {
                     ensure_grad(*xn);
                     for (std::size_t i = 0; i < self.grad.size(); ++i) {
                       double y = self.value[i];
                       xn->grad[i] += self.grad[i] * y * (1.0 - y);
                     }
                   });
}

// ---- dense -----------------------------------------------------------------

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.shape().size() != 2 || weight.shape().size() != 2 || bias.shape().size() != 1)
    throw RuntimeError("dense: expected x:[N,D], weight:[O,D], bias:[O]");
  const int n = x.dim(0), d = x.dim(1), o = weight.dim(0);
  if (weight.dim(1) != d || bias.dim(0) != o)
    throw RuntimeError("dense: shape mismatch between x " + shape_str(x.shape()) + ", weight " +
                       shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()));

  std::vector<double> out(static_cast<std::size_t>(n) * o);
  const auto& xv = x.values();
  const auto& wv = weight.values();
  const auto& bv = bias.values();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < o; ++j) {
      double acc = bv[j];
      for (int k = 0; k < d; ++k)
        acc += xv[static_cast<std::size_t>(i) * d + k] * wv[static_cast<std::size_t>(j) * d + k];
      out[static_cast<std::size_t>(i) * o + j] = acc;
    }

  bool tracked = track_any({&x, &weight, &bias});
  auto xn = x.node(), wn = weight.node(), bn = bias.node();
  return finish_op(new_node({n, o}, std::move(out)), tracked, {xn, wn, bn},
                   [xn, wn, bn, n, d, o](detail::Node& self) {
                     const auto& dy = self.grad;
                     if (xn->requires_grad) {
                       ensure_grad(*xn);
                       for (int i = 0; i < n; ++i)
                         for (int j = 0; j < o; ++j) {
                           double g = dy[static_cast<std::size_t>(i) * o + j];
                           for (int k = 0; k < d; ++k)
                             xn->grad[static_cast<std::size_t>(i) * d + k] +=
                                 g * wn->value[static_cast<std::size_t>(j) * d + k];
                         }
                     }
                     if (wn->requires_grad) {
                       ensure_grad(*wn);
                       for (int i = 0; i < n; ++i)
                         for (int j = 0; j < o; ++j) {
                           double g = dy[static_cast<std::size_t>(i) * o + j];
                           for (int k = 0; k < d; ++k)
                             wn->grad[static_cast<std::size_t>(j) * d + k] +=
                                 g * xn->value[static_cast<std::size_t>(i) * d + k];
                         }
                     }
                     if (bn->requires_grad) {
                       ensure_grad(*bn);
                       for (int i = 0; i < n; ++i)
                         for (int j = 0; j < o; ++j)
                           bn->grad[j] += dy[static_cast<std::size_t>(i) * o + j];
                     }
                   });
}

// ---- convolutions ----------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride, int pad) {
  if (x.shape().size() != 4 || kernel.shape().size() != 4 || bias.shape().size() != 1)
    throw RuntimeError("conv2d: expected x:[N,C,H,W], kernel:[F,C,kh,kw], bias:[F]");
  if (stride < 1 || pad < 0) throw RuntimeError("conv2d: invalid stride/pad");
  ConvDims d{};
  d.n = x.dim(0);
  d.c_in = x.dim(1);
  d.h_in = x.dim(2);
  d.w_in = x.dim(3);
  d.f_out = kernel.dim(0);
  d.kh = kernel.dim(2);
  d.kw = kernel.dim(3);
  d.stride = stride;
  d.pad = pad;
  if (kernel.dim(1) != d.c_in)
    throw RuntimeError("conv2d: kernel channel count does not match input");
  if (bias.dim(0) != d.f_out) throw RuntimeError("conv2d: bias size does not match filters");
  d.h_out = conv_out_dim(d.h_in, d.kh, stride, pad);
  d.w_out = conv_out_dim(d.w_in, d.kw, stride, pad);
  if (d.h_out <= 0 || d.w_out <= 0) throw RuntimeError("conv2d: non-positive output size");

  std::vector<double> out(static_cast<std::size_t>(d.n) * d.f_out * d.h_out * d.w_out, 0.0);
  conv_gather(out.data(), x.values().data(), kernel.values().data(), d);
  const auto& bv = bias.values();
  const std::size_t plane = static_cast<std::size_t>(d.h_out) * d.w_out;
  for (int n = 0; n < d.n; ++n)
    for (int f = 0; f < d.f_out; ++f) {
      double* p = out.data() + (static_cast<std::size_t>(n) * d.f_out + f) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bv[f];
    }

  bool tracked = track_any({&x, &kernel, &bias});
  auto xn = x.node(), kn = kernel.node(), bn = bias.node();
  return finish_op(new_node({d.n, d.f_out, d.h_out, d.w_out}, std::move(out)), tracked,
                   {xn, kn, bn}, [xn, kn, bn, d](detail::Node& self) {
                     const double* dy = self.grad.data();
                     if (xn->requires_grad) {
                       ensure_grad(*xn);
                       conv_scatter(xn->grad.data(), dy, kn->value.data(), d);
                     }
                     if (kn->requires_grad) {
                       ensure_grad(*kn);
                       conv_weight_grad(kn->grad.data(), xn->value.data(), dy, d);
                     }
                     if (bn->requires_grad) {
                       ensure_grad(*bn);
                       const std::size_t plane = static_cast<std::size_t>(d.h_out) * d.w_out;
                       for (int n = 0; n < d.n; ++n)
                         for (int f = 0; f < d.f_out; ++f) {
                           const double* p =
                               dy + (static_cast<std::size_t>(n) * d.f_out + f) * plane;
                           double acc = 0.0;
                           for (std::size_t i = 0; i < plane; ++i) acc += p[i];
                           bn->grad[f] += acc;
                         }
                     }
                   });
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& kernel, const Tensor& bias, int stride,
                        int pad, std::array<int, 2> output_hw) {
  if (x.shape().size() != 4 || kernel.shape().size() != 4 || bias.shape().size() != 1)
    throw RuntimeError("conv2d_transpose: expected x:[N,F,H',W'], kernel:[F,C,kh,kw], bias:[C]");
  if (stride < 1 || pad < 0) throw RuntimeError("conv2d_transpose: invalid stride/pad");
  ConvDims d{};
  d.n = x.dim(0);
  d.f_out = x.dim(1);
  d.h_out = x.dim(2);
  d.w_out = x.dim(3);
  d.c_in = kernel.dim(1);
  d.kh = kernel.dim(2);
  d.kw = kernel.dim(3);
  d.stride = stride;
  d.pad = pad;
  d.h_in = output_hw[0];
  d.w_in = output_hw[1];
  if (kernel.dim(0) != d.f_out)
    throw RuntimeError("conv2d_transpose: kernel filter count does not match input channels");
  if (bias.dim(0) != d.c_in)
    throw RuntimeError("conv2d_transpose: bias size does not match output channels");
  if (d.h_in <= 0 || d.w_in <= 0 || conv_out_dim(d.h_in, d.kh, stride, pad) != d.h_out ||
      conv_out_dim(d.w_in, d.kw, stride, pad) != d.w_out)
    throw RuntimeError("conv2d_transpose: output_size inconsistent with stride/pad adjoint");

  std::vector<double> out(static_cast<std::size_t>(d.n) * d.c_in * d.h_in * d.w_in, 0.0);
  conv_scatter(out.data(), x.values().data(), kernel.values().data(), d);
  const auto& bv = bias.values();
  const std::size_t plane = static_cast<std::size_t>(d.h_in) * d.w_in;
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.c_in; ++c) {
      double* p = out.data() + (static_cast<std::size_t>(n) * d.c_in + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bv[c];
    }

  bool tracked = track_any({&x, &kernel, &bias});
  auto xn = x.node(), kn = kernel.node(), bn = bias.node();
  return finish_op(new_node({d.n, d.c_in, d.h_in, d.w_in}, std::move(out)), tracked, {xn, kn, bn},
                   [xn, kn, bn, d](detail::Node& self) {
                     const double* dy = self.grad.data();
                     if (xn->requires_grad) {
                       ensure_grad(*xn);
                       conv_gather(xn->grad.data(), dy, kn->value.data(), d);
                     }
                     if (kn->requires_grad) {
                       ensure_grad(*kn);
                       conv_weight_grad(kn->grad.data(), dy, xn->value.data(), d);
                     }
                     if (bn->requires_grad) {
                       ensure_grad(*bn);
                       const std::size_t plane = static_cast<std::size_t>(d.h_in) * d.w_in;
                       for (int n = 0; n < d.n; ++n)
                         for (int c = 0; c < d.c_in; ++c) {
                           const double* p =
                               dy + (static_cast<std::size_t>(n) * d.c_in + c) * plane;
                           double acc = 0.0;
                           for (std::size_t i = 0; i < plane; ++i) acc += p[i];
                           bn->grad[c] += acc;
                         }
                     }
                   });
}

// ---- batch normalization ---------------------------------------------------

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  std::vector<double>& running_mean, std::vector<double>& running_var,
                  double momentum, double eps, bool training) {
  if (x.shape().size() != 4) throw RuntimeError("batch_norm: expected x:[N,C,H,W]");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
    throw RuntimeError("batch_norm: gamma/beta must have one entry per channel");
  if (running_mean.size() != static_cast<std::size_t>(c) ||
      running_var.size() != static_cast<std::size_t>(c))
    throw RuntimeError("batch_norm: running statistics size mismatch");
  if (training && n < 2) throw RuntimeError("batch_norm: training mode needs batch >= 2");

  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t per_channel = static_cast<std::size_t>(n) * plane;
  const auto& xv = x.values();

  std::vector<double> mean(c, 0.0), inv_std(c, 0.0);
  if (training) {
    std::vector<double> var(c, 0.0);
    for (int ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const double* p = xv.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      mean[ci] = acc / static_cast<double>(per_channel);
      double acc2 = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const double* p = xv.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          double dlt = p[i] - mean[ci];
          acc2 += dlt * dlt;
        }
      }
      var[ci] = acc2 / static_cast<double>(per_channel);
      inv_std[ci] = 1.0 / std::sqrt(var[ci] + eps);
      // Running statistics carry the biased batch variance so that eval-mode
      // normalization of a stationary batch reproduces the train-mode one.
      running_mean[ci] = (1.0 - momentum) * running_mean[ci] + momentum * mean[ci];
      running_var[ci] = (1.0 - momentum) * running_var[ci] + momentum * var[ci];
    }
  } else {
    for (int ci = 0; ci < c; ++ci) {
      mean[ci] = running_mean[ci];
      inv_std[ci] = 1.0 / std::sqrt(running_var[ci] + eps);
    }
  }

  std::vector<double> xhat(xv.size());
  std::vector<double> out(xv.size());
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        double z = (xv[base + i] - mean[ci]) * inv_std[ci];
        xhat[base + i] = z;
        out[base + i] = gv[ci] * z + bv[ci];
      }
    }

  bool tracked = track_any({&x, &gamma, &beta});
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return finish_op(
      new_node(x.shape(), std::move(out)), tracked, {xn, gn, bn},
      [xn, gn, bn, n, c, plane, per_channel, training, inv_std = std::move(inv_std),
       xhat = std::move(xhat)](detail::Node& self) {
        const auto& dy = self.grad;
        std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (int ni = 0; ni < n; ++ni)
          for (int ci = 0; ci < c; ++ci) {
            const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * plane;
            double a = 0.0, b = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
              a += dy[base + i];
              b += dy[base + i] * xhat[base + i];
            }
            sum_dy[ci] += a;
            sum_dy_xhat[ci] += b;
          }
        if (bn->requires_grad) {
          ensure_grad(*bn);
          for (int ci = 0; ci < c; ++ci) bn->grad[ci] += sum_dy[ci];
        }
        if (gn->requires_grad) {
          ensure_grad(*gn);
          for (int ci = 0; ci < c; ++ci) gn->grad[ci] += sum_dy_xhat[ci];
        }
        if (xn->requires_grad) {
          ensure_grad(*xn);
          const double inv_m = 1.0 / static_cast<double>(per_channel);
          for (int ni = 0; ni < n; ++ni)
            for (int ci = 0; ci < c; ++ci) {
              const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * plane;
              const double scale = gn->value[ci] * inv_std[ci];
              for (std::size_t i = 0; i < plane; ++i) {
                double term = dy[base + i];
                if (training)
                  term -= inv_m * (sum_dy[ci] + xhat[base + i] * sum_dy_xhat[ci]);
                xn->grad[base + i] += scale * term;
              }
            }
        }
      });
}

// ---- shape ops ---------------------------------------------------------------

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 4 || b.shape().size() != 4)
    throw RuntimeError("concat_channels: expected 4-d tensors");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw RuntimeError("concat_channels: mismatched batch or spatial dims: " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> out(static_cast<std::size_t>(n) * (ca + cb) * plane);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int ni = 0; ni < n; ++ni) {
    std::copy_n(av.data() + static_cast<std::size_t>(ni) * ca * plane, ca * plane,
                out.data() + static_cast<std::size_t>(ni) * (ca + cb) * plane);
    std::copy_n(bv.data() + static_cast<std::size_t>(ni) * cb * plane, cb * plane,
                out.data() + (static_cast<std::size_t>(ni) * (ca + cb) + ca) * plane);
  }
  bool tracked = track_any({&a, &b});
  auto an = a.node(), bn = b.node();
  return finish_op(new_node({n, ca + cb, h, w}, std::move(out)), tracked, {an, bn},
                   [an, bn, n, ca, cb, plane](detail::Node& self) {
                     if (an->requires_grad) ensure_grad(*an);
                     if (bn->requires_grad) ensure_grad(*bn);
                     for (int ni = 0; ni < n; ++ni) {
                       const double* g =
                           self.grad.data() + static_cast<std::size_t>(ni) * (ca + cb) * plane;
                       if (an->requires_grad) {
                         double* pa = an->grad.data() + static_cast<std::size_t>(ni) * ca * plane;
                         for (std::size_t i = 0; i < static_cast<std::size_t>(ca) * plane; ++i)
                           pa[i] += g[i];
                       }
                       if (bn->requires_grad) {
                         double* pb = bn->grad.data() + static_cast<std::size_t>(ni) * cb * plane;
                         const double* gb = g + static_cast<std::size_t>(ca) * plane;
                         for (std::size_t i = 0; i < static_cast<std::size_t>(cb) * plane; ++i)
                           pb[i] += gb[i];
                       }
                     }
                   });
}

Tensor flatten2d(const Tensor& x) {
  if (x.shape().empty()) throw RuntimeError("flatten2d: undefined shape");
  const int n = x.dim(0);
  const int d = static_cast<int>(x.numel() / n);
  bool tracked = track_any({&x});
  auto xn = x.node();
  return finish_op(new_node({n, d}, x.values()), tracked, {xn}, [xn](detail::Node& self) {
    xn->accumulate(self.grad);
  });
}

// ---- losses ------------------------------------------------------------------

Tensor bce_loss(const Tensor& probabilities, double target) {
  if (target != 0.0 && target != 1.0) throw RuntimeError("bce_loss: target must be 0 or 1");
  const auto& pv = probabilities.values();
  const double inv_n = 1.0 / static_cast<double>(pv.size());
  double acc = 0.0;
  for (double p : pv) {
    double pc = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
    acc -= target * std::log(pc) + (1.0 - target) * std::log(1.0 - pc);
  }
  acc *= inv_n;
  bool tracked = track_any({&probabilities});
  auto pn = probabilities.node();
  return finish_op(new_node({1}, {acc}), tracked, {pn},
                   [pn, target, inv_n](detail::Node& self) {
                     ensure_grad(*pn);
                     const double g = self.grad[0] * inv_n;
                     for (std::size_t i = 0; i < pn->value.size(); ++i) {
                       double p = pn->value[i];
                       if (p < kBceClamp || p > 1.0 - kBceClamp) continue;  // clamped: zero slope
                       pn->grad[i] += g * (-(target / p) + (1.0 - target) / (1.0 - p));
                     }
                   });
}

Tensor l1_loss(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "l1_loss");
  const auto& av = a.values();
  const auto& bv = b.values();
  const double inv_n = 1.0 / static_cast<double>(av.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
  acc *= inv_n;
  bool tracked = track_any({&a, &b});
  auto an = a.node(), bn = b.node();
  return finish_op(new_node({1}, {acc}), tracked, {an, bn}, [an, bn, inv_n](detail::Node& self) {
    const double g = self.grad[0] * inv_n;
    if (an->requires_grad) ensure_grad(*an);
    if (bn->requires_grad) ensure_grad(*bn);
    for (std::size_t i = 0; i < an->value.size(); ++i) {
      double diff = an->value[i] - bn->value[i];
      double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      if (an->requires_grad) an->grad[i] += g * s;
      if (bn->requires_grad) bn->grad[i] -= g * s;
    }
  });
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse_loss");
  const auto& av = a.values();
  const auto& bv = b.values();
  const double inv_n = 1.0 / static_cast<double>(av.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    double d = av[i] - bv[i];
    acc += d * d;
  }
  acc *= inv_n;
  bool tracked = track_any({&a, &b});
  auto an = a.node(), bn = b.node();
  return finish_op(new_node({1}, {acc}), tracked, {an, bn}, [an, bn, inv_n](detail::Node& self) {
    const double g = self.grad[0] * inv_n;
    if (an->requires_grad) ensure_grad(*an);
    if (bn->requires_grad) ensure_grad(*bn);
    for (std::size_t i = 0; i < an->value.size(); ++i) {
      double d = 2.0 * (an->value[i] - bn->value[i]);
      if (an->requires_grad) an->grad[i] += g * d;
      if (bn->requires_grad) bn->grad[i] -= g * d;
    }
  });
}

}  // namespace csipred::ag
