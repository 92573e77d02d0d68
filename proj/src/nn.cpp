#include "csipred/nn.hpp"

#include <cmath>

namespace csipred::nn {

void gaussian_init(ag::Tensor& t, double mean, double std_dev, Rng& rng) {
  for (double& v : t.values()) v = mean + std_dev * rng.normal();
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& rng,
               double init_std, bool use_bias)
    : weight(ag::Tensor::zeros({out_channels, in_channels, kernel, kernel}, true)),
      bias(ag::Tensor::zeros({out_channels}, use_bias)),
      stride(stride),
      pad(pad),
      use_bias(use_bias) {
  gaussian_init(weight, 0.0, init_std, rng);
}

ag::Tensor Conv2d::forward(const ag::Tensor& x) const {
  return ag::conv2d(x, weight, bias, stride, pad);
}

void Conv2d::collect(std::vector<ag::Tensor>& params) {
  params.push_back(weight);
  if (use_bias) params.push_back(bias);
}

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride,
                                 int pad, std::array<int, 2> output_hw, Rng& rng, double init_std,
                                 bool use_bias)
    : weight(ag::Tensor::zeros({in_channels, out_channels, kernel, kernel}, true)),
      bias(ag::Tensor::zeros({out_channels}, use_bias)),
      stride(stride),
      pad(pad),
      output_hw(output_hw),
      use_bias(use_bias) {
  gaussian_init(weight, 0.0, init_std, rng);
}

ag::Tensor ConvTranspose2d::forward(const ag::Tensor& x) const {
  return ag::conv2d_transpose(x, weight, bias, stride, pad, output_hw);
}

void ConvTranspose2d::collect(std::vector<ag::Tensor>& params) {
  params.push_back(weight);
  if (use_bias) params.push_back(bias);
}

BatchNorm2d::BatchNorm2d(int channels, Rng& rng, double gamma_std)
    : gamma(ag::Tensor::zeros({channels}, true)),
      beta(ag::Tensor::zeros({channels}, true)),
      running_mean(channels, 0.0),
      running_var(channels, 1.0) {
  gaussian_init(gamma, 1.0, gamma_std, rng);
}

ag::Tensor BatchNorm2d::forward(const ag::Tensor& x, bool training) {
  return ag::batch_norm(x, gamma, beta, running_mean, running_var, momentum, eps, training);
}

void BatchNorm2d::collect(std::vector<ag::Tensor>& params) {
  params.push_back(gamma);
  params.push_back(beta);
}

Dense::Dense(int in_features, int out_features, Rng& rng, double init_std)
    : weight(ag::Tensor::zeros({out_features, in_features}, true)),
      bias(ag::Tensor::zeros({out_features}, true)) {
  gaussian_init(weight, 0.0, init_std, rng);
}

ag::Tensor Dense::forward(const ag::Tensor& x) const { return ag::dense(x, weight, bias); }

void Dense::collect(std::vector<ag::Tensor>& params) {
  params.push_back(weight);
  params.push_back(bias);
}

Adam::Adam(std::vector<ag::Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const ag::Tensor& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    ag::Tensor& p = params_[pi];
    const bool has_grad = p.has_grad();
    auto& m = m_[pi];
    auto& v = v_[pi];
    auto& values = p.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      double g = has_grad ? p.grad()[i] : 0.0;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      values[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (ag::Tensor& p : params_) p.zero_grad();
}

void Adam::restore(const std::vector<std::vector<double>>& m,
                   const std::vector<std::vector<double>>& v, std::int64_t step_count) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw RuntimeError("adam: restore state count mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].size() != m_[i].size() || v[i].size() != v_[i].size())
      throw RuntimeError("adam: restore state shape mismatch");
    m_[i] = m[i];
    v_[i] = v[i];
  }
  step_count_ = step_count;
}

void TensorBlobs::add(const std::string& name, const ag::Shape& shape,
                      const std::vector<double>& data) {
  names.push_back(name);
  shapes.push_back(shape);
  values.push_back(data);
}

}  // namespace csipred::nn
