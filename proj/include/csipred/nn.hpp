#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "csipred/rng.hpp"
#include "csipred/tensor.hpp"

namespace csipred::nn {

inline constexpr double kDefaultInitStd = 0.02;

// Fills with N(mean, std^2) draws.
void gaussian_init(ag::Tensor& t, double mean, double std_dev, Rng& rng);

// use_bias=false keeps a frozen zero bias; layers feeding straight into batch
// norm use it, since the mean subtraction makes an additive bias a dead
// parameter whose zero gradient is pure round-off noise.
struct Conv2d {
  ag::Tensor weight;  // [F, C, k, k]
  ag::Tensor bias;    // [F]
  int stride = 1;
  int pad = 1;
  bool use_bias = true;

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& rng,
         double init_std = kDefaultInitStd, bool use_bias = true);
  ag::Tensor forward(const ag::Tensor& x) const;
  void collect(std::vector<ag::Tensor>& params);
};

struct ConvTranspose2d {
  ag::Tensor weight;  // [F, C, k, k]; maps [N,F,h,w] -> [N,C,H,W]
  ag::Tensor bias;    // [C]
  int stride = 1;
  int pad = 1;
  std::array<int, 2> output_hw{0, 0};
  bool use_bias = true;

  ConvTranspose2d() = default;
  ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int pad,
                  std::array<int, 2> output_hw, Rng& rng, double init_std = kDefaultInitStd,
                  bool use_bias = true);
  ag::Tensor forward(const ag::Tensor& x) const;
  void collect(std::vector<ag::Tensor>& params);
};

struct BatchNorm2d {
  ag::Tensor gamma;  // ~ N(1, 0.02^2)
  ag::Tensor beta;   // zeros
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNorm2d() = default;
  BatchNorm2d(int channels, Rng& rng, double gamma_std = kDefaultInitStd);
  ag::Tensor forward(const ag::Tensor& x, bool training);
  void collect(std::vector<ag::Tensor>& params);
};

struct Dense {
  ag::Tensor weight;  // [O, D]
  ag::Tensor bias;    // [O]

  Dense() = default;
  Dense(int in_features, int out_features, Rng& rng, double init_std = kDefaultInitStd);
  ag::Tensor forward(const ag::Tensor& x) const;
  void collect(std::vector<ag::Tensor>& params);
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction. Parameters without a populated gradient
// are treated as having zero gradient for the step.
class Adam {
 public:
  Adam(std::vector<ag::Tensor> params, AdamConfig cfg);

  void step();
  void zero_grad();
  std::int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

  // State access for checkpointing.
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore(const std::vector<std::vector<double>>& m, const std::vector<std::vector<double>>& v,
               std::int64_t step_count);

 private:
  std::vector<ag::Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t step_count_ = 0;
  AdamConfig cfg_;
};

// Tensor blob container serialized as a JSON manifest followed by a contiguous
// little-endian f32 payload in declaration order.
struct TensorBlobs {
  std::vector<std::string> names;
  std::vector<ag::Shape> shapes;
  std::vector<std::vector<double>> values;

  void add(const std::string& name, const ag::Shape& shape, const std::vector<double>& data);
};

}  // namespace csipred::nn
