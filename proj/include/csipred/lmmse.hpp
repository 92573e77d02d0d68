#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csipred/dataset.hpp"

namespace csipred::lmmse {

// Linear predictor mapping vectorized UL-CSI to vectorized DL-CSI through
// sample second-order statistics: coeff = r_cross * (r_auto + delta*I)^-1.
struct LmmseModel {
  int k_ul = 0, t_ul = 0, k_dl = 0, t_dl = 0;
  Eigen::MatrixXcd r_cross;  // (k_dl*t_dl) x (k_ul*t_ul)
  Eigen::MatrixXcd r_auto;   // (k_ul*t_ul) x (k_ul*t_ul), Hermitian PSD
  Eigen::MatrixXcd coeff;
  double ridge = 0.0;
  std::int64_t train_count = 0;
  bool mean_removed = false;
  Eigen::VectorXcd ul_mean;  // used only when mean_removed
  Eigen::VectorXcd dl_mean;

  std::int64_t ul_dim() const { return static_cast<std::int64_t>(k_ul) * t_ul; }
  std::int64_t dl_dim() const { return static_cast<std::int64_t>(k_dl) * t_dl; }
};

// Scale-invariant default: 1e-6 * trace(r_auto)/dim. Pass ridge >= 0 to
// override; ridge == 0 requires a numerically invertible sample covariance and
// otherwise throws advising a positive ridge.
inline constexpr double kAutoRidge = -1.0;

LmmseModel fit(const std::vector<data::CsiSample>& train, double ridge = kAutoRidge,
               bool subtract_mean = false);

CsiMatrix predict(const LmmseModel& model, const CsiMatrix& h_ul);

Eigen::VectorXcd vectorize(const CsiMatrix& m);
CsiMatrix unvectorize(const Eigen::VectorXcd& v, int k, int t, Band band);

// Binary blob with a JSON header {dims, delta, train_count}.
void save(const LmmseModel& model, const std::string& path);
LmmseModel load(const std::string& path);

}  // namespace csipred::lmmse
