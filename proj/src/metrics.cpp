#include "csipred/metrics.hpp"

#include <cmath>
#include <numbers>

namespace csipred::metrics {

double PdpMatrix::squared_norm() const {
  double acc = 0.0;
  for (double v : p_db) acc += v * v;
  return acc;
}

double nmse_h(const CsiMatrix& truth, const CsiMatrix& estimate) {
  if (!truth.same_shape(estimate)) throw RuntimeError("nmse_h: shape mismatch");
  double denom = truth.squared_norm();
  if (denom <= 0.0) throw RuntimeError("nmse_h: reference has zero norm, metric undefined");
  double num = 0.0;
  for (std::size_t i = 0; i < truth.entries.size(); ++i)
    num += std::norm(truth.entries[i] - estimate.entries[i]);
  return num / denom;
}

DelayResponse delay_response(const CsiMatrix& h) {
  const int n_subcarriers = h.n_subcarriers;
  const int n_symbols = h.n_symbols;
  DelayResponse out;
  out.n_symbols = n_symbols;
  out.n_delay_bins = n_subcarriers;
  out.entries.assign(static_cast<std::size_t>(n_symbols) * n_subcarriers, cdouble{0.0, 0.0});

  // Twiddle table: w[m] = exp(+j*2*pi*m/K); the exponent tau*k is reduced mod K.
  std::vector<cdouble> twiddle(n_subcarriers);
  for (int m = 0; m < n_subcarriers; ++m) {
    double angle = 2.0 * std::numbers::pi * m / n_subcarriers;
    twiddle[m] = {std::cos(angle), std::sin(angle)};
  }

  const double inv_k = 1.0 / n_subcarriers;
  for (int t = 0; t < n_symbols; ++t) {
    for (int tau = 0; tau < n_subcarriers; ++tau) {
      cdouble acc{0.0, 0.0};
      std::size_t m = 0;
      for (int k = 0; k < n_subcarriers; ++k) {
        acc += h.at(k, t) * twiddle[m];
        m += tau;
        if (m >= static_cast<std::size_t>(n_subcarriers)) m -= n_subcarriers;
      }
      out.at(t, tau) = acc * inv_k;
    }
  }
  return out;
}

PdpMatrix tv_pdp(const CsiMatrix& h, double floor_db) {
  DelayResponse dr = delay_response(h);
  PdpMatrix out;
  out.n_symbols = dr.n_symbols;
  out.n_delay_bins = dr.n_delay_bins;
  out.floor_db = floor_db;
  out.p_db.resize(dr.entries.size());
  const double floor_linear = std::pow(10.0, floor_db / 10.0);
  for (std::size_t i = 0; i < dr.entries.size(); ++i) {
    double power = std::norm(dr.entries[i]);
    out.p_db[i] = 10.0 * std::log10(std::max(power, floor_linear));
  }
  return out;
}

double nmse_p(const PdpMatrix& truth, const PdpMatrix& estimate) {
  if (truth.n_symbols != estimate.n_symbols || truth.n_delay_bins != estimate.n_delay_bins)
    throw RuntimeError("nmse_p: shape mismatch");
  double denom = truth.squared_norm();
  if (denom <= 0.0) throw RuntimeError("nmse_p: reference has zero norm, metric undefined");
  double num = 0.0;
  for (std::size_t i = 0; i < truth.p_db.size(); ++i) {
    double d = truth.p_db[i] - estimate.p_db[i];
    num += d * d;
  }
  return num / denom;
}

double nmse_p_of(const CsiMatrix& truth, const CsiMatrix& estimate, double floor_db) {
  return nmse_p(tv_pdp(truth, floor_db), tv_pdp(estimate, floor_db));
}

double cp_error(double nmse_h_value, double nmse_p_value, double lambda2) {
  if (nmse_h_value < 0.0 || nmse_p_value < 0.0)
    throw RuntimeError("cp_error: inputs must be non-negative");
  return nmse_h_value + lambda2 * nmse_p_value;
}

}  // namespace csipred::metrics
