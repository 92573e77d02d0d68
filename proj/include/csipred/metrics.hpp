#pragma once

#include <vector>

#include "csipred/csi.hpp"

namespace csipred::metrics {

// Power floor applied before the logarithm in tv_pdp; |h|^2 below
// 10^(floor_db/10) is clamped so the dB profile stays finite.
inline constexpr double kDefaultPdpFloorDb = -120.0;

// Delay-domain response h(t, tau), one row per OFDM symbol.
struct DelayResponse {
  int n_symbols = 0;
  int n_delay_bins = 0;
  std::vector<cdouble> entries;  // [t * n_delay_bins + tau]

  cdouble& at(int t, int tau) { return entries[static_cast<std::size_t>(t) * n_delay_bins + tau]; }
  const cdouble& at(int t, int tau) const {
    return entries[static_cast<std::size_t>(t) * n_delay_bins + tau];
  }
};

// Time-varying power delay profile in dB.
struct PdpMatrix {
  int n_symbols = 0;
  int n_delay_bins = 0;
  double floor_db = kDefaultPdpFloorDb;
  std::vector<double> p_db;  // [t * n_delay_bins + tau]

  double& at(int t, int tau) { return p_db[static_cast<std::size_t>(t) * n_delay_bins + tau]; }
  double at(int t, int tau) const { return p_db[static_cast<std::size_t>(t) * n_delay_bins + tau]; }

  double squared_norm() const;
};

// ||truth - estimate||_F^2 / ||truth||_F^2 for a single pair.
double nmse_h(const CsiMatrix& truth, const CsiMatrix& estimate);

// h(t, tau) = (1/K) * sum_k H(t, k) * exp(+j*2*pi*tau*k/K), tau = 0..K-1.
DelayResponse delay_response(const CsiMatrix& h);

// P(t, tau) = 10*log10(|h(t, tau)|^2), floored.
PdpMatrix tv_pdp(const CsiMatrix& h, double floor_db = kDefaultPdpFloorDb);

// ||truth - estimate||_F^2 / ||truth||_F^2 on the dB profiles.
double nmse_p(const PdpMatrix& truth, const PdpMatrix& estimate);

// Convenience: TV-PDP NMSE straight from the CSI matrices.
double nmse_p_of(const CsiMatrix& truth, const CsiMatrix& estimate,
                 double floor_db = kDefaultPdpFloorDb);

// Model-selection indicator: nmse_h + lambda2 * nmse_p.
double cp_error(double nmse_h_value, double nmse_p_value, double lambda2);

}  // namespace csipred::metrics
