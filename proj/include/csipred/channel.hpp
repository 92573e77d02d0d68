#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "csipred/csi.hpp"
#include "csipred/rng.hpp"

namespace csipred::chan {

inline constexpr double kSpeedOfLightMps = 299792458.0;

// One multipath component. delay_samples is expressed in units of one
// subcarrier-grid sample, 1/(K_ul * subcarrier_spacing) seconds. doppler_hz is
// the Doppler shift at the uplink carrier; the downlink value scales with the
// carrier ratio.
struct PathComponent {
  cdouble gain{0.0, 0.0};
  double delay_samples = 0.0;
  double doppler_hz = 0.0;
};

struct ChannelRealization {
  std::vector<PathComponent> paths;
  double ul_carrier_hz = 0.0;
  double dl_carrier_hz = 0.0;
  double speed_mps = 0.0;

  // Doppler multiplier for a band relative to the stored uplink value.
  double doppler_scale(Band band) const {
    if (band == Band::kUplink || ul_carrier_hz == 0.0) return 1.0;
    return dl_carrier_hz / ul_carrier_hz;
  }
};

// OFDM grid geometry for both bands. UL and DL dimensions are configured
// independently; the paper-default profile uses 36 subcarriers by 7 symbols on
// both. Band offsets are relative to carrier_hz; TDD is expressed by setting
// dl_band_offset_hz == ul_band_offset_hz.
struct LinkConfig {
  int k_ul = 36;
  int t_ul = 7;
  int k_dl = 36;
  int t_dl = 7;
  double subcarrier_spacing_hz = 15e3;
  double symbol_duration_s = 0.5e-3 / 7.0;  // LTE slot of 7 symbols
  double carrier_hz = 2.0e9;
  double ul_band_offset_hz = 0.0;
  double dl_band_offset_hz = 120.0 * 15e3;  // default FDD separation: 120 spacings

  int subcarriers(Band band) const { return band == Band::kUplink ? k_ul : k_dl; }
  int symbols(Band band) const { return band == Band::kUplink ? t_ul : t_dl; }
  double band_offset_hz(Band band) const {
    return band == Band::kUplink ? ul_band_offset_hz : dl_band_offset_hz;
  }
  double band_carrier_hz(Band band) const { return carrier_hz + band_offset_hz(band); }
  // Seconds per delay-grid sample: 1/(K_ul * subcarrier_spacing).
  double delay_sample_s() const { return 1.0 / (k_ul * subcarrier_spacing_hz); }
  bool is_tdd() const { return ul_band_offset_hz == dl_band_offset_hz; }

  void validate() const;  // throws ConfigError
  static LinkConfig paper_default() { return LinkConfig{}; }
};

// Tapped-delay-line power profile. Built-ins carry the 3GPP TS36.101 Annex B
// delay/power tables; arbitrary profiles load from JSON.
struct TdlProfile {
  struct Tap {
    double delay_ns = 0.0;
    double avg_power_db = 0.0;
  };
  std::string name;
  std::vector<Tap> taps;

  static TdlProfile eva();
  static TdlProfile etu();
  static TdlProfile by_name(const std::string& name);  // "EVA" | "ETU"
  // {"name": ..., "taps": [{"delay_ns": ..., "power_db": ...}, ...]}
  static TdlProfile from_json(const nlohmann::json& doc);

  double total_power_linear() const;
  void validate() const;  // throws ConfigError
};

// Draws one time-frozen realization: per tap a Rayleigh gain with the tap's
// average power and a Doppler shift f_max*cos(theta), theta uniform on
// [0, 2*pi). Delays come from the profile, converted to grid samples.
ChannelRealization sample_realization(const TdlProfile& profile, const LinkConfig& cfg,
                                      double speed_mps, Rng& rng);

// H_band(t, k) = sum_l gain_l * exp(j*2*pi*nu_l^band*t)
//                        * exp(-j*2*pi*(k + band_offset/spacing)*tau_l/K_band).
cdouble frequency_response(const ChannelRealization& r, Band band, const LinkConfig& cfg,
                           double t_seconds, int k);

// K x T grid with entry (k, i) sampled at t0 + i*symbol_duration.
CsiMatrix csi_matrix(const ChannelRealization& r, Band band, const LinkConfig& cfg, double t0);

// UL window of t_ul symbols starting at t0, then the DL window of t_dl symbols
// immediately following it.
std::pair<CsiMatrix, CsiMatrix> ul_dl_pair(const ChannelRealization& r, const LinkConfig& cfg,
                                           double t0);

}  // namespace csipred::chan
