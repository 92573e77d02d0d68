#include "csipred/channel.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

namespace csipred::chan {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void LinkConfig::validate() const {
  if (k_ul <= 0 || t_ul <= 0 || k_dl <= 0 || t_dl <= 0)
    throw ConfigError("link: grid dimensions must be positive");
  if (subcarrier_spacing_hz <= 0.0) throw ConfigError("link: subcarrier_spacing_hz must be > 0");
  if (symbol_duration_s <= 0.0) throw ConfigError("link: symbol_duration_s must be > 0");
  if (carrier_hz <= 0.0) throw ConfigError("link: carrier_hz must be > 0");
  if (band_carrier_hz(Band::kUplink) <= 0.0 || band_carrier_hz(Band::kDownlink) <= 0.0)
    throw ConfigError("link: band offsets produce a non-positive carrier");
}

TdlProfile TdlProfile::eva() {
  // 3GPP TS36.101 Annex B.2, Extended Vehicular A.
  return TdlProfile{
      "EVA",
      {{0.0, 0.0},
       {30.0, -1.5},
       {150.0, -1.4},
       {310.0, -3.6},
       {370.0, -0.6},
       {710.0, -9.1},
       {1090.0, -7.0},
       {1730.0, -12.0},
       {2510.0, -16.9}}};
}

TdlProfile TdlProfile::etu() {
  // 3GPP TS36.101 Annex B.2, Extended Typical Urban.
  return TdlProfile{
      "ETU",
      {{0.0, -1.0},
       {50.0, -1.0},
       {120.0, -1.0},
       {200.0, 0.0},
       {230.0, 0.0},
       {500.0, 0.0},
       {1600.0, -3.0},
       {2300.0, -5.0},
       {5000.0, -7.0}}};
}

TdlProfile TdlProfile::by_name(const std::string& name) {
  if (name == "EVA") return eva();
  if (name == "ETU") return etu();
  throw ConfigError("profile: unknown built-in profile '" + name + "' (expected EVA or ETU)");
}

TdlProfile TdlProfile::from_json(const nlohmann::json& doc) {
  TdlProfile profile;
  if (!doc.contains("name")) throw ConfigError("profile: missing field 'name'");
  profile.name = doc.at("name").get<std::string>();
  if (!doc.contains("taps")) throw ConfigError("profile: missing field 'taps'");
  for (const auto& tap : doc.at("taps")) {
    if (!tap.contains("delay_ns")) throw ConfigError("profile: tap missing field 'delay_ns'");
    if (!tap.contains("power_db")) throw ConfigError("profile: tap missing field 'power_db'");
    profile.taps.push_back({tap.at("delay_ns").get<double>(), tap.at("power_db").get<double>()});
  }
  profile.validate();
  return profile;
}

double TdlProfile::total_power_linear() const {
  double acc = 0.0;
  for (const Tap& tap : taps) acc += std::pow(10.0, tap.avg_power_db / 10.0);
  return acc;
}

void TdlProfile::validate() const {
  if (taps.empty()) throw ConfigError("profile '" + name + "': needs at least one tap");
  for (const Tap& tap : taps) {
    if (!std::isfinite(tap.delay_ns) || tap.delay_ns < 0.0)
      throw ConfigError("profile '" + name + "': tap delay must be finite and >= 0");
    if (!std::isfinite(tap.avg_power_db))
      throw ConfigError("profile '" + name + "': tap power must be finite");
  }
}

ChannelRealization sample_realization(const TdlProfile& profile, const LinkConfig& cfg,
                                      double speed_mps, Rng& rng) {
  profile.validate();
  cfg.validate();
  if (speed_mps < 0.0) throw ConfigError("sample_realization: speed must be >= 0");

  ChannelRealization r;
  r.ul_carrier_hz = cfg.band_carrier_hz(Band::kUplink);
  r.dl_carrier_hz = cfg.band_carrier_hz(Band::kDownlink);
  r.speed_mps = speed_mps;
  const double f_max = speed_mps / kSpeedOfLightMps * r.ul_carrier_hz;
  const double ns_to_samples = 1e-9 / cfg.delay_sample_s();

  r.paths.reserve(profile.taps.size());
  for (const TdlProfile::Tap& tap : profile.taps) {
    PathComponent path;
    path.gain = rng.complex_gaussian(std::pow(10.0, tap.avg_power_db / 10.0));
    path.delay_samples = tap.delay_ns * ns_to_samples;
    double theta = rng.uniform(0.0, kTwoPi);
    path.doppler_hz = f_max * std::cos(theta);
    if (path.delay_samples >= cfg.k_ul)
      throw ConfigError("profile '" + profile.name + "': tap delay exceeds the delay grid");
    r.paths.push_back(path);
  }
  return r;
}

cdouble frequency_response(const ChannelRealization& r, Band band, const LinkConfig& cfg,
                           double t_seconds, int k) {
  const int n_subcarriers = cfg.subcarriers(band);
  if (k < 0 || k >= n_subcarriers)
    throw RuntimeError("frequency_response: subcarrier index out of range");

  // Delay phase uses the absolute in-band frequency (k + offset/spacing)
  // subcarriers. delay_samples is in uplink-grid units, so the normalization
  // is by k_ul regardless of the evaluated band; with equal band offsets (TDD)
  // the UL and DL phases coincide.
  const double k_eff = static_cast<double>(k) + cfg.band_offset_hz(band) / cfg.subcarrier_spacing_hz;
  const double doppler_scale = r.doppler_scale(band);

  cdouble acc{0.0, 0.0};
  for (const PathComponent& path : r.paths) {
    double phase = kTwoPi * (path.doppler_hz * doppler_scale * t_seconds -
                             k_eff * path.delay_samples / cfg.k_ul);
    acc += path.gain * cdouble{std::cos(phase), std::sin(phase)};
  }
  return acc;
}

CsiMatrix csi_matrix(const ChannelRealization& r, Band band, const LinkConfig& cfg, double t0) {
  cfg.validate();
  CsiMatrix m(cfg.subcarriers(band), cfg.symbols(band), band);
  for (int k = 0; k < m.n_subcarriers; ++k)
    for (int t = 0; t < m.n_symbols; ++t)
      m.at(k, t) = frequency_response(r, band, cfg, t0 + t * cfg.symbol_duration_s, k);
  return m;
}

std::pair<CsiMatrix, CsiMatrix> ul_dl_pair(const ChannelRealization& r, const LinkConfig& cfg,
                                           double t0) {
  CsiMatrix h_ul = csi_matrix(r, Band::kUplink, cfg, t0);
  CsiMatrix h_dl = csi_matrix(r, Band::kDownlink, cfg, t0 + cfg.t_ul * cfg.symbol_duration_s);
  return {std::move(h_ul), std::move(h_dl)};
}

}  // namespace csipred::chan
