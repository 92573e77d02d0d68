#include "csipred/linklevel.hpp"

#include <cmath>
#include <thread>

namespace csipred::link {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
}

const char* mode_name(EqualizerMode mode) {
  switch (mode) {
    case EqualizerMode::kPerfect: return "perfect";
    case EqualizerMode::kPredicted: return "predicted";
    case EqualizerMode::kStaleUl: return "stale_ul";
    case EqualizerMode::kNone: return "none";
  }
  return "?";
}

EqualizerMode mode_from_name(const std::string& name) {
  if (name == "perfect") return EqualizerMode::kPerfect;
  if (name == "predicted") return EqualizerMode::kPredicted;
  if (name == "stale_ul") return EqualizerMode::kStaleUl;
  if (name == "none") return EqualizerMode::kNone;
  throw ConfigError("ber: unknown equalizer mode '" + name + "'");
}

std::vector<cdouble> qpsk_modulate(const std::vector<std::uint8_t>& bits) {
  if (bits.size() % 2 != 0) throw RuntimeError("qpsk_modulate: bit count must be even");
  std::vector<cdouble> symbols(bits.size() / 2);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    double re = bits[2 * i] ? -kInvSqrt2 : kInvSqrt2;
    double im = bits[2 * i + 1] ? -kInvSqrt2 : kInvSqrt2;
    symbols[i] = {re, im};
  }
  return symbols;
}

std::vector<std::uint8_t> qpsk_demodulate(const std::vector<cdouble>& symbols) {
  std::vector<std::uint8_t> bits(2 * symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    bits[2 * i] = symbols[i].real() < 0.0 ? 1 : 0;
    bits[2 * i + 1] = symbols[i].imag() < 0.0 ? 1 : 0;
  }
  return bits;
}

TxFrame make_frame(int n_subcarriers, int n_symbols, Rng& rng) {
  TxFrame frame;
  const std::size_t n_bits = 2 * static_cast<std::size_t>(n_subcarriers) * n_symbols;
  frame.bits.resize(n_bits);
  for (std::size_t i = 0; i < n_bits; ++i) frame.bits[i] = rng.next_u64() & 1u;
  std::vector<cdouble> symbols = qpsk_modulate(frame.bits);
  frame.symbols = CsiMatrix(n_subcarriers, n_symbols, Band::kDownlink);
  frame.symbols.entries = std::move(symbols);
  return frame;
}

CsiMatrix pre_equalize(const CsiMatrix& symbols, const CsiMatrix& h_est, double clip_gain) {
  if (!symbols.same_shape(h_est)) throw RuntimeError("pre_equalize: shape mismatch");
  if (!(clip_gain > 0.0)) throw ConfigError("pre_equalize: clip_gain must be positive");

  CsiMatrix x = symbols;
  double power_before = 0.0;
  double power_after = 0.0;
  for (std::size_t i = 0; i < x.entries.size(); ++i) {
    power_before += std::norm(symbols.entries[i]);
    cdouble h = h_est.entries[i];
    double mag = std::abs(h);
    cdouble gain;
    if (mag == 0.0) {
      gain = {clip_gain, 0.0};
    } else {
      gain = 1.0 / h;
      double gain_mag = 1.0 / mag;
      if (gain_mag > clip_gain) gain *= clip_gain / gain_mag;
    }
    x.entries[i] = symbols.entries[i] * gain;
    power_after += std::norm(x.entries[i]);
  }
  if (power_after > 0.0 && power_before > 0.0) {
    double s = std::sqrt(power_before / power_after);
    for (cdouble& z : x.entries) z *= s;
  }
  return x;
}

RxFrame transmit(const CsiMatrix& x, const CsiMatrix& h_true, double snr_db, Rng& rng) {
  if (!x.same_shape(h_true)) throw RuntimeError("transmit: shape mismatch");
  RxFrame rx;
  rx.received = CsiMatrix(x.n_subcarriers, x.n_symbols, x.band);

  double signal_power = 0.0;
  for (const cdouble& z : x.entries) signal_power += std::norm(z);
  signal_power /= static_cast<double>(x.entries.size());

  double sigma2 = 0.0;
  if (!std::isinf(snr_db)) sigma2 = signal_power / std::pow(10.0, snr_db / 10.0);
  rx.noise_variance = sigma2;

  for (std::size_t i = 0; i < x.entries.size(); ++i) {
    cdouble noise = sigma2 > 0.0 ? rng.complex_gaussian(sigma2) : cdouble{0.0, 0.0};
    rx.received.entries[i] = h_true.entries[i] * x.entries[i] + noise;
  }
  return rx;
}

namespace {

struct FrameCounts {
  std::int64_t bits = 0;
  std::int64_t errors = 0;
};

// One frame under one SNR for all modes, with shared bits/channel/noise.
void simulate_frame(const data::CsiSample& sample, const Predictor& predictor,
                    const LinkSimConfig& cfg, double snr_db,
                    const std::vector<EqualizerMode>& modes, std::uint64_t frame_seed,
                    const CsiMatrix* predicted_cache, std::vector<FrameCounts>& counts) {
  const CsiMatrix& h_true = sample.h_dl;
  Rng rng(frame_seed);
  TxFrame tx = make_frame(h_true.n_subcarriers, h_true.n_symbols, rng);

  // Unit-variance noise grid shared by every mode; pre-equalization keeps the
  // frame power equal to the payload power, so sigma is mode-independent.
  std::vector<cdouble> noise_unit(h_true.entries.size());
  for (cdouble& z : noise_unit) z = rng.complex_gaussian(1.0);

  double payload_power = 0.0;
  for (const cdouble& z : tx.symbols.entries) payload_power += std::norm(z);
  payload_power /= static_cast<double>(tx.symbols.entries.size());
  const double sigma =
      std::isinf(snr_db) ? 0.0 : std::sqrt(payload_power / std::pow(10.0, snr_db / 10.0));

  for (std::size_t mi = 0; mi < modes.size(); ++mi) {
    CsiMatrix h_est;
    switch (modes[mi]) {
      case EqualizerMode::kPerfect: h_est = h_true; break;
      case EqualizerMode::kPredicted:
        h_est = predicted_cache ? *predicted_cache : predictor(sample.h_ul);
        break;
      case EqualizerMode::kStaleUl:
        if (!sample.h_ul.same_shape(h_true))
          throw RuntimeError("ber: stale_ul mode needs matching UL/DL grid dimensions");
        h_est = sample.h_ul;
        break;
      case EqualizerMode::kNone: {
        h_est = CsiMatrix(h_true.n_subcarriers, h_true.n_symbols, h_true.band);
        for (cdouble& z : h_est.entries) z = {1.0, 0.0};
        break;
      }
    }
    CsiMatrix x = pre_equalize(tx.symbols, h_est, cfg.clip_gain);
    CsiMatrix y(h_true.n_subcarriers, h_true.n_symbols, h_true.band);
    for (std::size_t i = 0; i < y.entries.size(); ++i)
      y.entries[i] = h_true.entries[i] * x.entries[i] + sigma * noise_unit[i];
    std::vector<std::uint8_t> decided = qpsk_demodulate(y.entries);
    std::int64_t errors = 0;
    for (std::size_t i = 0; i < decided.size(); ++i)
      if (decided[i] != tx.bits[i]) ++errors;
    counts[mi].bits += static_cast<std::int64_t>(decided.size());
    counts[mi].errors += errors;
  }
}

}  // namespace

std::vector<BerPoint> ber_curve(const std::vector<data::CsiSample>& test_set,
                                const Predictor& predictor, const LinkSimConfig& cfg,
                                const std::vector<EqualizerMode>& modes) {
  if (test_set.empty()) throw ConfigError("ber: empty test set");
  if (cfg.n_frames < 1) throw ConfigError("ber: n_frames must be >= 1");
  if (modes.empty()) throw ConfigError("ber: no equalizer modes requested");

  bool wants_predicted = false;
  for (EqualizerMode m : modes)
    if (m == EqualizerMode::kPredicted) wants_predicted = true;
  if (wants_predicted && !predictor) throw ConfigError("ber: predicted mode needs a predictor");

  // Predictions depend only on the sample, not the SNR point; cache them.
  std::vector<CsiMatrix> predicted;
  if (wants_predicted) {
    const std::size_t used = std::min<std::size_t>(test_set.size(), cfg.n_frames);
    predicted.resize(used);
    for (std::size_t i = 0; i < used; ++i) predicted[i] = predictor(test_set[i].h_ul);
  }

  std::vector<BerPoint> out;
  for (std::size_t si = 0; si < cfg.snr_db_grid.size(); ++si) {
    const double snr_db = cfg.snr_db_grid[si];
    const int worker_count = std::max(1, cfg.threads);
    std::vector<std::vector<FrameCounts>> partials(
        worker_count, std::vector<FrameCounts>(modes.size()));

    auto run_range = [&](int worker, int lo, int hi) {
      for (int f = lo; f < hi; ++f) {
        const std::size_t sample_idx = static_cast<std::size_t>(f) % test_set.size();
        std::uint64_t frame_seed = derive_seed(
            cfg.seed, RngStream::kLinkSim,
            (static_cast<std::uint64_t>(si) << 32) | static_cast<std::uint64_t>(f));
        const CsiMatrix* cache =
            sample_idx < predicted.size() ? &predicted[sample_idx] : nullptr;
        simulate_frame(test_set[sample_idx], predictor, cfg, snr_db, modes, frame_seed, cache,
                       partials[static_cast<std::size_t>(worker)]);
      }
    };

    if (worker_count == 1) {
      run_range(0, 0, cfg.n_frames);
    } else {
      std::vector<std::thread> workers;
      int per = (cfg.n_frames + worker_count - 1) / worker_count;
      for (int w = 0; w < worker_count; ++w) {
        int lo = w * per, hi = std::min(cfg.n_frames, lo + per);
        if (lo >= hi) break;
        workers.emplace_back(run_range, w, lo, hi);
      }
      for (auto& w : workers) w.join();
    }

    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
      BerPoint point;
      point.mode = modes[mi];
      point.snr_db = snr_db;
      for (int w = 0; w < worker_count; ++w) {
        point.bits += partials[static_cast<std::size_t>(w)][mi].bits;
        point.errors += partials[static_cast<std::size_t>(w)][mi].errors;
      }
      point.ber = point.bits > 0 ? static_cast<double>(point.errors) / point.bits : 0.0;
      out.push_back(point);
    }
  }
  return out;
}

}  // namespace csipred::link
