#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csipred/dataset.hpp"

namespace csipred::link {

enum class EqualizerMode { kPerfect, kPredicted, kStaleUl, kNone };

const char* mode_name(EqualizerMode mode);
EqualizerMode mode_from_name(const std::string& name);

struct LinkSimConfig {
  std::vector<double> snr_db_grid{0.0, 5.0, 10.0, 15.0, 20.0};
  int n_frames = 100;
  double clip_gain = 10.0;  // 20 dB inversion limit at deep fades
  std::uint64_t seed = 1;
  int threads = 1;
};

// Gray-mapped unit-energy QPSK: bits (b0, b1) -> ((1-2*b0) + j*(1-2*b1))/sqrt(2).
std::vector<cdouble> qpsk_modulate(const std::vector<std::uint8_t>& bits);
std::vector<std::uint8_t> qpsk_demodulate(const std::vector<cdouble>& symbols);

struct TxFrame {
  std::vector<std::uint8_t> bits;
  CsiMatrix symbols;  // K x T QPSK grid
};

TxFrame make_frame(int n_subcarriers, int n_symbols, Rng& rng);

// X(t,k) = S(t,k)/H_est(t,k) with the inversion gain magnitude clipped at
// clip_gain, then the frame is rescaled to the unequalized frame power.
CsiMatrix pre_equalize(const CsiMatrix& symbols, const CsiMatrix& h_est, double clip_gain);

struct RxFrame {
  CsiMatrix received;
  double noise_variance = 0.0;
};

// Y = H .* X + W with per-entry complex noise variance sigma^2 chosen so the
// transmitted frame's average symbol power over sigma^2 equals snr_db. An
// infinite snr_db switches the noise off.
RxFrame transmit(const CsiMatrix& x, const CsiMatrix& h_true, double snr_db, Rng& rng);

using Predictor = std::function<CsiMatrix(const CsiMatrix& h_ul)>;

struct BerPoint {
  EqualizerMode mode = EqualizerMode::kPerfect;
  double snr_db = 0.0;
  std::int64_t bits = 0;
  std::int64_t errors = 0;
  double ber = 0.0;
};

// Runs every requested mode over the SNR grid with common random numbers: for
// a given (snr, frame) all modes share the payload bits, the true channel and
// the noise draw. The receiver applies no equalization; demodulation is a
// plain quadrant decision on Y.
std::vector<BerPoint> ber_curve(const std::vector<data::CsiSample>& test_set,
                                const Predictor& predictor, const LinkSimConfig& cfg,
                                const std::vector<EqualizerMode>& modes);

}  // namespace csipred::link
