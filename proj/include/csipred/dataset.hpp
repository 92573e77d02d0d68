#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "csipred/channel.hpp"
#include "csipred/csi.hpp"
#include "csipred/tensor.hpp"

namespace csipred::data {

struct SampleMeta {
  double speed_mps = 0.0;
  std::string profile_name;
  std::uint64_t seed_index = 0;
};

// One paired uplink/downlink observation.
struct CsiSample {
  CsiMatrix h_ul;
  CsiMatrix h_dl;
  SampleMeta meta;
};

// Global linear-normalization range over the training split's real and
// imaginary parts (UL and DL jointly).
struct NormalizationStats {
  double lo = 0.0;
  double hi = 0.0;
  bool degenerate() const { return !(lo < hi); }
};

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr char kDatasetMagic[4] = {'C', 'S', 'I', 'D'};

struct DatasetHeader {
  std::uint32_t version = kDatasetVersion;
  std::uint32_t k_ul = 0, t_ul = 0, k_dl = 0, t_dl = 0;
  std::uint64_t n_samples = 0;
  std::uint64_t master_seed = 0;
};

struct CsiDataset {
  DatasetHeader header;
  std::vector<CsiSample> samples;
};

// Weighted mixture of tap profiles; a single profile is a one-entry mix.
struct ProfileMix {
  struct Entry {
    chan::TdlProfile profile;
    double weight = 1.0;
  };
  std::vector<Entry> entries;

  static ProfileMix single(chan::TdlProfile profile);
  const chan::TdlProfile& pick(Rng& rng) const;
  std::string label() const;
  void validate() const;
};

// Samples are decorrelated by drawing each window's time origin uniformly
// over this many seconds.
inline constexpr double kTimeOriginWindowS = 1.0;

// Draws the i-th sample of a generation run. Per-sample RNG is derived from
// (master_seed, index), so any subset regenerates identically.
CsiSample generate_sample(const chan::LinkConfig& cfg, const ProfileMix& profiles,
                          double speed_mps, std::uint64_t master_seed, std::uint64_t index);

// Streams n samples to a dataset file. Deterministic: same inputs produce a
// byte-identical file. index_offset shifts the per-sample seed indices so one
// generation run can be materialized directly as contiguous split files.
DatasetHeader generate(const chan::LinkConfig& cfg, const ProfileMix& profiles, double speed_mps,
                       std::uint64_t n, std::uint64_t master_seed, const std::string& path,
                       int threads = 1, std::uint64_t index_offset = 0);

void save(const CsiDataset& dataset, const std::string& path);
CsiDataset load(const std::string& path);

// Contiguous train/val/test counts in generation order; throws when the
// rounded counts exceed n.
struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};
SplitCounts split_counts(std::size_t n, const std::array<double, 3>& ratios);
std::array<CsiDataset, 3> split(const CsiDataset& dataset, const std::array<double, 3>& ratios);

// Fit on the training split only.
NormalizationStats fit_normalizer(const std::vector<CsiSample>& train);
// Streaming variant over a dataset file; equals fit_normalizer(load(path)).
NormalizationStats fit_normalizer_file(const std::string& path);

double normalize_value(double x, const NormalizationStats& stats);
double denormalize_value(double y, const NormalizationStats& stats);

// Channel 0 = real part, channel 1 = imaginary part; [2, K, T].
ag::Tensor to_two_channel(const CsiMatrix& m);
CsiMatrix from_two_channel(const ag::Tensor& t, Band band);

// to_two_channel followed by the affine map onto [-1, 1]. Values outside the
// fitted range (validation/test) are not clipped.
ag::Tensor normalize(const CsiMatrix& m, const NormalizationStats& stats);
CsiMatrix denormalize(const ag::Tensor& t, const NormalizationStats& stats, Band band);

}  // namespace csipred::data
