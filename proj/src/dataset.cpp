#include "csipred/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <limits>
#include <thread>

namespace csipred::data {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

float read_f32(std::istream& is) {
  std::uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

// Record layout: interleaved (re, im) f32 with k fastest, symbol-major; the
// UL block precedes the DL block.
void write_matrix(std::ostream& os, const CsiMatrix& m) {
  for (int t = 0; t < m.n_symbols; ++t)
    for (int k = 0; k < m.n_subcarriers; ++k) {
      const cdouble& z = m.at(k, t);
      write_f32(os, static_cast<float>(z.real()));
      write_f32(os, static_cast<float>(z.imag()));
    }
}

void read_matrix(std::istream& is, CsiMatrix& m) {
  for (int t = 0; t < m.n_symbols; ++t)
    for (int k = 0; k < m.n_subcarriers; ++k) {
      double re = read_f32(is);
      double im = read_f32(is);
      m.at(k, t) = {re, im};
    }
}

void write_header(std::ostream& os, const DatasetHeader& h) {
  os.write(kDatasetMagic, 4);
  write_u32(os, h.version);
  write_u32(os, h.k_ul);
  write_u32(os, h.t_ul);
  write_u32(os, h.k_dl);
  write_u32(os, h.t_dl);
  write_u64(os, h.n_samples);
  write_u64(os, h.master_seed);
}

DatasetHeader read_header(std::istream& is, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kDatasetMagic, 4) != 0)
    throw RuntimeError("dataset '" + path + "': bad magic");
  DatasetHeader h;
  h.version = read_u32(is);
  if (h.version != kDatasetVersion)
    throw RuntimeError("dataset '" + path + "': unsupported version");
  h.k_ul = read_u32(is);
  h.t_ul = read_u32(is);
  h.k_dl = read_u32(is);
  h.t_dl = read_u32(is);
  h.n_samples = read_u64(is);
  h.master_seed = read_u64(is);
  if (h.k_ul == 0 || h.t_ul == 0 || h.k_dl == 0 || h.t_dl == 0)
    throw RuntimeError("dataset '" + path + "': zero grid dimension in header");
  return h;
}

}  // namespace

ProfileMix ProfileMix::single(chan::TdlProfile profile) {
  ProfileMix mix;
  mix.entries.push_back({std::move(profile), 1.0});
  return mix;
}

void ProfileMix::validate() const {
  if (entries.empty()) throw ConfigError("profile mix: needs at least one profile");
  double total = 0.0;
  for (const Entry& e : entries) {
    e.profile.validate();
    if (!(e.weight > 0.0)) throw ConfigError("profile mix: weights must be positive");
    total += e.weight;
  }
  if (!(total > 0.0)) throw ConfigError("profile mix: total weight must be positive");
}

const chan::TdlProfile& ProfileMix::pick(Rng& rng) const {
  if (entries.size() == 1) return entries.front().profile;
  double total = 0.0;
  for (const Entry& e : entries) total += e.weight;
  double x = rng.uniform(0.0, total);
  for (const Entry& e : entries) {
    if (x < e.weight) return e.profile;
    x -= e.weight;
  }
  return entries.back().profile;
}

std::string ProfileMix::label() const {
  if (entries.size() == 1) return entries.front().profile.name;
  std::string s = "mix(";
  for (std::size_t i = 0; i < entries.size(); ++i)
    s += (i ? "+" : "") + entries[i].profile.name;
  return s + ")";
}

CsiSample generate_sample(const chan::LinkConfig& cfg, const ProfileMix& profiles,
                          double speed_mps, std::uint64_t master_seed, std::uint64_t index) {
  Rng rng(derive_seed(master_seed, RngStream::kSample, index));
  const chan::TdlProfile& profile = profiles.pick(rng);
  chan::ChannelRealization r = chan::sample_realization(profile, cfg, speed_mps, rng);
  double t0 = rng.uniform(0.0, kTimeOriginWindowS);
  auto [h_ul, h_dl] = chan::ul_dl_pair(r, cfg, t0);
  CsiSample sample;
  sample.h_ul = std::move(h_ul);
  sample.h_dl = std::move(h_dl);
  sample.meta = {speed_mps, profile.name, index};
  return sample;
}

DatasetHeader generate(const chan::LinkConfig& cfg, const ProfileMix& profiles, double speed_mps,
                       std::uint64_t n, std::uint64_t master_seed, const std::string& path,
                       int threads, std::uint64_t index_offset) {
  if (n == 0) throw ConfigError("generate: sample count must be positive");
  cfg.validate();
  profiles.validate();

  DatasetHeader header;
  header.k_ul = static_cast<std::uint32_t>(cfg.k_ul);
  header.t_ul = static_cast<std::uint32_t>(cfg.t_ul);
  header.k_dl = static_cast<std::uint32_t>(cfg.k_dl);
  header.t_dl = static_cast<std::uint32_t>(cfg.t_dl);
  header.n_samples = n;
  header.master_seed = master_seed;

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw RuntimeError("generate: cannot open '" + path + "' for writing");
  write_header(os, header);

  const int worker_count = std::max(1, threads);
  const std::uint64_t chunk = 256;
  std::vector<CsiSample> buffer;
  for (std::uint64_t base = 0; base < n; base += chunk) {
    const std::uint64_t count = std::min(chunk, n - base);
    buffer.assign(count, CsiSample{});
    if (worker_count == 1 || count < 2) {
      for (std::uint64_t i = 0; i < count; ++i)
        buffer[i] = generate_sample(cfg, profiles, speed_mps, master_seed, index_offset + base + i);
    } else {
      std::vector<std::thread> workers;
      std::uint64_t per = (count + worker_count - 1) / worker_count;
      for (int w = 0; w < worker_count; ++w) {
        std::uint64_t lo = w * per, hi = std::min(count, lo + per);
        if (lo >= hi) break;
        workers.emplace_back([&, lo, hi] {
          for (std::uint64_t i = lo; i < hi; ++i)
            buffer[i] = generate_sample(cfg, profiles, speed_mps, master_seed, index_offset + base + i);
        });
      }
      for (auto& w : workers) w.join();
    }
    for (const CsiSample& s : buffer) {
      write_matrix(os, s.h_ul);
      write_matrix(os, s.h_dl);
    }
  }
  if (!os) throw RuntimeError("generate: write failure on '" + path + "'");
  return header;
}

void save(const CsiDataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw RuntimeError("save: cannot open '" + path + "' for writing");
  DatasetHeader header = dataset.header;
  header.n_samples = dataset.samples.size();
  write_header(os, header);
  for (const CsiSample& s : dataset.samples) {
    write_matrix(os, s.h_ul);
    write_matrix(os, s.h_dl);
  }
  if (!os) throw RuntimeError("save: write failure on '" + path + "'");
}

CsiDataset load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeError("load: cannot open '" + path + "'");
  CsiDataset dataset;
  dataset.header = read_header(is, path);
  dataset.samples.reserve(dataset.header.n_samples);
  for (std::uint64_t i = 0; i < dataset.header.n_samples; ++i) {
    CsiSample s;
    s.h_ul = CsiMatrix(static_cast<int>(dataset.header.k_ul), static_cast<int>(dataset.header.t_ul),
                       Band::kUplink);
    s.h_dl = CsiMatrix(static_cast<int>(dataset.header.k_dl), static_cast<int>(dataset.header.t_dl),
                       Band::kDownlink);
    read_matrix(is, s.h_ul);
    read_matrix(is, s.h_dl);
    s.meta.seed_index = i;
    dataset.samples.push_back(std::move(s));
  }
  if (!is) throw RuntimeError("load: truncated dataset '" + path + "'");
  return dataset;
}

SplitCounts split_counts(std::size_t n, const std::array<double, 3>& ratios) {
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split: ratios must be non-negative");
    total += r;
  }
  if (total > 1.0 + 1e-12) throw ConfigError("split: ratios must sum to at most 1");
  SplitCounts c;
  c.train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  c.val = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  c.test = static_cast<std::size_t>(std::llround(ratios[2] * static_cast<double>(n)));
  if (c.train + c.val + c.test > n)
    throw ConfigError("split: rounded counts exceed the dataset size");
  return c;
}

std::array<CsiDataset, 3> split(const CsiDataset& dataset, const std::array<double, 3>& ratios) {
  SplitCounts counts = split_counts(dataset.samples.size(), ratios);
  std::array<CsiDataset, 3> out;
  std::array<std::pair<std::size_t, std::size_t>, 3> ranges = {
      std::pair<std::size_t, std::size_t>{0, counts.train},
      {counts.train, counts.train + counts.val},
      {counts.train + counts.val, counts.train + counts.val + counts.test}};
  for (int i = 0; i < 3; ++i) {
    out[i].header = dataset.header;
    out[i].header.n_samples = ranges[i].second - ranges[i].first;
    out[i].samples.assign(dataset.samples.begin() + ranges[i].first,
                          dataset.samples.begin() + ranges[i].second);
  }
  return out;
}

NormalizationStats fit_normalizer(const std::vector<CsiSample>& train) {
  if (train.empty()) throw ConfigError("fit_normalizer: empty training split");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  auto scan = [&](const CsiMatrix& m) {
    for (const cdouble& z : m.entries) {
      lo = std::min({lo, z.real(), z.imag()});
      hi = std::max({hi, z.real(), z.imag()});
    }
  };
  for (const CsiSample& s : train) {
    scan(s.h_ul);
    scan(s.h_dl);
  }
  return {lo, hi};
}

NormalizationStats fit_normalizer_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeError("fit_normalizer_file: cannot open '" + path + "'");
  DatasetHeader h = read_header(is, path);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const std::uint64_t floats_per_sample =
      2ull * (static_cast<std::uint64_t>(h.k_ul) * h.t_ul + static_cast<std::uint64_t>(h.k_dl) * h.t_dl);
  for (std::uint64_t i = 0; i < h.n_samples * floats_per_sample; ++i) {
    double v = read_f32(is);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!is) throw RuntimeError("fit_normalizer_file: truncated dataset '" + path + "'");
  if (h.n_samples == 0) throw ConfigError("fit_normalizer_file: empty dataset");
  return {lo, hi};
}

double normalize_value(double x, const NormalizationStats& stats) {
  if (stats.degenerate()) return 0.0;
  return 2.0 * (x - stats.lo) / (stats.hi - stats.lo) - 1.0;
}

double denormalize_value(double y, const NormalizationStats& stats) {
  if (stats.degenerate()) return stats.lo;
  return stats.lo + (y + 1.0) * 0.5 * (stats.hi - stats.lo);
}

ag::Tensor to_two_channel(const CsiMatrix& m) {
  const std::size_t plane = m.entries.size();
  std::vector<double> values(2 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    values[i] = m.entries[i].real();
    values[plane + i] = m.entries[i].imag();
  }
  return ag::Tensor::from_values({2, m.n_subcarriers, m.n_symbols}, std::move(values));
}

CsiMatrix from_two_channel(const ag::Tensor& t, Band band) {
  if (t.shape().size() != 3 || t.dim(0) != 2)
    throw RuntimeError("from_two_channel: expected shape [2,K,T]");
  CsiMatrix m(t.dim(1), t.dim(2), band);
  const auto& v = t.values();
  const std::size_t plane = m.entries.size();
  for (std::size_t i = 0; i < plane; ++i) m.entries[i] = {v[i], v[plane + i]};
  return m;
}

ag::Tensor normalize(const CsiMatrix& m, const NormalizationStats& stats) {
  ag::Tensor t = to_two_channel(m);
  for (double& v : t.values()) v = normalize_value(v, stats);
  return t;
}

CsiMatrix denormalize(const ag::Tensor& t, const NormalizationStats& stats, Band band) {
  if (t.shape().size() != 3 || t.dim(0) != 2)
    throw RuntimeError("denormalize: expected shape [2,K,T]");
  CsiMatrix m(t.dim(1), t.dim(2), band);
  const auto& v = t.values();
  const std::size_t plane = m.entries.size();
  for (std::size_t i = 0; i < plane; ++i)
    m.entries[i] = {denormalize_value(v[i], stats), denormalize_value(v[plane + i], stats)};
  return m;
}

}  // namespace csipred::data
