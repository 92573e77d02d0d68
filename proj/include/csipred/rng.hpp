#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace csipred {

// Substream labels used when deriving independent seeds from one master seed.
enum class RngStream : std::uint64_t {
  kSample = 1,
  kGeneratorInit = 2,
  kDiscriminatorInit = 3,
  kShuffle = 4,
  kLinkSim = 5,
  kMisc = 6,
};

std::uint64_t derive_seed(std::uint64_t master, RngStream stream, std::uint64_t index);

// mt19937_64 with explicit bit-to-float conversions so sampled values do not
// depend on the standard library's distribution implementations. Sequences are
// reproducible bit-for-bit across platforms for a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Integer in [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal (Box-Muller).
  double normal();
  // Circularly symmetric complex Gaussian with E|z|^2 = variance.
  std::complex<double> complex_gaussian(double variance);

 private:
  std::mt19937_64 engine_;
};

template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace csipred
