#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "csipred/csi.hpp"
#include "csipred/dataset.hpp"

namespace csipred::testsupport {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("csipred_" + tag + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

inline CsiMatrix make_csi(int k, int t, Band band,
                          const std::function<cdouble(int, int)>& fn) {
  CsiMatrix m(k, t, band);
  for (int ki = 0; ki < k; ++ki)
    for (int ti = 0; ti < t; ++ti) m.at(ki, ti) = fn(ki, ti);
  return m;
}

// Independent delay-domain oracle: direct per-term evaluation through
// std::polar, no shared twiddle table with the implementation.
inline std::vector<cdouble> naive_delay_response(const CsiMatrix& h) {
  const int k_count = h.n_subcarriers;
  const int t_count = h.n_symbols;
  std::vector<cdouble> out(static_cast<std::size_t>(t_count) * k_count);
  for (int t = 0; t < t_count; ++t)
    for (int tau = 0; tau < k_count; ++tau) {
      cdouble acc{0.0, 0.0};
      for (int k = 0; k < k_count; ++k) {
        double angle = 2.0 * std::numbers::pi * static_cast<double>(tau) *
                       static_cast<double>(k) / static_cast<double>(k_count);
        acc += h.at(k, t) * std::polar(1.0, angle);
      }
      out[static_cast<std::size_t>(t) * k_count + tau] = acc / static_cast<double>(k_count);
    }
  return out;
}

// Gaussian tail probability Q(x) via the complementary error function.
inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline data::CsiSample make_sample(const CsiMatrix& ul, const CsiMatrix& dl) {
  data::CsiSample s;
  s.h_ul = ul;
  s.h_dl = dl;
  return s;
}

}  // namespace csipred::testsupport
