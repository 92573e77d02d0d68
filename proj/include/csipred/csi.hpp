#pragma once

#include <vector>

#include "csipred/common.hpp"

namespace csipred {

enum class Band { kUplink, kDownlink };

const char* band_name(Band band);

// Complex frequency/time channel grid: n_subcarriers rows (index k) by
// n_symbols columns (index t). Also reused as a generic complex grid by the
// link-level simulator.
struct CsiMatrix {
  int n_subcarriers = 0;
  int n_symbols = 0;
  Band band = Band::kDownlink;
  std::vector<cdouble> entries;  // [k * n_symbols + t]

  CsiMatrix() = default;
  CsiMatrix(int k, int t, Band b)
      : n_subcarriers(k), n_symbols(t), band(b),
        entries(static_cast<std::size_t>(k) * static_cast<std::size_t>(t)) {}

  cdouble& at(int k, int t) { return entries[static_cast<std::size_t>(k) * n_symbols + t]; }
  const cdouble& at(int k, int t) const {
    return entries[static_cast<std::size_t>(k) * n_symbols + t];
  }

  bool same_shape(const CsiMatrix& other) const {
    return n_subcarriers == other.n_subcarriers && n_symbols == other.n_symbols;
  }

  double squared_norm() const;
  bool all_finite() const;
};

}  // namespace csipred
