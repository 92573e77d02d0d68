#include "csipred/csi.hpp"

#include <cmath>

namespace csipred {

const char* band_name(Band band) {
  return band == Band::kUplink ? "ul" : "dl";
}

double CsiMatrix::squared_norm() const {
  double acc = 0.0;
  for (const cdouble& z : entries) acc += std::norm(z);
  return acc;
}

bool CsiMatrix::all_finite() const {
  for (const cdouble& z : entries) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

}  // namespace csipred
