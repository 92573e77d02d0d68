#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "csipred/channel.hpp"
#include "csipred/metrics.hpp"
#include "csipred/rng.hpp"
#include "support/test_util.hpp"

using namespace csipred;
using namespace csipred::metrics;
using csipred::testsupport::make_csi;
using csipred::testsupport::naive_delay_response;

namespace {

CsiMatrix random_csi(int k, int t, Rng& rng) {
  return make_csi(k, t, Band::kDownlink,
                  [&](int, int) { return cdouble{rng.normal(), rng.normal()}; });
}

}  // namespace

TEST_CASE("nmse_h identities") {
  Rng rng(1);
  CsiMatrix h = random_csi(6, 3, rng);
  CsiMatrix zero(6, 3, Band::kDownlink);
  CsiMatrix twice = h;
  for (cdouble& z : twice.entries) z *= 2.0;

  CHECK(nmse_h(h, h) == 0.0);
  CHECK(nmse_h(h, zero) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(nmse_h(h, twice) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(nmse_h(zero, h), RuntimeError);
  CHECK_THROWS_AS(nmse_h(h, CsiMatrix(5, 3, Band::kDownlink)), RuntimeError);
}

TEST_CASE("nmse_h invariant under simultaneous per-row/per-column phase rotation") {
  Rng rng(2);
  CsiMatrix h = random_csi(8, 5, rng);
  CsiMatrix est = random_csi(8, 5, rng);
  double base = nmse_h(h, est);

  std::vector<double> row_phase(8), col_phase(5);
  for (double& p : row_phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (double& p : col_phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  CsiMatrix h2 = h, est2 = est;
  for (int k = 0; k < 8; ++k)
    for (int t = 0; t < 5; ++t) {
      cdouble w = std::polar(1.0, row_phase[k] + col_phase[t]);
      h2.at(k, t) *= w;
      est2.at(k, t) *= w;
    }
  CHECK(nmse_h(h2, est2) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("delay response of elementary spectra") {
  SUBCASE("constant spectrum concentrates at delay zero") {
    CsiMatrix h = make_csi(8, 3, Band::kDownlink, [](int, int) { return cdouble{1.0, 0.0}; });
    DelayResponse dr = delay_response(h);
    for (int t = 0; t < 3; ++t) {
      CHECK(std::abs(dr.at(t, 0) - cdouble{1.0, 0.0}) < 1e-12);
      for (int tau = 1; tau < 8; ++tau) CHECK(std::abs(dr.at(t, tau)) < 1e-12);
    }
  }

  SUBCASE("single-sample delay lands in bin one") {
    const int k_count = 8;
    CsiMatrix h = make_csi(k_count, 2, Band::kDownlink, [&](int k, int) {
      return std::polar(1.0, -2.0 * std::numbers::pi * k / k_count);
    });
    DelayResponse dr = delay_response(h);
    for (int t = 0; t < 2; ++t) {
      CHECK(std::abs(dr.at(t, 1) - cdouble{1.0, 0.0}) < 1e-12);
      for (int tau = 0; tau < k_count; ++tau)
        if (tau != 1) CHECK(std::abs(dr.at(t, tau)) < 1e-12);
    }
  }

  SUBCASE("channel-synthesized integer tap recovers its gain") {
    chan::LinkConfig cfg;
    cfg.k_ul = cfg.k_dl = 16;
    cfg.t_ul = cfg.t_dl = 4;
    cfg.ul_band_offset_hz = 0.0;
    chan::ChannelRealization r;
    r.ul_carrier_hz = r.dl_carrier_hz = cfg.carrier_hz;
    const cdouble alpha{0.7, -0.4};
    r.paths = {{alpha, 5.0, 0.0}};
    CsiMatrix h = chan::csi_matrix(r, Band::kUplink, cfg, 0.0);
    DelayResponse dr = delay_response(h);
    for (int t = 0; t < 4; ++t)
      CHECK(std::abs(std::abs(dr.at(t, 5)) - std::abs(alpha)) < 1e-10);
  }
}

TEST_CASE("delay response matches the independent direct-sum oracle") {
  Rng rng(3);
  for (int k_count : {1, 7, 36, 64}) {
    CsiMatrix h = random_csi(k_count, 3, rng);
    DelayResponse dr = delay_response(h);
    std::vector<cdouble> oracle = naive_delay_response(h);
    double max_err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      max_err = std::max(max_err, std::abs(dr.entries[i] - oracle[i]));
      scale = std::max(scale, std::abs(oracle[i]));
    }
    CHECK(max_err <= 1e-12 * std::max(scale, 1.0));
  }
}

TEST_CASE("Parseval consistency of the 1/K convention") {
  Rng rng(4);
  CsiMatrix h = random_csi(36, 7, rng);
  DelayResponse dr = delay_response(h);
  for (int t = 0; t < 7; ++t) {
    double delay_energy = 0.0, freq_energy = 0.0;
    for (int tau = 0; tau < 36; ++tau) delay_energy += std::norm(dr.at(t, tau));
    for (int k = 0; k < 36; ++k) freq_energy += std::norm(h.at(k, t));
    CHECK(delay_energy == doctest::Approx(freq_energy / 36.0).epsilon(1e-10));
  }
}

TEST_CASE("tv_pdp flooring and scaling") {
  CsiMatrix ones = make_csi(8, 2, Band::kDownlink, [](int, int) { return cdouble{1.0, 0.0}; });
  PdpMatrix p = tv_pdp(ones);
  for (int t = 0; t < 2; ++t) {
    CHECK(p.at(t, 0) == doctest::Approx(0.0));
    for (int tau = 1; tau < 8; ++tau) CHECK(p.at(t, tau) == doctest::Approx(kDefaultPdpFloorDb));
  }

  SUBCASE("scaling by 10 adds 20 dB to unfloored entries") {
    Rng rng(5);
    CsiMatrix h = random_csi(8, 2, rng);
    CsiMatrix h10 = h;
    for (cdouble& z : h10.entries) z *= 10.0;
    PdpMatrix a = tv_pdp(h), b = tv_pdp(h10);
    for (std::size_t i = 0; i < a.p_db.size(); ++i)
      if (a.p_db[i] > kDefaultPdpFloorDb + 20.0)
        CHECK(b.p_db[i] == doctest::Approx(a.p_db[i] + 20.0).epsilon(1e-10));
  }

  SUBCASE("equal-power taps produce equal profile entries") {
    const int k_count = 8;
    CsiMatrix h = make_csi(k_count, 2, Band::kDownlink, [&](int k, int) {
      return cdouble{1.0, 0.0} + std::polar(1.0, -2.0 * std::numbers::pi * k / k_count);
    });
    PdpMatrix p = tv_pdp(h);
    for (int t = 0; t < 2; ++t) CHECK(p.at(t, 0) == doctest::Approx(p.at(t, 1)).epsilon(1e-10));
  }
}

TEST_CASE("nmse_p identities and a hand-computed case") {
  PdpMatrix p;
  p.n_symbols = 2;
  p.n_delay_bins = 2;
  p.p_db = {1.0, 2.0, 3.0, 4.0};
  PdpMatrix q = p;
  CHECK(nmse_p(p, q) == 0.0);

  PdpMatrix zero = p;
  zero.p_db = {0.0, 0.0, 0.0, 0.0};
  CHECK(nmse_p(p, zero) == doctest::Approx(1.0).epsilon(1e-15));

  // Brute-force arithmetic: ||P - P_hat||^2 = 0.25+1+1+1 = 3.25, ||P||^2 = 30.
  PdpMatrix est = p;
  est.p_db = {1.5, 1.0, 2.0, 5.0};
  CHECK(nmse_p(p, est) == doctest::Approx(3.25 / 30.0).epsilon(1e-15));

  CHECK_THROWS_AS(nmse_p(zero, p), RuntimeError);
}

TEST_CASE("cp_error composition") {
  // Published full-scale EVA reference pair recombines exactly.
  CHECK(cp_error(0.0170, 0.0063, 1.0) == doctest::Approx(0.0233).epsilon(1e-12));
  CHECK(cp_error(0.42, 0.17, 0.0) == 0.42);
  CHECK(cp_error(0.0, 0.0, 1.0) == 0.0);
  CHECK_THROWS_AS(cp_error(-0.1, 0.0, 1.0), RuntimeError);

  SUBCASE("monotone nondecreasing in each argument") {
    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
      double nh = rng.uniform(), np = rng.uniform(), l2 = rng.uniform(0.0, 2.0);
      double bump = rng.uniform(0.0, 0.5);
      CHECK(cp_error(nh + bump, np, l2) >= cp_error(nh, np, l2));
      CHECK(cp_error(nh, np + bump, l2) >= cp_error(nh, np, l2));
    }
  }
}
