#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "csipred/lmmse.hpp"
#include "csipred/metrics.hpp"
#include "support/test_util.hpp"

using namespace csipred;
using namespace csipred::lmmse;
using csipred::testsupport::TempDir;
using csipred::testsupport::make_csi;

namespace {

CsiMatrix random_csi(int k, int t, Band band, Rng& rng) {
  return make_csi(k, t, band, [&](int, int) { return rng.complex_gaussian(1.0); });
}

// Samples with an exact linear UL->DL map d = A u.
std::vector<data::CsiSample> linear_map_samples(const Eigen::MatrixXcd& a, int k, int t, int n,
                                                Rng& rng) {
  std::vector<data::CsiSample> samples;
  samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    data::CsiSample s;
    s.h_ul = random_csi(k, t, Band::kUplink, rng);
    Eigen::VectorXcd d = a * vectorize(s.h_ul);
    s.h_dl = unvectorize(d, k, t, Band::kDownlink);
    samples.push_back(std::move(s));
  }
  return samples;
}

Eigen::MatrixXcd random_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXcd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.complex_gaussian(1.0);
  return m;
}

}  // namespace

TEST_CASE("scaled-identity channel recovers c*I") {
  Rng rng(1);
  const cdouble c{0.8, -0.6};
  std::vector<data::CsiSample> train;
  for (int i = 0; i < 200; ++i) {
    data::CsiSample s;
    s.h_ul = random_csi(4, 2, Band::kUplink, rng);
    s.h_dl = s.h_ul;
    s.h_dl.band = Band::kDownlink;
    for (cdouble& z : s.h_dl.entries) z *= c;
    train.push_back(std::move(s));
  }
  LmmseModel model = fit(train, 0.0);
  Eigen::MatrixXcd expected = c * Eigen::MatrixXcd::Identity(8, 8);
  CHECK((model.coeff - expected).norm() < 1e-6);
}

TEST_CASE("independent UL/DL drives the coefficients toward zero") {
  Rng rng(2);
  auto make = [&](int n) {
    std::vector<data::CsiSample> train;
    for (int i = 0; i < n; ++i) {
      data::CsiSample s;
      s.h_ul = random_csi(3, 2, Band::kUplink, rng);
      s.h_dl = random_csi(3, 2, Band::kDownlink, rng);
      train.push_back(std::move(s));
    }
    return train;
  };
  double small_n = fit(make(100)).coeff.norm();
  double large_n = fit(make(10000)).coeff.norm();
  CHECK(large_n < small_n);
  CHECK(large_n < 0.1);
}

TEST_CASE("hand-built correlations match the 2x2 inversion oracle") {
  // Two samples designed so the sample moments are exactly
  // r_auto = diag(2, 1) and r_cross = [[1, 1], [0, 3]].
  const double s2 = std::sqrt(2.0);
  std::vector<data::CsiSample> train(2);
  train[0].h_ul = make_csi(2, 1, Band::kUplink,
                           [](int k, int) { return cdouble(k == 0 ? 2.0 : 0.0, 0.0); });
  train[0].h_dl = make_csi(2, 1, Band::kDownlink,
                           [](int k, int) { return cdouble(k == 0 ? 1.0 : 0.0, 0.0); });
  train[1].h_ul = make_csi(2, 1, Band::kUplink,
                           [&](int k, int) { return cdouble(k == 1 ? s2 : 0.0, 0.0); });
  train[1].h_dl = make_csi(2, 1, Band::kDownlink,
                           [&](int k, int) { return cdouble(k == 0 ? s2 : 3.0 * s2, 0.0); });

  LmmseModel model = fit(train, 0.0);
  CHECK(std::abs(model.r_auto(0, 0) - cdouble(2.0, 0.0)) < 1e-12);
  CHECK(std::abs(model.r_auto(1, 1) - cdouble(1.0, 0.0)) < 1e-12);
  CHECK(std::abs(model.r_cross(0, 0) - cdouble(1.0, 0.0)) < 1e-12);
  CHECK(std::abs(model.r_cross(1, 1) - cdouble(3.0, 0.0)) < 1e-12);

  // coeff = r_cross * r_auto^{-1} = [[0.5, 1], [0, 3]].
  CHECK(std::abs(model.coeff(0, 0) - cdouble(0.5, 0.0)) < 1e-12);
  CHECK(std::abs(model.coeff(0, 1) - cdouble(1.0, 0.0)) < 1e-12);
  CHECK(std::abs(model.coeff(1, 0)) < 1e-12);
  CHECK(std::abs(model.coeff(1, 1) - cdouble(3.0, 0.0)) < 1e-12);
}

TEST_CASE("exact linear channel is recovered on held-out samples") {
  Rng rng(3);
  const int k = 4, t = 2, dim = k * t;
  Eigen::MatrixXcd a = random_matrix(dim, dim, rng);
  auto train = linear_map_samples(a, k, t, 10 * dim, rng);
  auto test = linear_map_samples(a, k, t, 25, rng);

  LmmseModel model = fit(train);
  double total = 0.0;
  for (const data::CsiSample& s : test)
    total += metrics::nmse_h(s.h_dl, predict(model, s.h_ul));
  CHECK(total / test.size() < 1e-6);
}

TEST_CASE("predict") {
  Rng rng(4);
  SUBCASE("identity coefficients reproduce the input") {
    std::vector<data::CsiSample> train;
    for (int i = 0; i < 50; ++i) {
      data::CsiSample s;
      s.h_ul = random_csi(3, 2, Band::kUplink, rng);
      s.h_dl = s.h_ul;
      s.h_dl.band = Band::kDownlink;
      train.push_back(std::move(s));
    }
    LmmseModel model = fit(train, 0.0);
    CsiMatrix probe = random_csi(3, 2, Band::kUplink, rng);
    CsiMatrix out = predict(model, probe);
    for (std::size_t i = 0; i < probe.entries.size(); ++i)
      CHECK(std::abs(out.entries[i] - probe.entries[i]) < 1e-8);
  }

  SUBCASE("zero coefficients give the unit-nmse prediction") {
    LmmseModel model;
    model.k_ul = model.k_dl = 3;
    model.t_ul = model.t_dl = 2;
    model.coeff = Eigen::MatrixXcd::Zero(6, 6);
    model.ul_mean = Eigen::VectorXcd::Zero(6);
    model.dl_mean = Eigen::VectorXcd::Zero(6);
    CsiMatrix probe = random_csi(3, 2, Band::kUplink, rng);
    CsiMatrix out = predict(model, probe);
    CsiMatrix truth = probe;
    truth.band = Band::kDownlink;
    CHECK(metrics::nmse_h(truth, out) == doctest::Approx(1.0));
  }

  SUBCASE("prediction is linear") {
    const int dim = 6;
    LmmseModel model;
    model.k_ul = model.k_dl = 3;
    model.t_ul = model.t_dl = 2;
    model.coeff = random_matrix(dim, dim, rng);
    model.ul_mean = Eigen::VectorXcd::Zero(dim);
    model.dl_mean = Eigen::VectorXcd::Zero(dim);
    CsiMatrix x = random_csi(3, 2, Band::kUplink, rng);
    CsiMatrix y = random_csi(3, 2, Band::kUplink, rng);
    const cdouble alpha{1.3, -0.2}, beta{0.4, 2.2};
    CsiMatrix mix(3, 2, Band::kUplink);
    for (std::size_t i = 0; i < mix.entries.size(); ++i)
      mix.entries[i] = alpha * x.entries[i] + beta * y.entries[i];
    CsiMatrix lhs = predict(model, mix);
    CsiMatrix px = predict(model, x), py = predict(model, y);
    for (std::size_t i = 0; i < lhs.entries.size(); ++i) {
      cdouble rhs = alpha * px.entries[i] + beta * py.entries[i];
      CHECK(std::abs(lhs.entries[i] - rhs) < 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }

  SUBCASE("shape mismatch is rejected") {
    LmmseModel model;
    model.k_ul = model.k_dl = 3;
    model.t_ul = model.t_dl = 2;
    model.coeff = Eigen::MatrixXcd::Zero(6, 6);
    model.ul_mean = Eigen::VectorXcd::Zero(6);
    model.dl_mean = Eigen::VectorXcd::Zero(6);
    CsiMatrix probe = random_csi(4, 2, Band::kUplink, rng);
    CHECK_THROWS_AS(predict(model, probe), RuntimeError);
  }
}

TEST_CASE("ridge never worsens the covariance conditioning") {
  Rng rng(5);
  std::vector<data::CsiSample> train;
  for (int i = 0; i < 30; ++i) {
    data::CsiSample s;
    s.h_ul = random_csi(3, 2, Band::kUplink, rng);
    s.h_dl = random_csi(3, 2, Band::kDownlink, rng);
    train.push_back(std::move(s));
  }
  LmmseModel model = fit(train);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(model.r_auto);
  double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  REQUIRE(lo > 0.0);
  for (double delta : {0.0, 1e-6, 1e-3, 1.0})
    CHECK((hi + delta) / (lo + delta) <= hi / lo * (1.0 + 1e-12));
}

TEST_CASE("singular covariance without ridge reports a ridge hint") {
  Rng rng(6);
  // Fewer samples than the dimension makes the sample covariance singular.
  std::vector<data::CsiSample> train;
  for (int i = 0; i < 3; ++i) {
    data::CsiSample s;
    s.h_ul = random_csi(3, 2, Band::kUplink, rng);
    s.h_dl = random_csi(3, 2, Band::kDownlink, rng);
    train.push_back(std::move(s));
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(fit(train, 0.0)),
                       doctest::Contains("ridge"), RuntimeError);
  // The scale-aware default ridge fixes the same data.
  CHECK_NOTHROW(static_cast<void>(fit(train)));
}

TEST_CASE("model persistence round trip") {
  TempDir dir("lmmse");
  Rng rng(7);
  const int k = 3, t = 2, dim = 6;
  Eigen::MatrixXcd a = random_matrix(dim, dim, rng);
  auto train = linear_map_samples(a, k, t, 10 * dim, rng);
  LmmseModel model = fit(train);
  save(model, dir.file("m.bin"));
  LmmseModel loaded = load(dir.file("m.bin"));

  CHECK(loaded.train_count == model.train_count);
  CHECK(loaded.ridge == doctest::Approx(model.ridge));
  CsiMatrix probe = random_csi(k, t, Band::kUplink, rng);
  CsiMatrix a_out = predict(model, probe);
  CsiMatrix b_out = predict(loaded, probe);
  for (std::size_t i = 0; i < a_out.entries.size(); ++i)
    CHECK(std::abs(a_out.entries[i] - b_out.entries[i]) == 0.0);
}
