#include "csipred/lmmse.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace csipred::lmmse {

Eigen::VectorXcd vectorize(const CsiMatrix& m) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(m.entries.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = m.entries[static_cast<std::size_t>(i)];
  return v;
}

CsiMatrix unvectorize(const Eigen::VectorXcd& v, int k, int t, Band band) {
  if (v.size() != static_cast<Eigen::Index>(k) * t)
    throw RuntimeError("unvectorize: size mismatch");
  CsiMatrix m(k, t, band);
  for (Eigen::Index i = 0; i < v.size(); ++i) m.entries[static_cast<std::size_t>(i)] = v[i];
  return m;
}

LmmseModel fit(const std::vector<data::CsiSample>& train, double ridge, bool subtract_mean) {
  if (train.empty()) throw ConfigError("lmmse: fit needs at least one training sample");

  LmmseModel model;
  model.k_ul = train.front().h_ul.n_subcarriers;
  model.t_ul = train.front().h_ul.n_symbols;
  model.k_dl = train.front().h_dl.n_subcarriers;
  model.t_dl = train.front().h_dl.n_symbols;
  model.train_count = static_cast<std::int64_t>(train.size());
  model.mean_removed = subtract_mean;

  const Eigen::Index ul_dim = model.ul_dim();
  const Eigen::Index dl_dim = model.dl_dim();
  const Eigen::Index n = static_cast<Eigen::Index>(train.size());

  model.ul_mean = Eigen::VectorXcd::Zero(ul_dim);
  model.dl_mean = Eigen::VectorXcd::Zero(dl_dim);
  if (subtract_mean) {
    for (const data::CsiSample& s : train) {
      model.ul_mean += vectorize(s.h_ul);
      model.dl_mean += vectorize(s.h_dl);
    }
    model.ul_mean /= static_cast<double>(n);
    model.dl_mean /= static_cast<double>(n);
  }

  // Accumulate in GEMM-sized blocks; sample order is fixed so the result is
  // deterministic.
  model.r_auto = Eigen::MatrixXcd::Zero(ul_dim, ul_dim);
  model.r_cross = Eigen::MatrixXcd::Zero(dl_dim, ul_dim);
  const Eigen::Index block = 512;
  for (Eigen::Index base = 0; base < n; base += block) {
    const Eigen::Index count = std::min(block, n - base);
    Eigen::MatrixXcd u(ul_dim, count), d(dl_dim, count);
    for (Eigen::Index j = 0; j < count; ++j) {
      u.col(j) = vectorize(train[static_cast<std::size_t>(base + j)].h_ul) - model.ul_mean;
      d.col(j) = vectorize(train[static_cast<std::size_t>(base + j)].h_dl) - model.dl_mean;
    }
    model.r_auto.noalias() += u * u.adjoint();
    model.r_cross.noalias() += d * u.adjoint();
  }
  model.r_auto /= static_cast<double>(n);
  model.r_cross /= static_cast<double>(n);
  // Symmetrize away accumulation round-off.
  model.r_auto = 0.5 * (model.r_auto + model.r_auto.adjoint()).eval();

  if (ridge < 0.0) ridge = 1e-6 * model.r_auto.real().trace() / static_cast<double>(ul_dim);
  model.ridge = ridge;

  Eigen::MatrixXcd regularized = model.r_auto;
  regularized.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXcd> solver(regularized);
  if (solver.info() != Eigen::Success)
    throw RuntimeError("lmmse: covariance factorization failed; retry with ridge > 0");
  // coeff^H = (r_auto + ridge*I)^-1 * r_cross^H since the regularized matrix
  // is Hermitian.
  model.coeff = solver.solve(model.r_cross.adjoint()).adjoint();

  double residual = (model.coeff * regularized - model.r_cross).norm();
  double reference = std::max(model.r_cross.norm(), 1e-300);
  if (residual / reference > 1e-6)
    throw RuntimeError(
        "lmmse: sample covariance is numerically singular; refit with ridge > 0");
  return model;
}

CsiMatrix predict(const LmmseModel& model, const CsiMatrix& h_ul) {
  if (h_ul.n_subcarriers != model.k_ul || h_ul.n_symbols != model.t_ul)
    throw RuntimeError("lmmse: input shape does not match the fitted model");
  Eigen::VectorXcd u = vectorize(h_ul) - model.ul_mean;
  Eigen::VectorXcd d = model.coeff * u + model.dl_mean;
  return unvectorize(d, model.k_dl, model.t_dl, Band::kDownlink);
}

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_cmatrix(std::ostream& os, const Eigen::MatrixXcd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      double re = m(r, c).real(), im = m(r, c).imag();
      std::uint64_t bits;
      std::memcpy(&bits, &re, 8);
      write_u64(os, bits);
      std::memcpy(&bits, &im, 8);
      write_u64(os, bits);
    }
}

void read_cmatrix(std::istream& is, Eigen::MatrixXcd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::uint64_t bits = read_u64(is);
      double re, im;
      std::memcpy(&re, &bits, 8);
      bits = read_u64(is);
      std::memcpy(&im, &bits, 8);
      m(r, c) = {re, im};
    }
}

}  // namespace

void save(const LmmseModel& model, const std::string& path) {
  nlohmann::json header = {
      {"k_ul", model.k_ul},   {"t_ul", model.t_ul},
      {"k_dl", model.k_dl},   {"t_dl", model.t_dl},
      {"delta", model.ridge}, {"train_count", model.train_count},
      {"mean_removed", model.mean_removed},
  };
  std::string header_str = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw RuntimeError("lmmse: cannot open '" + path + "' for writing");
  os.write("CSLM", 4);
  write_u64(os, header_str.size());
  os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  write_cmatrix(os, model.coeff);
  write_cmatrix(os, model.ul_mean);
  write_cmatrix(os, model.dl_mean);
  if (!os) throw RuntimeError("lmmse: write failure on '" + path + "'");
}

LmmseModel load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeError("lmmse: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "CSLM", 4) != 0)
    throw RuntimeError("lmmse: bad magic in '" + path + "'");
  std::uint64_t header_len = read_u64(is);
  std::string header_str(header_len, '\0');
  is.read(header_str.data(), static_cast<std::streamsize>(header_len));
  nlohmann::json header = nlohmann::json::parse(header_str);

  LmmseModel model;
  model.k_ul = header.at("k_ul").get<int>();
  model.t_ul = header.at("t_ul").get<int>();
  model.k_dl = header.at("k_dl").get<int>();
  model.t_dl = header.at("t_dl").get<int>();
  model.ridge = header.at("delta").get<double>();
  model.train_count = header.at("train_count").get<std::int64_t>();
  model.mean_removed = header.at("mean_removed").get<bool>();
  model.coeff.resize(model.dl_dim(), model.ul_dim());
  model.ul_mean.resize(model.ul_dim());
  model.dl_mean.resize(model.dl_dim());
  read_cmatrix(is, model.coeff);
  Eigen::MatrixXcd tmp_ul(model.ul_dim(), 1), tmp_dl(model.dl_dim(), 1);
  read_cmatrix(is, tmp_ul);
  read_cmatrix(is, tmp_dl);
  model.ul_mean = tmp_ul.col(0);
  model.dl_mean = tmp_dl.col(0);
  if (!is) throw RuntimeError("lmmse: truncated model file '" + path + "'");
  return model;
}

}  // namespace csipred::lmmse
