// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 5-9 share the desk-scale artifacts produced by criterion 5.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "csipred/channel.hpp"
#include "csipred/dataset.hpp"
#include "csipred/gan.hpp"
#include "csipred/linklevel.hpp"
#include "csipred/lmmse.hpp"
#include "csipred/metrics.hpp"
#include "support/gradcheck.hpp"
#include "support/test_util.hpp"

using namespace csipred;
using csipred::testsupport::gradcheck;
using csipred::testsupport::naive_delay_response;
using csipred::testsupport::q_function;
using csipred::testsupport::random_tensor;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("%s  criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct DeskArtifacts {
  bool ready = false;
  std::vector<data::CsiSample> train, val, test;
  data::NormalizationStats stats;
  gan::TrainResult result;
  std::string log_path;
  double train_seconds = 0.0;
};

// ---- criterion 1: gradient correctness ---------------------------------------

double check_op_grads(Rng& rng) {
  double worst = 0.0;
  auto track = [&](testsupport::GradCheckResult r) { worst = std::max(worst, r.max_rel_err); };

  {
    ag::Tensor x = random_tensor({2, 3, 6, 5}, rng);
    ag::Tensor k = random_tensor({4, 3, 3, 3}, rng, 0.5);
    ag::Tensor b = random_tensor({4}, rng, 0.1);
    for (auto [stride, pad] : {std::pair{1, 1}, {2, 1}, {2, 0}}) {
      track(gradcheck(
          [&, stride = stride, pad = pad] {
            ag::Tensor y = ag::conv2d(x, k, b, stride, pad);
            return ag::sum(ag::mul(y, y));
          },
          {x, k, b}, rng, 25));
    }
  }
  {
    ag::Tensor x = random_tensor({2, 4, 3, 2}, rng);
    ag::Tensor k = random_tensor({4, 3, 3, 3}, rng, 0.5);
    ag::Tensor b = random_tensor({3}, rng, 0.1);
    track(gradcheck(
        [&] {
          ag::Tensor y = ag::conv2d_transpose(x, k, b, 2, 1, {5, 4});
          return ag::sum(ag::mul(y, y));
        },
        {x, k, b}, rng, 25));
  }
  {
    ag::Tensor x = random_tensor({3, 2, 2, 2}, rng);
    ag::Tensor gamma = random_tensor({2}, rng, 0.2);
    for (double& v : gamma.values()) v += 1.0;
    ag::Tensor beta = random_tensor({2}, rng, 0.2);
    std::vector<double> rm(2, 0.0), rv(2, 1.0);
    // weighted linear loss: a sum of squares is invariant to the
    // standardization and would leave only an eps-sized gradient
    ag::Tensor w = random_tensor({3, 2, 2, 2}, rng, 1.0, false);
    track(gradcheck(
        [&] {
          ag::Tensor y = ag::batch_norm(x, gamma, beta, rm, rv, 0.1, 1e-5, true);
          return ag::sum(ag::mul(y, w));
        },
        {x, gamma, beta}, rng));
    track(gradcheck(
        [&] {
          ag::Tensor y = ag::batch_norm(x, gamma, beta, rm, rv, 0.1, 1e-5, false);
          return ag::sum(ag::mul(y, w));
        },
        {x, gamma, beta}, rng));
  }
  {
    ag::Tensor x = random_tensor({3, 6}, rng);
    for (double& v : x.values())
      if (std::abs(v) < 0.05) v += 0.1;
    track(gradcheck([&] { return ag::sum(ag::mul(ag::leaky_relu(x, 0.2), x)); }, {x}, rng));
    track(gradcheck([&] { return ag::sum(ag::mul(ag::tanh(x), x)); }, {x}, rng));
    track(gradcheck([&] { return ag::sum(ag::mul(ag::sigmoid(x), x)); }, {x}, rng));
  }
  {
    ag::Tensor x = random_tensor({3, 4}, rng);
    ag::Tensor w = random_tensor({2, 4}, rng);
    ag::Tensor b = random_tensor({2}, rng);
    track(gradcheck(
        [&] {
          ag::Tensor y = ag::dense(x, w, b);
          return ag::sum(ag::mul(y, y));
        },
        {x, w, b}, rng));
  }
  {
    ag::Tensor a = random_tensor({2, 2, 3, 2}, rng);
    ag::Tensor b = random_tensor({2, 3, 3, 2}, rng);
    track(gradcheck(
        [&] {
          ag::Tensor y = ag::flatten2d(ag::concat_channels(a, b));
          return ag::sum(ag::mul(y, y));
        },
        {a, b}, rng));
    track(gradcheck([&] { return ag::scale(ag::sum(ag::sub(a, ag::scale(a, 0.3))), 1.7); }, {a},
                    rng));
  }
  {
    ag::Tensor a = random_tensor({4, 3}, rng);
    ag::Tensor b = random_tensor({4, 3}, rng, 1.0, false);
    for (std::size_t i = 0; i < a.values().size(); ++i)
      if (std::abs(a.values()[i] - b.values()[i]) < 0.05) a.values()[i] += 0.1;
    track(gradcheck([&] { return ag::l1_loss(a, b); }, {a}, rng));
    track(gradcheck([&] { return ag::mse_loss(a, b); }, {a}, rng));
    ag::Tensor p = ag::Tensor::zeros({6}, true);
    for (double& v : p.values()) v = 0.2 + 0.6 * rng.uniform();
    track(gradcheck([&] { return ag::bce_loss(p, 1.0); }, {p}, rng));
    track(gradcheck([&] { return ag::bce_loss(p, 0.0); }, {p}, rng));
  }
  return worst;
}

double check_composite_grads(Rng& rng, std::uint64_t seed) {
  double worst = 0.0;
  gan::NetworkConfig net{2, 8, 4, 0.2};
  Rng gen_rng(derive_seed(seed, RngStream::kGeneratorInit, 0));
  Rng disc_rng(derive_seed(seed, RngStream::kDiscriminatorInit, 0));
  gan::Generator gen(net, gen_rng);
  gan::Discriminator disc(net, disc_rng);

  ag::Tensor ul = random_tensor({2, 2, 8, 4}, rng, 0.5, false);
  ag::Tensor target = random_tensor({2, 2, 8, 4}, rng, 0.5, false);

  auto gen_params = gen.parameters();
  auto g_reconstruction = [&] { return ag::mse_loss(gen.forward(ul, true), target); };
  worst = std::max(worst, gradcheck(g_reconstruction, gen_params, rng, 4).max_rel_err);

  auto disc_params = disc.parameters();
  auto d_objective = [&] {
    ag::Tensor fake;
    {
      ag::NoGradGuard no_grad;
      fake = gen.forward(ul, true);
    }
    return gan::d_loss(disc, ul, target, fake, true);
  };
  worst = std::max(worst, gradcheck(d_objective, disc_params, rng, 4).max_rel_err);

  auto g_adversarial = [&] {
    return gan::g_loss(disc, ul, target, gen.forward(ul, true), 100.0, true).total;
  };
  worst = std::max(worst, gradcheck(g_adversarial, gen_params, rng, 4).max_rel_err);
  return worst;
}

void criterion_1() {
  auto t0 = Clock::now();
  double worst_op = 0.0, worst_composite = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(derive_seed(1000, RngStream::kMisc, seed));
    worst_op = std::max(worst_op, check_op_grads(rng));
    worst_composite = std::max(worst_composite, check_composite_grads(rng, seed));
  }
  double elapsed = seconds_since(t0);
  std::ostringstream os;
  os << "gradient checks: op max rel err " << worst_op << " (< 1e-5), composite max rel err "
     << worst_composite << " (< 1e-4), " << elapsed << " s (< 120 s)";
  report(1, worst_op < 1e-5 && worst_composite < 1e-4 && elapsed < 120.0, os.str());
}

// ---- criterion 2: metric oracles ----------------------------------------------

void criterion_2() {
  Rng rng(2024);
  double worst_rel = 0.0;
  for (int k_count : {1, 7, 36, 64}) {
    CsiMatrix h = testsupport::make_csi(k_count, 4, Band::kDownlink, [&](int, int) {
      return cdouble{rng.normal(), rng.normal()};
    });
    metrics::DelayResponse dr = metrics::delay_response(h);
    std::vector<cdouble> oracle = naive_delay_response(h);
    double scale = 0.0;
    for (const cdouble& z : oracle) scale = std::max(scale, std::abs(z));
    for (std::size_t i = 0; i < oracle.size(); ++i)
      worst_rel = std::max(worst_rel, std::abs(dr.entries[i] - oracle[i]) / std::max(scale, 1e-30));
  }

  double worst_parseval = 0.0;
  CsiMatrix h = testsupport::make_csi(36, 7, Band::kDownlink, [&](int, int) {
    return cdouble{rng.normal(), rng.normal()};
  });
  metrics::DelayResponse dr = metrics::delay_response(h);
  for (int t = 0; t < 7; ++t) {
    double delay_e = 0.0, freq_e = 0.0;
    for (int tau = 0; tau < 36; ++tau) delay_e += std::norm(dr.at(t, tau));
    for (int k = 0; k < 36; ++k) freq_e += std::norm(h.at(k, t));
    worst_parseval = std::max(worst_parseval, std::abs(delay_e - freq_e / 36.0) / (freq_e / 36.0));
  }

  CsiMatrix zero(6, 3, Band::kDownlink);
  CsiMatrix twice = h;
  for (cdouble& z : twice.entries) z *= 2.0;
  CsiMatrix h_zero(36, 7, Band::kDownlink);
  bool identities = metrics::nmse_h(h, h) == 0.0 &&
                    std::abs(metrics::nmse_h(h, h_zero) - 1.0) < 1e-14 &&
                    std::abs(metrics::nmse_h(h, twice) - 1.0) < 1e-14;
  metrics::PdpMatrix p = metrics::tv_pdp(h);
  metrics::PdpMatrix p_zero = p;
  for (double& v : p_zero.p_db) v = 0.0;
  identities = identities && metrics::nmse_p(p, p) == 0.0 &&
               std::abs(metrics::nmse_p(p, p_zero) - 1.0) < 1e-14;

  std::ostringstream os;
  os << "delay-transform oracle rel err " << worst_rel << " (< 1e-12), Parseval rel err "
     << worst_parseval << " (< 1e-10), nmse identities " << (identities ? "exact" : "BROKEN");
  report(2, worst_rel < 1e-12 && worst_parseval < 1e-10 && identities, os.str());
}

// ---- criterion 3: LMMSE recovery ------------------------------------------------

void criterion_3() {
  auto t0 = Clock::now();
  Rng rng(3033);
  const int k = 36, t = 7, dim = k * t;
  Eigen::MatrixXcd a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = rng.complex_gaussian(1.0 / dim);

  auto make = [&](int n) {
    std::vector<data::CsiSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
      data::CsiSample s;
      s.h_ul = testsupport::make_csi(k, t, Band::kUplink,
                                     [&](int, int) { return rng.complex_gaussian(1.0); });
      s.h_dl = lmmse::unvectorize(a * lmmse::vectorize(s.h_ul), k, t, Band::kDownlink);
      out.push_back(std::move(s));
    }
    return out;
  };
  auto train = make(10 * dim);
  auto test = make(100);

  lmmse::LmmseModel model = lmmse::fit(train);
  double total = 0.0;
  for (const data::CsiSample& s : test)
    total += metrics::nmse_h(s.h_dl, lmmse::predict(model, s.h_ul));
  double nmse = total / static_cast<double>(test.size());
  double elapsed = seconds_since(t0);
  std::ostringstream os;
  os << "linear-channel held-out nmse_h " << nmse << " (< 1e-6) with " << train.size()
     << " training samples, " << elapsed << " s (< 60 s)";
  report(3, nmse < 1e-6 && elapsed < 60.0, os.str());
}

// ---- criterion 4: QPSK/AWGN calibration ------------------------------------------

void criterion_4() {
  auto t0 = Clock::now();
  std::vector<data::CsiSample> flat(1);
  flat[0].h_ul = testsupport::make_csi(36, 7, Band::kUplink,
                                       [](int, int) { return cdouble{1.0, 0.0}; });
  flat[0].h_dl = testsupport::make_csi(36, 7, Band::kDownlink,
                                       [](int, int) { return cdouble{1.0, 0.0}; });

  link::LinkSimConfig cfg;
  cfg.snr_db_grid = {0.0, 2.0, 4.0, 6.0, 8.0};
  cfg.n_frames = 1990;  // 1990 frames x 504 bits > 1e6 bits per SNR point
  cfg.seed = 4044;
  auto points = link::ber_curve(flat, {}, cfg, {link::EqualizerMode::kPerfect});

  bool ok = true;
  std::ostringstream os;
  os << "flat-channel QPSK vs Gaussian tail:";
  for (const link::BerPoint& p : points) {
    double theory = q_function(std::sqrt(std::pow(10.0, p.snr_db / 10.0)));
    double rel = std::abs(p.ber - theory) / theory;
    if (theory >= 1e-3 && rel > 0.05) ok = false;
    os << " " << p.snr_db << "dB:" << p.ber << "/" << theory;
  }
  double elapsed = seconds_since(t0);
  os << ", " << elapsed << " s (< 60 s)";
  report(4, ok && elapsed < 60.0, os.str());
}

// ---- criterion 5: desk-scale adversarial run --------------------------------------

DeskArtifacts criterion_5(const std::string& work_dir) {
  DeskArtifacts art;
  auto t0 = Clock::now();

  chan::LinkConfig link_cfg;  // paper-default 36x7 FDD grid
  data::ProfileMix profile = data::ProfileMix::single(chan::TdlProfile::eva());
  const double speed_mps = 50.0 / 3.6;
  const std::uint64_t seed = 20240551;

  const int n_train = 2000, n_val = 200, n_test = 400;
  art.train.reserve(n_train);
  art.val.reserve(n_val);
  art.test.reserve(n_test);
  for (int i = 0; i < n_train + n_val + n_test; ++i) {
    data::CsiSample s = data::generate_sample(link_cfg, profile, speed_mps, seed,
                                              static_cast<std::uint64_t>(i));
    if (i < n_train)
      art.train.push_back(std::move(s));
    else if (i < n_train + n_val)
      art.val.push_back(std::move(s));
    else
      art.test.push_back(std::move(s));
  }
  art.stats = data::fit_normalizer(art.train);

  gan::TrainConfig cfg;  // published hyperparameters at desk width
  cfg.n_base = 8;
  cfg.epochs = 24;  // 63 batch groups per epoch
  cfg.seed = seed;
  art.log_path = work_dir + "/train_log.jsonl";

  gan::TrainLogger logger(art.log_path);
  art.result = gan::train_cpcgan(art.train, art.val, art.stats, cfg, &logger, "");
  art.train_seconds = seconds_since(t0);

  bool argmin_ok = true;
  for (const gan::ScorePoint& p : art.result.scores)
    if (art.result.best.val_cp_error > p.cp_error) argmin_ok = false;

  gan::Generator gen = gan::generator_from_checkpoint(art.result.best);
  gan::EvalStats test_stats = gan::evaluate_generator(gen, art.test, art.stats, cfg.lambda2);

  double zero_nmse = 0.0, stale_nmse = 0.0;
  for (const data::CsiSample& s : art.test) {
    CsiMatrix zero(s.h_dl.n_subcarriers, s.h_dl.n_symbols, Band::kDownlink);
    zero_nmse += metrics::nmse_h(s.h_dl, zero);
    CsiMatrix stale = s.h_ul;
    stale.band = Band::kDownlink;
    stale_nmse += metrics::nmse_h(s.h_dl, stale);
  }
  zero_nmse /= art.test.size();
  stale_nmse /= art.test.size();

  bool pass = argmin_ok && test_stats.nmse_h < 0.5 && test_stats.nmse_h < zero_nmse &&
              std::abs(zero_nmse - 1.0) < 1e-12 && test_stats.nmse_h < stale_nmse &&
              art.train_seconds < 1800.0;
  std::ostringstream os;
  os << "desk-scale run (" << n_train << "/" << n_val << "/" << n_test
     << ", n_base=8, EVA FDD 50 km/h): selected cp_error " << art.result.best.val_cp_error
     << " at batch " << art.result.best.counter << " over " << art.result.scores.size()
     << " scored checkpoints (argmin " << (argmin_ok ? "exact" : "VIOLATED")
     << "); test nmse_h " << test_stats.nmse_h << " (< 0.5), zero-predictor " << zero_nmse
     << ", stale-UL " << stale_nmse << "; " << art.train_seconds << " s (< 1800 s)";
  report(5, pass, os.str());
  art.ready = pass;
  return art;
}

// ---- criterion 6: BER ordering ------------------------------------------------------

void criterion_6(const DeskArtifacts& art) {
  if (!art.ready) {
    report(6, false, "skipped: desk-scale artifacts unavailable");
    return;
  }
  auto gen = std::make_shared<gan::Generator>(gan::generator_from_checkpoint(art.result.best));
  data::NormalizationStats stats = art.result.best.stats;
  link::Predictor predictor = [gen, stats](const CsiMatrix& h_ul) {
    return gan::predict(*gen, h_ul, stats);
  };

  link::LinkSimConfig cfg;
  cfg.snr_db_grid = {0.0, 5.0, 10.0, 15.0, 20.0};
  cfg.n_frames = 200;  // 200 x 504 bits > 1e5 bits per point
  cfg.seed = 6066;
  auto points = link::ber_curve(
      art.test, predictor, cfg,
      {link::EqualizerMode::kPerfect, link::EqualizerMode::kPredicted,
       link::EqualizerMode::kNone});

  bool ok = true;
  std::ostringstream os;
  os << "common-random BER ordering perfect <= predicted <= none:";
  for (std::size_t si = 0; si < cfg.snr_db_grid.size(); ++si) {
    const auto& perfect = points[3 * si + 0];
    const auto& predicted = points[3 * si + 1];
    const auto& none = points[3 * si + 2];
    if (!(perfect.ber <= predicted.ber && predicted.ber <= none.ber)) ok = false;
    if (perfect.bits < 100000) ok = false;
    os << " " << cfg.snr_db_grid[si] << "dB:" << perfect.ber << "/" << predicted.ber << "/"
       << none.ber;
  }
  report(6, ok, os.str());
}

// ---- criterion 7: schedule conformance ----------------------------------------------

void criterion_7(const DeskArtifacts& art) {
  if (!art.ready) {
    report(7, false, "skipped: desk-scale artifacts unavailable");
    return;
  }
  std::ifstream log(art.log_path);
  std::vector<std::int64_t> score_counters;
  std::int64_t total_batches = 0;
  std::string line;
  while (std::getline(log, line)) {
    nlohmann::json rec = nlohmann::json::parse(line);
    if (rec["type"] == "score") score_counters.push_back(rec["counter"].get<std::int64_t>());
    if (rec["type"] == "batch") total_batches = std::max(total_batches, rec["counter"].get<std::int64_t>());
  }
  bool schedule_ok = !score_counters.empty();
  for (std::size_t i = 0; i < score_counters.size(); ++i)
    if (score_counters[i] != static_cast<std::int64_t>(100 * (i + 1))) schedule_ok = false;
  if (score_counters.size() != static_cast<std::size_t>(total_batches / 100)) schedule_ok = false;

  bool ratio_ok = art.result.g_steps == 2 * art.result.d_steps && art.result.d_steps > 0;
  std::ostringstream os;
  os << "validation records at exact multiples of 100 (" << score_counters.size() << " over "
     << total_batches << " batches): " << (schedule_ok ? "yes" : "NO")
     << "; generator/discriminator Adam steps " << art.result.g_steps << "/"
     << art.result.d_steps << " (= 2:1): " << (ratio_ok ? "yes" : "NO");
  report(7, schedule_ok && ratio_ok, os.str());
}

// ---- criterion 8: side-by-side reference table ---------------------------------------

void criterion_8(const DeskArtifacts& art) {
  if (!art.ready) {
    report(8, false, "skipped: desk-scale artifacts unavailable");
    return;
  }
  gan::Generator gen = gan::generator_from_checkpoint(art.result.best);
  gan::EvalStats gan_stats = gan::evaluate_generator(gen, art.test, art.stats, 1.0);

  lmmse::LmmseModel model = lmmse::fit(art.train);
  double lm_h = 0.0, lm_p = 0.0;
  for (const data::CsiSample& s : art.test) {
    CsiMatrix est = lmmse::predict(model, s.h_ul);
    lm_h += metrics::nmse_h(s.h_dl, est);
    lm_p += metrics::nmse_p_of(s.h_dl, est);
  }
  lm_h /= art.test.size();
  lm_p /= art.test.size();

  bool finite = std::isfinite(gan_stats.nmse_h) && std::isfinite(gan_stats.nmse_p) &&
                std::isfinite(lm_h) && std::isfinite(lm_p);
  std::printf("    metric results comparison, desk scale (EVA, 50 km/h)\n");
  std::printf("    %-28s %-10s %-10s\n", "method", "NMSE_H", "NMSE_P");
  std::printf("    %-28s %-10.4f %-10.4f\n", "LMMSE (desk scale)", lm_h, lm_p);
  std::printf("    %-28s %-10.4f %-10.4f\n", "adversarial (desk scale)", gan_stats.nmse_h,
              gan_stats.nmse_p);
  std::printf("    %-28s %-10.4f %-10.4f  (context only, full-scale published EVA row)\n",
              "LMMSE (reference)", 0.0454, 0.0063);
  std::printf("    %-28s %-10.4f %-10.4f  (context only, full-scale published EVA row)\n",
              "adversarial (reference)", 0.0170, 0.0063);
  std::ostringstream os;
  os << "side-by-side table reported (desk adversarial nmse_h " << gan_stats.nmse_h
     << " vs LMMSE " << lm_h << "); reference rows quoted for context only";
  report(8, finite, os.str());
}

// ---- criterion 9: MIMO extension -------------------------------------------------------

void criterion_9(const DeskArtifacts& art) {
  if (!art.ready) {
    report(9, false, "skipped: desk-scale artifacts unavailable");
    return;
  }
  gan::Generator gen = gan::generator_from_checkpoint(art.result.best);

  gan::MimoLinks links;  // 2x2 grid built from four independent SISO test samples
  links.n_rx = 2;
  links.n_tx = 2;
  links.links = {art.test[0].h_ul, art.test[1].h_ul, art.test[2].h_ul, art.test[3].h_ul};
  std::vector<CsiMatrix> preds = gan::predict_mimo(gen, links, art.result.best.stats);

  double per_link_sum = 0.0;
  std::vector<double> per_link;
  for (int i = 0; i < 4; ++i) {
    per_link.push_back(metrics::nmse_h(art.test[static_cast<std::size_t>(i)].h_dl, preds[static_cast<std::size_t>(i)]));
    per_link_sum += per_link.back();
  }
  double aggregate = per_link_sum / 4.0;
  double mean_of_links = (per_link[0] + per_link[1] + per_link[2] + per_link[3]) / 4.0;
  bool siso_reuse = preds.size() == 4;
  for (const CsiMatrix& m : preds)
    if (m.n_subcarriers != 36 || m.n_symbols != 7) siso_reuse = false;

  bool exact = std::abs(aggregate - mean_of_links) <= 1e-12;
  std::ostringstream os;
  os << "2x2 per-link prediction with the SISO-trained checkpoint: aggregate nmse_h "
     << aggregate << ", |aggregate - mean(links)| = " << std::abs(aggregate - mean_of_links)
     << " (<= 1e-12), links ran unmodified: " << (siso_reuse ? "yes" : "NO");
  report(9, exact && siso_reuse, os.str());
}

}  // namespace

int main() {
  std::string work_dir = "acceptance_artifacts";
  std::filesystem::create_directories(work_dir);

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  DeskArtifacts art = criterion_5(work_dir);
  criterion_6(art);
  criterion_7(art);
  criterion_8(art);
  criterion_9(art);

  if (g_failures == 0)
    std::printf("all acceptance criteria passed\n");
  else
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
