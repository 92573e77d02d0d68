#include "csipred/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "csipred/linklevel.hpp"
#include "csipred/lmmse.hpp"
#include "csipred/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace csipred::cli {

namespace {

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) known = true;
    if (!known)
      throw ConfigError("config: unknown key '" + item.key() + "' in section '" + section + "'");
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

data::ProfileMix parse_profile(const json& p) {
  check_keys(p, "profile", {"name", "taps", "mix"});
  auto parse_single = [](const json& entry, const std::string& where) -> chan::TdlProfile {
    if (entry.contains("taps")) return chan::TdlProfile::from_json(entry);
    if (!entry.contains("name")) throw ConfigError(where + ": missing field 'name'");
    return chan::TdlProfile::by_name(entry.at("name").get<std::string>());
  };

  data::ProfileMix mix;
  if (p.contains("mix")) {
    if (p.contains("name") || p.contains("taps"))
      throw ConfigError("profile: 'mix' excludes top-level 'name'/'taps'");
    for (const json& entry : p.at("mix")) {
      check_keys(entry, "profile.mix[]", {"name", "taps", "weight"});
      double weight = 1.0;
      read_field(entry, "weight", weight);
      mix.entries.push_back({parse_single(entry, "profile.mix[]"), weight});
    }
  } else {
    mix.entries.push_back({parse_single(p, "profile"), 1.0});
  }
  mix.validate();
  return mix;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, "<root>", {"seed", "link", "profile", "dataset", "train", "ber", "paths"});

  ExperimentConfig cfg;
  read_field(doc, "seed", cfg.seed);

  if (doc.contains("link")) {
    const json& l = doc.at("link");
    check_keys(l, "link",
               {"k_ul", "t_ul", "k_dl", "t_dl", "subcarrier_spacing_hz", "symbol_duration_s",
                "carrier_hz", "ul_band_offset_hz", "dl_band_offset_hz", "duplex"});
    read_field(l, "k_ul", cfg.link.k_ul);
    read_field(l, "t_ul", cfg.link.t_ul);
    read_field(l, "k_dl", cfg.link.k_dl);
    read_field(l, "t_dl", cfg.link.t_dl);
    read_field(l, "subcarrier_spacing_hz", cfg.link.subcarrier_spacing_hz);
    read_field(l, "symbol_duration_s", cfg.link.symbol_duration_s);
    read_field(l, "carrier_hz", cfg.link.carrier_hz);
    read_field(l, "ul_band_offset_hz", cfg.link.ul_band_offset_hz);
    read_field(l, "dl_band_offset_hz", cfg.link.dl_band_offset_hz);
    if (l.contains("duplex")) {
      std::string duplex = l.at("duplex").get<std::string>();
      if (duplex == "tdd")
        cfg.link.dl_band_offset_hz = cfg.link.ul_band_offset_hz;
      else if (duplex != "fdd")
        throw ConfigError("config: link.duplex must be 'fdd' or 'tdd'");
    }
    cfg.link.validate();
  }

  if (doc.contains("profile")) cfg.profile = parse_profile(doc.at("profile"));

  if (doc.contains("dataset")) {
    const json& d = doc.at("dataset");
    check_keys(d, "dataset", {"n_samples", "ratios", "speed_kmh"});
    if (!d.contains("n_samples")) throw ConfigError("config: dataset.n_samples is required");
    cfg.dataset.present = true;
    cfg.dataset.n_samples = d.at("n_samples").get<std::uint64_t>();
    if (d.contains("ratios")) {
      auto r = d.at("ratios").get<std::vector<double>>();
      if (r.size() != 3) throw ConfigError("config: dataset.ratios must have 3 entries");
      cfg.dataset.ratios = {r[0], r[1], r[2]};
    }
    read_field(d, "speed_kmh", cfg.dataset.speed_kmh);
    if (cfg.dataset.n_samples == 0) throw ConfigError("config: dataset.n_samples must be > 0");
    if (cfg.dataset.speed_kmh < 0.0) throw ConfigError("config: dataset.speed_kmh must be >= 0");
  }

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    check_keys(t, "train",
               {"method", "lr", "beta1", "beta2", "lambda1", "lambda2", "batch", "n_base",
                "g_updates_per_d", "val_interval_batches", "epochs", "leaky_slope", "cnn_loss"});
    read_field(t, "method", cfg.train_method);
    if (cfg.train_method != "cpcgan" && cfg.train_method != "cnn")
      throw ConfigError("config: train.method must be 'cpcgan' or 'cnn'");
    read_field(t, "lr", cfg.train.lr);
    read_field(t, "beta1", cfg.train.beta1);
    read_field(t, "beta2", cfg.train.beta2);
    read_field(t, "lambda1", cfg.train.lambda1);
    read_field(t, "lambda2", cfg.train.lambda2);
    read_field(t, "batch", cfg.train.batch);
    read_field(t, "n_base", cfg.train.n_base);
    read_field(t, "g_updates_per_d", cfg.train.g_updates_per_d);
    read_field(t, "val_interval_batches", cfg.train.val_interval_batches);
    read_field(t, "epochs", cfg.train.epochs);
    read_field(t, "leaky_slope", cfg.train.leaky_slope);
    read_field(t, "cnn_loss", cfg.train.cnn_loss);
    cfg.train.validate();
  }

  if (doc.contains("ber")) {
    const json& b = doc.at("ber");
    check_keys(b, "ber", {"snr_db", "n_frames", "modes", "clip_gain"});
    if (b.contains("snr_db")) cfg.ber.snr_db = b.at("snr_db").get<std::vector<double>>();
    read_field(b, "n_frames", cfg.ber.n_frames);
    if (b.contains("modes")) cfg.ber.modes = b.at("modes").get<std::vector<std::string>>();
    read_field(b, "clip_gain", cfg.ber.clip_gain);
    if (cfg.ber.snr_db.empty()) throw ConfigError("config: ber.snr_db must be non-empty");
    if (cfg.ber.n_frames < 1) throw ConfigError("config: ber.n_frames must be >= 1");
    if (!(cfg.ber.clip_gain > 0.0)) throw ConfigError("config: ber.clip_gain must be > 0");
    for (const std::string& m : cfg.ber.modes) link::mode_from_name(m);
  }

  if (doc.contains("paths")) {
    const json& p = doc.at("paths");
    check_keys(p, "paths", {"out_dir"});
    read_field(p, "out_dir", cfg.out_dir);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: JSON parse failure in '" + path + "': " + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["link"] = {{"k_ul", cfg.link.k_ul},
                 {"t_ul", cfg.link.t_ul},
                 {"k_dl", cfg.link.k_dl},
                 {"t_dl", cfg.link.t_dl},
                 {"subcarrier_spacing_hz", cfg.link.subcarrier_spacing_hz},
                 {"symbol_duration_s", cfg.link.symbol_duration_s},
                 {"carrier_hz", cfg.link.carrier_hz},
                 {"ul_band_offset_hz", cfg.link.ul_band_offset_hz},
                 {"dl_band_offset_hz", cfg.link.dl_band_offset_hz}};
  if (cfg.profile) {
    json mix = json::array();
    for (const auto& e : cfg.profile->entries) {
      json taps = json::array();
      for (const auto& tap : e.profile.taps)
        taps.push_back({{"delay_ns", tap.delay_ns}, {"power_db", tap.avg_power_db}});
      mix.push_back({{"name", e.profile.name}, {"taps", taps}, {"weight", e.weight}});
    }
    doc["profile"] = {{"mix", mix}};
  }
  if (cfg.dataset.present)
    doc["dataset"] = {{"n_samples", cfg.dataset.n_samples},
                      {"ratios", cfg.dataset.ratios},
                      {"speed_kmh", cfg.dataset.speed_kmh}};
  doc["train"] = {{"method", cfg.train_method},
                  {"lr", cfg.train.lr},
                  {"beta1", cfg.train.beta1},
                  {"beta2", cfg.train.beta2},
                  {"lambda1", cfg.train.lambda1},
                  {"lambda2", cfg.train.lambda2},
                  {"batch", cfg.train.batch},
                  {"n_base", cfg.train.n_base},
                  {"g_updates_per_d", cfg.train.g_updates_per_d},
                  {"val_interval_batches", cfg.train.val_interval_batches},
                  {"epochs", cfg.train.epochs},
                  {"leaky_slope", cfg.train.leaky_slope},
                  {"cnn_loss", cfg.train.cnn_loss}};
  doc["ber"] = {{"snr_db", cfg.ber.snr_db},
                {"n_frames", cfg.ber.n_frames},
                {"modes", cfg.ber.modes},
                {"clip_gain", cfg.ber.clip_gain}};
  doc["paths"] = {{"out_dir", cfg.out_dir}};
  return doc;
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeError("cannot create directory '" + dir + "': " + ec.message());
}

void archive_config(const ExperimentConfig& cfg, const std::string& out_dir) {
  std::ofstream os(out_dir + "/effective_config.json", std::ios::trunc);
  os << config_to_json(cfg).dump(2) << '\n';
  if (!os) throw RuntimeError("cannot write effective config in '" + out_dir + "'");
}

double kmh_to_mps(double kmh) { return kmh / 3.6; }

// ---- gen-data ---------------------------------------------------------------

struct SplitFiles {
  data::SplitCounts counts;
  std::string train, val, test;
};

SplitFiles write_split_files(const ExperimentConfig& cfg, const std::string& out_dir,
                             int threads) {
  if (!cfg.profile) throw ConfigError("config: missing 'profile' section");
  if (!cfg.dataset.present) throw ConfigError("config: missing 'dataset' section");

  SplitFiles files;
  files.counts = data::split_counts(cfg.dataset.n_samples, cfg.dataset.ratios);
  files.train = out_dir + "/train.csid";
  files.val = out_dir + "/val.csid";
  files.test = out_dir + "/test.csid";
  const double speed_mps = kmh_to_mps(cfg.dataset.speed_kmh);

  std::uint64_t offset = 0;
  const std::array<std::pair<const std::string*, std::size_t>, 3> parts = {
      std::pair<const std::string*, std::size_t>{&files.train, files.counts.train},
      {&files.val, files.counts.val},
      {&files.test, files.counts.test}};
  for (const auto& [path, count] : parts) {
    if (count == 0) {
      data::CsiDataset empty;
      empty.header.k_ul = static_cast<std::uint32_t>(cfg.link.k_ul);
      empty.header.t_ul = static_cast<std::uint32_t>(cfg.link.t_ul);
      empty.header.k_dl = static_cast<std::uint32_t>(cfg.link.k_dl);
      empty.header.t_dl = static_cast<std::uint32_t>(cfg.link.t_dl);
      empty.header.master_seed = cfg.seed;
      data::save(empty, *path);
      continue;
    }
    data::generate(cfg.link, *cfg.profile, speed_mps, count, cfg.seed, *path, threads, offset);
    offset += count;
  }
  return files;
}

json cmd_gen_data(const ExperimentConfig& cfg, int threads) {
  ensure_dir(cfg.out_dir);
  SplitFiles files = write_split_files(cfg, cfg.out_dir, threads);
  data::NormalizationStats stats = files.counts.train > 0
                                       ? data::fit_normalizer_file(files.train)
                                       : data::NormalizationStats{0.0, 0.0};

  json profiles = json::array();
  for (const auto& e : cfg.profile->entries)
    profiles.push_back({{"name", e.profile.name}, {"weight", e.weight}});
  json sidecar = {
      {"profile", cfg.profile->label()},
      {"profiles", profiles},
      {"speed_kmh", cfg.dataset.speed_kmh},
      {"speed_mps", kmh_to_mps(cfg.dataset.speed_kmh)},
      {"ratios", cfg.dataset.ratios},
      {"master_seed", cfg.seed},
      {"n_samples", cfg.dataset.n_samples},
      {"normalization", {{"lo", stats.lo}, {"hi", stats.hi}}},
      {"splits",
       {{"train", {{"file", "train.csid"}, {"count", files.counts.train}}},
        {"val", {{"file", "val.csid"}, {"count", files.counts.val}}},
        {"test", {{"file", "test.csid"}, {"count", files.counts.test}}}}},
  };
  std::ofstream os(cfg.out_dir + "/dataset.json", std::ios::trunc);
  os << sidecar.dump(2) << '\n';
  if (!os) throw RuntimeError("cannot write dataset sidecar in '" + cfg.out_dir + "'");
  archive_config(cfg, cfg.out_dir);
  return sidecar;
}

// ---- shared loading -----------------------------------------------------------

struct DatasetDir {
  data::CsiDataset train, val, test;
  data::NormalizationStats stats;
};

DatasetDir load_dataset_dir(const std::string& dir, bool need_train, bool need_val,
                            bool need_test) {
  DatasetDir d;
  if (need_train) d.train = data::load(dir + "/train.csid");
  if (need_val) d.val = data::load(dir + "/val.csid");
  if (need_test) d.test = data::load(dir + "/test.csid");
  if (need_train && !d.train.samples.empty()) d.stats = data::fit_normalizer(d.train.samples);
  return d;
}

// ---- eval ----------------------------------------------------------------------

struct MethodEval {
  std::string method;
  std::size_t samples = 0;
  double nmse_h = 0.0;
  double nmse_p = 0.0;
  double cp_error = 0.0;
};

MethodEval evaluate_predictor(const std::string& method,
                              const std::vector<data::CsiSample>& test,
                              const link::Predictor& predictor, double lambda2,
                              const std::string& jsonl_path) {
  if (test.empty()) throw ConfigError("eval: empty test set");
  std::ofstream jsonl;
  if (!jsonl_path.empty()) {
    jsonl.open(jsonl_path, std::ios::trunc);
    if (!jsonl) throw RuntimeError("eval: cannot open '" + jsonl_path + "'");
  }
  double sum_h = 0.0, sum_p = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    CsiMatrix est = predictor(test[i].h_ul);
    double nh = metrics::nmse_h(test[i].h_dl, est);
    double np = metrics::nmse_p_of(test[i].h_dl, est);
    double cp = metrics::cp_error(nh, np, lambda2);
    sum_h += nh;
    sum_p += np;
    if (jsonl.is_open()) {
      json rec = {{"sample_id", i}, {"nmse_h", nh}, {"nmse_p", np}, {"cp_error", cp}};
      jsonl << rec.dump() << '\n';
    }
  }
  MethodEval out;
  out.method = method;
  out.samples = test.size();
  out.nmse_h = sum_h / static_cast<double>(test.size());
  out.nmse_p = sum_p / static_cast<double>(test.size());
  out.cp_error = metrics::cp_error(out.nmse_h, out.nmse_p, lambda2);
  return out;
}

void write_metric_csv(const std::string& path, const std::vector<MethodEval>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw RuntimeError("eval: cannot open '" + path + "'");
  os << "method,samples,nmse_h,nmse_p,cp_error\n";
  for (const MethodEval& r : rows)
    os << r.method << ',' << r.samples << ',' << r.nmse_h << ',' << r.nmse_p << ',' << r.cp_error
       << '\n';
}

link::Predictor zero_predictor(int k_dl, int t_dl) {
  return [k_dl, t_dl](const CsiMatrix&) { return CsiMatrix(k_dl, t_dl, Band::kDownlink); };
}

link::Predictor stale_ul_predictor() {
  return [](const CsiMatrix& h_ul) {
    CsiMatrix est = h_ul;
    est.band = Band::kDownlink;
    return est;
  };
}

// Keeps the generator alive inside the callable.
link::Predictor checkpoint_predictor(const gan::Checkpoint& ckpt) {
  auto gen = std::make_shared<gan::Generator>(gan::generator_from_checkpoint(ckpt));
  data::NormalizationStats stats = ckpt.stats;
  return [gen, stats](const CsiMatrix& h_ul) { return gan::predict(*gen, h_ul, stats); };
}

MethodEval run_eval_method(const ExperimentConfig& cfg, const std::string& method,
                           const std::string& data_dir, const std::string& checkpoint_path,
                           const std::string& out_dir) {
  const bool needs_train = method == "lmmse";
  DatasetDir d = load_dataset_dir(data_dir, needs_train, false, true);
  if (d.test.samples.empty()) throw ConfigError("eval: test split is empty");
  const double lambda2 = cfg.train.lambda2;
  const std::string jsonl = out_dir + "/metrics_" + method + ".jsonl";

  if (method == "zero") {
    return evaluate_predictor(method, d.test.samples,
                              zero_predictor(d.test.samples.front().h_dl.n_subcarriers,
                                             d.test.samples.front().h_dl.n_symbols),
                              lambda2, jsonl);
  }
  if (method == "stale_ul") {
    return evaluate_predictor(method, d.test.samples, stale_ul_predictor(), lambda2, jsonl);
  }
  if (method == "lmmse") {
    lmmse::LmmseModel model = lmmse::fit(d.train.samples);
    lmmse::save(model, out_dir + "/lmmse.model");
    link::Predictor pred = [model](const CsiMatrix& h_ul) { return lmmse::predict(model, h_ul); };
    return evaluate_predictor(method, d.test.samples, pred, lambda2, jsonl);
  }
  if (method == "cpcgan" || method == "cnn") {
    if (checkpoint_path.empty())
      throw ConfigError("eval: method '" + method + "' needs --checkpoint");
    gan::Checkpoint ckpt = gan::load_checkpoint(checkpoint_path);
    return evaluate_predictor(method, d.test.samples, checkpoint_predictor(ckpt), lambda2, jsonl);
  }
  throw ConfigError("eval: unknown method '" + method + "'");
}

// ---- train ----------------------------------------------------------------------

gan::TrainResult run_train(const ExperimentConfig& cfg, const std::string& method,
                           const std::string& data_dir, const std::string& out_dir) {
  DatasetDir d = load_dataset_dir(data_dir, true, true, false);
  if (d.train.samples.empty() || d.val.samples.empty())
    throw ConfigError("train: train or val split is empty in '" + data_dir + "'");

  gan::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  ensure_dir(out_dir + "/checkpoints");
  gan::TrainLogger logger(out_dir + "/train_log.jsonl");
  gan::TrainResult result =
      method == "cnn"
          ? gan::train_cnn_baseline(d.train.samples, d.val.samples, d.stats, tc, &logger,
                                    out_dir + "/checkpoints")
          : gan::train_cpcgan(d.train.samples, d.val.samples, d.stats, tc, &logger,
                              out_dir + "/checkpoints");
  gan::save_checkpoint(result.best, out_dir + "/best.ckpt");
  return result;
}

// ---- ber ------------------------------------------------------------------------

std::vector<link::BerPoint> run_ber(const ExperimentConfig& cfg, const std::string& data_dir,
                                    const std::string& checkpoint_path, const std::string& out_dir,
                                    int threads) {
  DatasetDir d = load_dataset_dir(data_dir, false, false, true);
  if (d.test.samples.empty()) throw ConfigError("ber: test split is empty");

  std::vector<link::EqualizerMode> modes;
  for (const std::string& name : cfg.ber.modes) modes.push_back(link::mode_from_name(name));
  bool wants_predicted =
      std::find(modes.begin(), modes.end(), link::EqualizerMode::kPredicted) != modes.end();

  link::Predictor predictor;
  if (wants_predicted) {
    if (checkpoint_path.empty()) throw ConfigError("ber: 'predicted' mode needs --checkpoint");
    predictor = checkpoint_predictor(gan::load_checkpoint(checkpoint_path));
  }

  link::LinkSimConfig lc;
  lc.snr_db_grid = cfg.ber.snr_db;
  lc.n_frames = cfg.ber.n_frames;
  lc.clip_gain = cfg.ber.clip_gain;
  lc.seed = cfg.seed;
  lc.threads = threads;
  std::vector<link::BerPoint> points = link::ber_curve(d.test.samples, predictor, lc, modes);

  std::ofstream os(out_dir + "/ber.csv", std::ios::trunc);
  if (!os) throw RuntimeError("ber: cannot open '" + out_dir + "/ber.csv'");
  os << "mode,snr_db,bits,errors,ber\n";
  for (const link::BerPoint& p : points)
    os << link::mode_name(p.mode) << ',' << p.snr_db << ',' << p.bits << ',' << p.errors << ','
       << p.ber << '\n';
  return points;
}

// ---- sweep-speed ------------------------------------------------------------------

struct SweepRow {
  std::string mode;
  double train_speed_kmh = 0.0;
  double speed_kmh = 0.0;
  MethodEval eval;
};

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw RuntimeError("sweep-speed: cannot open '" + path + "'");
  os << "mode,train_speed_kmh,speed_kmh,method,samples,nmse_h,nmse_p,cp_error\n";
  for (const SweepRow& r : rows)
    os << r.mode << ',' << r.train_speed_kmh << ',' << r.speed_kmh << ',' << r.eval.method << ','
       << r.eval.samples << ',' << r.eval.nmse_h << ',' << r.eval.nmse_p << ','
       << r.eval.cp_error << '\n';
}

std::string speed_dir(const std::string& out_dir, double speed_kmh) {
  std::ostringstream os;
  os << out_dir << "/speed_" << speed_kmh;
  return os.str();
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::vector<double>& speeds,
                                const std::string& mode, const std::string& checkpoint_path,
                                double train_speed_flag, int threads) {
  if (speeds.empty()) throw ConfigError("sweep-speed: empty speed list");
  if (mode != "train" && mode != "eval" && mode != "cross")
    throw ConfigError("sweep-speed: mode must be train, eval or cross");

  auto gen_at_speed = [&](double kmh) -> std::string {
    ExperimentConfig sub = cfg;
    sub.dataset.speed_kmh = kmh;
    sub.out_dir = speed_dir(cfg.out_dir, kmh);
    ensure_dir(sub.out_dir);
    cmd_gen_data(sub, threads);
    return sub.out_dir;
  };

  std::vector<SweepRow> rows;
  if (mode == "eval") {
    if (checkpoint_path.empty()) throw ConfigError("sweep-speed: eval mode needs --checkpoint");
    gan::Checkpoint ckpt = gan::load_checkpoint(checkpoint_path);
    for (double kmh : speeds) {
      std::string dir = gen_at_speed(kmh);
      DatasetDir d = load_dataset_dir(dir, false, false, true);
      MethodEval ev = evaluate_predictor(ckpt.method, d.test.samples,
                                         checkpoint_predictor(ckpt), cfg.train.lambda2, "");
      rows.push_back({mode, 0.0, kmh, ev});
    }
  } else if (mode == "train") {
    for (double kmh : speeds) {
      std::string dir = gen_at_speed(kmh);
      gan::TrainResult result = run_train(cfg, cfg.train_method, dir, dir);
      DatasetDir d = load_dataset_dir(dir, false, false, true);
      MethodEval ev = evaluate_predictor(cfg.train_method, d.test.samples,
                                         checkpoint_predictor(result.best), cfg.train.lambda2, "");
      rows.push_back({mode, kmh, kmh, ev});
    }
  } else {  // cross: train once at train_speed, evaluate across the grid
    double train_speed = train_speed_flag > 0.0 ? train_speed_flag
                                                : *std::max_element(speeds.begin(), speeds.end());
    std::string train_dir = gen_at_speed(train_speed);
    gan::TrainResult result = run_train(cfg, cfg.train_method, train_dir, train_dir);
    link::Predictor pred = checkpoint_predictor(result.best);
    for (double kmh : speeds) {
      std::string dir = kmh == train_speed ? train_dir : gen_at_speed(kmh);
      DatasetDir d = load_dataset_dir(dir, false, false, true);
      MethodEval ev = evaluate_predictor(cfg.train_method, d.test.samples, pred,
                                         cfg.train.lambda2, "");
      rows.push_back({mode, train_speed, kmh, ev});
    }
  }
  write_sweep_csv(cfg.out_dir + "/sweep.csv", rows);
  return rows;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("csipred");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"paired UL/DL CSI synthesis, adversarial DL-CSI prediction and link-level evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  int threads = 1;
  app.add_option("--config", config_path, "experiment config file (JSON)")->required();
  CLI::Option* seed_opt = app.add_option("--seed", seed_override, "master seed override");
  app.add_option("--out", out_override, "output directory override");
  app.add_option("--threads", threads, "worker threads for generation and BER frames")
      ->check(CLI::PositiveNumber);

  CLI::App* gen = app.add_subcommand("gen-data", "generate train/val/test dataset files");

  std::string train_data, train_method_flag;
  CLI::App* train = app.add_subcommand("train", "train a predictor on a generated dataset");
  train->add_option("--data", train_data, "dataset directory from gen-data")->required();
  train->add_option("--method", train_method_flag, "cpcgan | cnn");

  std::string eval_data, eval_method, eval_ckpt;
  CLI::App* eval = app.add_subcommand("eval", "metric report for a prediction method");
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--method", eval_method, "cpcgan | cnn | lmmse | stale_ul | zero")->required();
  eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint (cpcgan/cnn)");

  std::string ber_data, ber_ckpt;
  CLI::App* ber = app.add_subcommand("ber", "link-level BER sweep over the SNR grid");
  ber->add_option("--data", ber_data, "dataset directory")->required();
  ber->add_option("--checkpoint", ber_ckpt, "trained checkpoint for the predicted mode");

  std::vector<double> sweep_speeds;
  std::string sweep_mode = "train", sweep_ckpt;
  double sweep_train_speed = 0.0;
  CLI::App* sweep = app.add_subcommand("sweep-speed", "per-speed experiment sweep");
  sweep->add_option("--speeds", sweep_speeds, "speed grid in km/h")->required()->delimiter(',');
  sweep->add_option("--mode", sweep_mode, "train | eval | cross");
  sweep->add_option("--checkpoint", sweep_ckpt, "checkpoint for eval mode");
  sweep->add_option("--train-speed", sweep_train_speed, "cross mode training speed (km/h)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    ExperimentConfig cfg = load_config_file(config_path);
    if (seed_opt->count() > 0) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (cfg.out_dir.empty())
      throw ConfigError("config: no output directory (set paths.out_dir or pass --out)");
    ensure_dir(cfg.out_dir);

    if (gen->parsed()) {
      json sidecar = cmd_gen_data(cfg, threads);
      std::cout << "dataset written to " << cfg.out_dir << ": train/val/test = "
                << sidecar["splits"]["train"]["count"] << '/' << sidecar["splits"]["val"]["count"]
                << '/' << sidecar["splits"]["test"]["count"] << ", profile "
                << sidecar["profile"].get<std::string>() << ", speed "
                << cfg.dataset.speed_kmh << " km/h\n";
    } else if (train->parsed()) {
      std::string method = train_method_flag.empty() ? cfg.train_method : train_method_flag;
      if (method != "cpcgan" && method != "cnn")
        throw ConfigError("train: method must be 'cpcgan' or 'cnn'");
      archive_config(cfg, cfg.out_dir);
      gan::TrainResult result = run_train(cfg, method, train_data, cfg.out_dir);
      std::cout << "trained " << method << ": best checkpoint at batch " << result.best.counter
                << " (" << result.best.selection_criterion << "="
                << (method == "cnn" ? result.best.val_nmse_h : result.best.val_cp_error)
                << "), scored " << result.scores.size() << " checkpoints over "
                << result.total_batches << " batches\n";
    } else if (eval->parsed()) {
      archive_config(cfg, cfg.out_dir);
      MethodEval ev = run_eval_method(cfg, eval_method, eval_data, eval_ckpt, cfg.out_dir);
      write_metric_csv(cfg.out_dir + "/metrics_" + eval_method + ".csv", {ev});
      std::cout << "eval " << ev.method << " over " << ev.samples << " samples: nmse_h="
                << ev.nmse_h << " nmse_p=" << ev.nmse_p << " cp_error=" << ev.cp_error << '\n';
    } else if (ber->parsed()) {
      archive_config(cfg, cfg.out_dir);
      auto points = run_ber(cfg, ber_data, ber_ckpt, cfg.out_dir, threads);
      std::cout << "ber sweep written to " << cfg.out_dir << "/ber.csv (" << points.size()
                << " rows)\n";
    } else if (sweep->parsed()) {
      archive_config(cfg, cfg.out_dir);
      auto rows = run_sweep(cfg, sweep_speeds, sweep_mode, sweep_ckpt, sweep_train_speed, threads);
      std::cout << "sweep written to " << cfg.out_dir << "/sweep.csv (" << rows.size()
                << " rows)\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace csipred::cli
