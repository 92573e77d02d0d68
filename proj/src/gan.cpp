#include "csipred/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace csipred::gan {

namespace {

int conv_out(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

constexpr int kEncoderStages = 7;
constexpr int kDecoderStages = 7;
constexpr int kEncoderMult[kEncoderStages] = {1, 2, 4, 8, 8, 8, 8};
constexpr int kDiscStages = 4;
constexpr int kDiscMult[kDiscStages] = {1, 2, 4, 8};

void check_network_config(const NetworkConfig& cfg) {
  if (cfg.n_base < 1) throw ConfigError("network: n_base must be >= 1");
  if (cfg.height < 1 || cfg.width < 1) throw ConfigError("network: input size must be positive");
  if (!(cfg.leaky_slope >= 0.0)) throw ConfigError("network: leaky_slope must be >= 0");
}

}  // namespace

Generator::Generator(const NetworkConfig& cfg, Rng& init_rng, double init_std) : cfg_(cfg) {
  check_network_config(cfg);

  int in_ch = 2;
  std::array<int, 2> size{cfg.height, cfg.width};
  enc_in_sizes_.push_back(size);
  std::vector<int> enc_out_ch;
  for (int j = 0; j < kEncoderStages; ++j) {
    const int out_ch = cfg.n_base * kEncoderMult[j];
    const bool followed_by_bn = j > 0;
    EncStage stage;
    stage.conv = nn::Conv2d(in_ch, out_ch, 3, 2, 1, init_rng, init_std, !followed_by_bn);
    if (followed_by_bn) stage.bn.emplace(out_ch, init_rng, init_std);
    encoder_.push_back(std::move(stage));
    size = {conv_out(size[0], 3, 2, 1), conv_out(size[1], 3, 2, 1)};
    if (size[0] <= 0 || size[1] <= 0)
      throw ConfigError("generator: encoder collapses a spatial dimension to zero");
    enc_in_sizes_.push_back(size);
    enc_out_ch.push_back(out_ch);
    in_ch = out_ch;
  }

  // Decoder stage i upsamples to the size entering encoder stage (8-i) and
  // mirrors its channel count; skip tensors concatenate after each stage.
  int cur_ch = enc_out_ch[kEncoderStages - 1];
  for (int i = 1; i <= kDecoderStages; ++i) {
    const int target = kEncoderStages - i;  // 0-based index of e_{8-i}
    const int out_ch = target == 0 ? 2 : enc_out_ch[target - 1];
    const bool followed_by_bn = i < kDecoderStages;
    DecStage stage;
    stage.deconv = nn::ConvTranspose2d(cur_ch, out_ch, 3, 2, 1, enc_in_sizes_[target], init_rng,
                                       init_std, !followed_by_bn);
    if (followed_by_bn) stage.bn.emplace(out_ch, init_rng, init_std);
    decoder_.push_back(std::move(stage));
    cur_ch = out_ch + (target >= 1 ? enc_out_ch[target - 1] : 0);
  }

  // Construction-time dry run to verify the forward shapes.
  ag::NoGradGuard no_grad;
  ag::Tensor probe = ag::Tensor::zeros({1, 2, cfg.height, cfg.width});
  ag::Tensor out = forward(probe, false);
  if (out.shape() != ag::Shape{1, 2, cfg.height, cfg.width})
    throw ConfigError("generator: forward dry run produced " + ag::shape_str(out.shape()));
}

ag::Tensor Generator::forward(const ag::Tensor& x, bool training) {
  if (x.shape().size() != 4 || x.dim(1) != 2 || x.dim(2) != cfg_.height || x.dim(3) != cfg_.width)
    throw RuntimeError("generator: expected input [N,2," + std::to_string(cfg_.height) + "," +
                       std::to_string(cfg_.width) + "], got " + ag::shape_str(x.shape()));
  std::vector<ag::Tensor> skips;
  skips.reserve(kEncoderStages);
  ag::Tensor cur = x;
  for (EncStage& stage : encoder_) {
    cur = stage.conv.forward(cur);
    if (stage.bn) cur = stage.bn->forward(cur, training);
    cur = ag::leaky_relu(cur, cfg_.leaky_slope);
    skips.push_back(cur);
  }
  for (std::size_t idx = 0; idx < decoder_.size(); ++idx) {
    cur = decoder_[idx].deconv.forward(cur);
    if (idx + 1 < decoder_.size()) {
      cur = decoder_[idx].bn->forward(cur, training);
      cur = ag::leaky_relu(cur, cfg_.leaky_slope);
      cur = ag::concat_channels(cur, skips[kEncoderStages - 2 - idx]);
    } else {
      cur = ag::tanh(cur);
    }
  }
  return cur;
}

std::vector<ag::Tensor> Generator::parameters() {
  std::vector<ag::Tensor> params;
  for (EncStage& stage : encoder_) {
    stage.conv.collect(params);
    if (stage.bn) stage.bn->collect(params);
  }
  for (DecStage& stage : decoder_) {
    stage.deconv.collect(params);
    if (stage.bn) stage.bn->collect(params);
  }
  return params;
}

std::vector<std::vector<double>*> Generator::buffers() {
  std::vector<std::vector<double>*> out;
  for (EncStage& stage : encoder_)
    if (stage.bn) {
      out.push_back(&stage.bn->running_mean);
      out.push_back(&stage.bn->running_var);
    }
  for (DecStage& stage : decoder_)
    if (stage.bn) {
      out.push_back(&stage.bn->running_mean);
      out.push_back(&stage.bn->running_var);
    }
  return out;
}

void Generator::refresh_running_stats(const ag::Tensor& probe) {
  std::vector<double> saved;
  for (EncStage& stage : encoder_)
    if (stage.bn) {
      saved.push_back(stage.bn->momentum);
      stage.bn->momentum = 1.0;
    }
  for (DecStage& stage : decoder_)
    if (stage.bn) {
      saved.push_back(stage.bn->momentum);
      stage.bn->momentum = 1.0;
    }
  {
    ag::NoGradGuard no_grad;
    forward(probe, true);
  }
  std::size_t i = 0;
  for (EncStage& stage : encoder_)
    if (stage.bn) stage.bn->momentum = saved[i++];
  for (DecStage& stage : decoder_)
    if (stage.bn) stage.bn->momentum = saved[i++];
}

Discriminator::Discriminator(const NetworkConfig& cfg, Rng& init_rng, double init_std)
    : cfg_(cfg) {
  check_network_config(cfg);
  int in_ch = 4;
  std::array<int, 2> size{cfg.height, cfg.width};
  for (int j = 0; j < kDiscStages; ++j) {
    const int out_ch = cfg.n_base * kDiscMult[j];
    const bool followed_by_bn = j > 0;
    Stage stage;
    stage.conv = nn::Conv2d(in_ch, out_ch, 3, 2, 1, init_rng, init_std, !followed_by_bn);
    if (followed_by_bn) stage.bn.emplace(out_ch, init_rng, init_std);
    stages_.push_back(std::move(stage));
    size = {conv_out(size[0], 3, 2, 1), conv_out(size[1], 3, 2, 1)};
    if (size[0] <= 0 || size[1] <= 0)
      throw ConfigError("discriminator: input too small for the conv stack");
    in_ch = out_ch;
  }
  head_ = nn::Dense(in_ch * size[0] * size[1], 1, init_rng, init_std);
}

ag::Tensor Discriminator::forward(const ag::Tensor& pair, bool training) {
  if (pair.shape().size() != 4 || pair.dim(1) != 4 || pair.dim(2) != cfg_.height ||
      pair.dim(3) != cfg_.width)
    throw RuntimeError("discriminator: expected input [N,4," + std::to_string(cfg_.height) + "," +
                       std::to_string(cfg_.width) + "], got " + ag::shape_str(pair.shape()));
  ag::Tensor cur = pair;
  for (Stage& stage : stages_) {
    cur = stage.conv.forward(cur);
    if (stage.bn) cur = stage.bn->forward(cur, training);
    cur = ag::leaky_relu(cur, cfg_.leaky_slope);
  }
  cur = ag::flatten2d(cur);
  cur = head_.forward(cur);
  return ag::sigmoid(cur);
}

std::vector<ag::Tensor> Discriminator::parameters() {
  std::vector<ag::Tensor> params;
  for (Stage& stage : stages_) {
    stage.conv.collect(params);
    if (stage.bn) stage.bn->collect(params);
  }
  head_.collect(params);
  return params;
}

std::vector<std::vector<double>*> Discriminator::buffers() {
  std::vector<std::vector<double>*> out;
  for (Stage& stage : stages_)
    if (stage.bn) {
      out.push_back(&stage.bn->running_mean);
      out.push_back(&stage.bn->running_var);
    }
  return out;
}

ag::Tensor adversarial_d_loss(const ag::Tensor& p_real, const ag::Tensor& p_fake) {
  return ag::add(ag::bce_loss(p_real, 1.0), ag::bce_loss(p_fake, 0.0));
}

ag::Tensor adversarial_g_loss(const ag::Tensor& p_fake) { return ag::bce_loss(p_fake, 1.0); }

ag::Tensor d_loss(Discriminator& disc, const ag::Tensor& ul, const ag::Tensor& dl_real,
                  const ag::Tensor& dl_fake_detached, bool training) {
  if (dl_fake_detached.requires_grad())
    throw RuntimeError("d_loss: fake input must be detached from the generator");
  ag::Tensor p_real = disc.forward(ag::concat_channels(ul, dl_real), training);
  ag::Tensor p_fake = disc.forward(ag::concat_channels(ul, dl_fake_detached), training);
  return adversarial_d_loss(p_real, p_fake);
}

GLossParts g_loss(Discriminator& disc, const ag::Tensor& ul, const ag::Tensor& dl_real,
                  const ag::Tensor& dl_fake, double lambda1, bool training) {
  ag::Tensor p_fake = disc.forward(ag::concat_channels(ul, dl_fake), training);
  ag::Tensor adv = adversarial_g_loss(p_fake);
  ag::Tensor l1 = ag::l1_loss(dl_fake, dl_real);
  GLossParts parts;
  parts.adversarial = adv.scalar();
  parts.l1 = l1.scalar();
  parts.total = ag::add(adv, ag::scale(l1, lambda1));
  return parts;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("train: beta1/beta2 must lie in [0,1)");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("train: lambdas must be >= 0");
  if (batch < 2) throw ConfigError("train: batch must be >= 2");
  if (n_base < 1) throw ConfigError("train: n_base must be >= 1");
  if (g_updates_per_d < 1) throw ConfigError("train: g_updates_per_d must be >= 1");
  if (val_interval_batches < 1) throw ConfigError("train: val_interval_batches must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cnn_loss != "mse" && cnn_loss != "l1")
    throw ConfigError("train: cnn_loss must be 'mse' or 'l1'");
}

// ---- checkpoint serialization ----------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'S', 'C', 'K'};

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

void write_group(std::ostream& os, const std::vector<std::vector<double>>& group) {
  for (const auto& tensor : group)
    for (double v : tensor) {
      float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                            static_cast<unsigned char>(bits >> 16),
                            static_cast<unsigned char>(bits >> 24)};
      os.write(reinterpret_cast<const char*>(b), 4);
    }
}

void read_group(std::istream& is, std::vector<std::vector<double>>& group,
                const std::vector<std::uint64_t>& sizes) {
  group.clear();
  for (std::uint64_t size : sizes) {
    std::vector<double> tensor(size);
    for (std::uint64_t i = 0; i < size; ++i) {
      unsigned char b[4];
      is.read(reinterpret_cast<char*>(b), 4);
      std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                           (static_cast<std::uint32_t>(b[1]) << 8) |
                           (static_cast<std::uint32_t>(b[2]) << 16) |
                           (static_cast<std::uint32_t>(b[3]) << 24);
      float f;
      std::memcpy(&f, &bits, 4);
      tensor[i] = f;
    }
    group.push_back(std::move(tensor));
  }
}

std::vector<std::uint64_t> group_sizes(const std::vector<std::vector<double>>& group) {
  std::vector<std::uint64_t> sizes;
  sizes.reserve(group.size());
  for (const auto& tensor : group) sizes.push_back(tensor.size());
  return sizes;
}

struct GroupRef {
  const char* name;
  std::vector<std::vector<double>> Checkpoint::* member;
};

constexpr std::array<GroupRef, 8> kGroups = {{
    {"gen_params", &Checkpoint::gen_params},
    {"gen_buffers", &Checkpoint::gen_buffers},
    {"disc_params", &Checkpoint::disc_params},
    {"disc_buffers", &Checkpoint::disc_buffers},
    {"gen_adam_m", &Checkpoint::gen_adam_m},
    {"gen_adam_v", &Checkpoint::gen_adam_v},
    {"disc_adam_m", &Checkpoint::disc_adam_m},
    {"disc_adam_v", &Checkpoint::disc_adam_v},
}};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json manifest = {
      {"version", 1},
      {"method", ckpt.method},
      {"criterion", ckpt.selection_criterion},
      {"net",
       {{"n_base", ckpt.net.n_base},
        {"height", ckpt.net.height},
        {"width", ckpt.net.width},
        {"leaky_slope", ckpt.net.leaky_slope}}},
      {"stats", {{"lo", ckpt.stats.lo}, {"hi", ckpt.stats.hi}}},
      {"counter", ckpt.counter},
      {"metrics",
       {{"nmse_h", ckpt.val_nmse_h}, {"nmse_p", ckpt.val_nmse_p}, {"cp_error", ckpt.val_cp_error}}},
      {"adam", {{"gen_steps", ckpt.gen_adam_steps}, {"disc_steps", ckpt.disc_adam_steps}}},
  };
  nlohmann::json groups = nlohmann::json::object();
  for (const GroupRef& g : kGroups) groups[g.name] = group_sizes(ckpt.*(g.member));
  manifest["groups"] = groups;

  std::string header = manifest.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw RuntimeError("checkpoint: cannot open '" + path + "' for writing");
  os.write(kCheckpointMagic, 4);
  write_u64(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const GroupRef& g : kGroups) write_group(os, ckpt.*(g.member));
  if (!os) throw RuntimeError("checkpoint: write failure on '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RuntimeError("checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw RuntimeError("checkpoint: bad magic in '" + path + "'");
  std::uint64_t header_len = read_u64(is);
  std::string header(header_len, '\0');
  is.read(header.data(), static_cast<std::streamsize>(header_len));
  nlohmann::json manifest = nlohmann::json::parse(header);

  Checkpoint ckpt;
  ckpt.method = manifest.at("method").get<std::string>();
  ckpt.selection_criterion = manifest.at("criterion").get<std::string>();
  ckpt.net.n_base = manifest.at("net").at("n_base").get<int>();
  ckpt.net.height = manifest.at("net").at("height").get<int>();
  ckpt.net.width = manifest.at("net").at("width").get<int>();
  ckpt.net.leaky_slope = manifest.at("net").at("leaky_slope").get<double>();
  ckpt.stats.lo = manifest.at("stats").at("lo").get<double>();
  ckpt.stats.hi = manifest.at("stats").at("hi").get<double>();
  ckpt.counter = manifest.at("counter").get<std::int64_t>();
  ckpt.val_nmse_h = manifest.at("metrics").at("nmse_h").get<double>();
  ckpt.val_nmse_p = manifest.at("metrics").at("nmse_p").get<double>();
  ckpt.val_cp_error = manifest.at("metrics").at("cp_error").get<double>();
  ckpt.gen_adam_steps = manifest.at("adam").at("gen_steps").get<std::int64_t>();
  ckpt.disc_adam_steps = manifest.at("adam").at("disc_steps").get<std::int64_t>();

  for (const GroupRef& g : kGroups) {
    auto sizes = manifest.at("groups").at(g.name).get<std::vector<std::uint64_t>>();
    read_group(is, ckpt.*(g.member), sizes);
  }
  if (!is) throw RuntimeError("checkpoint: truncated file '" + path + "'");
  return ckpt;
}

namespace {

std::vector<std::vector<double>> copy_params(std::vector<ag::Tensor> params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const ag::Tensor& p : params) out.push_back(p.values());
  return out;
}

std::vector<std::vector<double>> copy_buffers(const std::vector<std::vector<double>*>& buffers) {
  std::vector<std::vector<double>> out;
  out.reserve(buffers.size());
  for (const auto* b : buffers) out.push_back(*b);
  return out;
}

void restore_params(std::vector<ag::Tensor> params, const std::vector<std::vector<double>>& state,
                    const char* what) {
  if (params.size() != state.size())
    throw RuntimeError(std::string("checkpoint: ") + what + " tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].values().size() != state[i].size())
      throw RuntimeError(std::string("checkpoint: ") + what + " tensor size mismatch");
    params[i].values() = state[i];
  }
}

void restore_buffers(const std::vector<std::vector<double>*>& buffers,
                     const std::vector<std::vector<double>>& state, const char* what) {
  if (buffers.size() != state.size())
    throw RuntimeError(std::string("checkpoint: ") + what + " buffer count mismatch");
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    if (buffers[i]->size() != state[i].size())
      throw RuntimeError(std::string("checkpoint: ") + what + " buffer size mismatch");
    *buffers[i] = state[i];
  }
}

}  // namespace

Generator generator_from_checkpoint(const Checkpoint& ckpt) {
  Rng dummy(0);
  Generator gen(ckpt.net, dummy);
  restore_params(gen.parameters(), ckpt.gen_params, "generator");
  restore_buffers(gen.buffers(), ckpt.gen_buffers, "generator");
  return gen;
}

// ---- training ----------------------------------------------------------------

struct TrainLogger::Impl {
  std::ofstream os;
};

TrainLogger::TrainLogger(const std::string& path) : impl_(std::make_unique<Impl>()) {
  impl_->os.open(path, std::ios::trunc);
  if (!impl_->os) throw RuntimeError("train log: cannot open '" + path + "'");
}

TrainLogger::~TrainLogger() = default;

void TrainLogger::batch(std::int64_t counter, double d_loss_value, double g_loss_value,
                        double l1_term) {
  nlohmann::json rec = {{"type", "batch"},
                        {"counter", counter},
                        {"d_loss", d_loss_value},
                        {"g_loss", g_loss_value},
                        {"l1_term", l1_term}};
  impl_->os << rec.dump() << '\n';
}

void TrainLogger::batch_loss(std::int64_t counter, double loss_value) {
  nlohmann::json rec = {{"type", "batch"}, {"counter", counter}, {"loss", loss_value}};
  impl_->os << rec.dump() << '\n';
}

void TrainLogger::score(const ScorePoint& point, const std::string& criterion) {
  nlohmann::json rec = {{"type", "score"},       {"counter", point.counter},
                        {"nmse_h", point.nmse_h}, {"nmse_p", point.nmse_p},
                        {"cp_error", point.cp_error}, {"criterion", criterion}};
  impl_->os << rec.dump() << '\n';
}

void TrainLogger::summary(std::int64_t total_batches, std::int64_t d_steps, std::int64_t g_steps) {
  nlohmann::json rec = {{"type", "summary"},
                        {"total_batches", total_batches},
                        {"d_steps", d_steps},
                        {"g_steps", g_steps}};
  impl_->os << rec.dump() << '\n';
  impl_->os.flush();
}

namespace {

void check_sample_dims(const std::vector<data::CsiSample>& samples, int k, int t,
                       const char* which) {
  for (const data::CsiSample& s : samples) {
    if (s.h_ul.n_subcarriers != k || s.h_ul.n_symbols != t || s.h_dl.n_subcarriers != k ||
        s.h_dl.n_symbols != t)
      throw ConfigError(std::string("train: ") + which +
                        " set contains samples that do not match the network grid");
  }
}

// Normalized two-channel payloads, flattened per sample.
struct NormalizedSet {
  int k = 0, t = 0;
  std::vector<std::vector<double>> ul, dl;
};

NormalizedSet normalize_set(const std::vector<data::CsiSample>& samples,
                            const data::NormalizationStats& stats) {
  NormalizedSet out;
  out.k = samples.front().h_ul.n_subcarriers;
  out.t = samples.front().h_ul.n_symbols;
  out.ul.reserve(samples.size());
  out.dl.reserve(samples.size());
  for (const data::CsiSample& s : samples) {
    out.ul.push_back(data::normalize(s.h_ul, stats).values());
    out.dl.push_back(data::normalize(s.h_dl, stats).values());
  }
  return out;
}

ag::Tensor stack_batch(const std::vector<std::vector<double>>& flats,
                       const std::vector<std::size_t>& order, std::size_t lo, std::size_t hi,
                       int k, int t) {
  const int b = static_cast<int>(hi - lo);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(b) * flats[order[lo]].size());
  for (std::size_t i = lo; i < hi; ++i)
    values.insert(values.end(), flats[order[i]].begin(), flats[order[i]].end());
  return ag::Tensor::from_values({b, 2, k, t}, std::move(values));
}

Checkpoint snapshot_state(const std::string& method, const std::string& criterion,
                          const NetworkConfig& net, const data::NormalizationStats& stats,
                          Generator& gen, Discriminator* disc, nn::Adam& adam_g, nn::Adam* adam_d,
                          const ScorePoint& point) {
  Checkpoint ckpt;
  ckpt.method = method;
  ckpt.selection_criterion = criterion;
  ckpt.net = net;
  ckpt.stats = stats;
  ckpt.counter = point.counter;
  ckpt.val_nmse_h = point.nmse_h;
  ckpt.val_nmse_p = point.nmse_p;
  ckpt.val_cp_error = point.cp_error;
  ckpt.gen_params = copy_params(gen.parameters());
  ckpt.gen_buffers = copy_buffers(gen.buffers());
  ckpt.gen_adam_m = adam_g.first_moments();
  ckpt.gen_adam_v = adam_g.second_moments();
  ckpt.gen_adam_steps = adam_g.step_count();
  if (disc != nullptr && adam_d != nullptr) {
    ckpt.disc_params = copy_params(disc->parameters());
    ckpt.disc_buffers = copy_buffers(disc->buffers());
    ckpt.disc_adam_m = adam_d->first_moments();
    ckpt.disc_adam_v = adam_d->second_moments();
    ckpt.disc_adam_steps = adam_d->step_count();
  }
  return ckpt;
}

std::string checkpoint_file(const std::string& dir, std::int64_t counter) {
  std::ostringstream os;
  os << dir << "/ckpt_" << std::setw(8) << std::setfill('0') << counter << ".ckpt";
  return os.str();
}

void ensure_finite(double value, const char* what, std::int64_t counter) {
  if (!std::isfinite(value))
    throw RuntimeError(std::string("training aborted: non-finite ") + what + " at batch " +
                       std::to_string(counter));
}

}  // namespace

EvalStats evaluate_generator(Generator& gen, const std::vector<data::CsiSample>& samples,
                             const data::NormalizationStats& stats, double lambda2, int batch) {
  if (samples.empty()) throw ConfigError("evaluate: empty sample set");
  if (batch < 1) throw ConfigError("evaluate: batch must be >= 1");
  ag::NoGradGuard no_grad;
  const int k = gen.config().height;
  const int t = gen.config().width;
  check_sample_dims(samples, k, t, "evaluation");
  const std::size_t per_sample = 2 * static_cast<std::size_t>(k) * t;

  double sum_h = 0.0, sum_p = 0.0;
  for (std::size_t lo = 0; lo < samples.size(); lo += static_cast<std::size_t>(batch)) {
    const std::size_t hi = std::min(samples.size(), lo + static_cast<std::size_t>(batch));
    const int b = static_cast<int>(hi - lo);
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(b) * per_sample);
    for (std::size_t i = lo; i < hi; ++i) {
      auto flat = data::normalize(samples[i].h_ul, stats).values();
      values.insert(values.end(), flat.begin(), flat.end());
    }
    ag::Tensor out = gen.forward(ag::Tensor::from_values({b, 2, k, t}, std::move(values)), false);
    for (std::size_t i = lo; i < hi; ++i) {
      std::vector<double> slice(out.values().begin() + static_cast<std::ptrdiff_t>((i - lo) * per_sample),
                                out.values().begin() + static_cast<std::ptrdiff_t>((i - lo + 1) * per_sample));
      CsiMatrix est = data::denormalize(ag::Tensor::from_values({2, k, t}, std::move(slice)),
                                        stats, Band::kDownlink);
      sum_h += metrics::nmse_h(samples[i].h_dl, est);
      sum_p += metrics::nmse_p_of(samples[i].h_dl, est);
    }
  }
  EvalStats es;
  es.nmse_h = sum_h / static_cast<double>(samples.size());
  es.nmse_p = sum_p / static_cast<double>(samples.size());
  es.cp_error = metrics::cp_error(es.nmse_h, es.nmse_p, lambda2);
  return es;
}

namespace {

// Shared trainer skeleton; with_discriminator selects the adversarial
// algorithm versus the plain reconstruction baseline.
TrainResult run_training(const std::vector<data::CsiSample>& train,
                         const std::vector<data::CsiSample>& val,
                         const data::NormalizationStats& stats, const TrainConfig& cfg,
                         TrainLogger* logger, const std::string& checkpoint_dir,
                         bool with_discriminator) {
  cfg.validate();
  if (train.empty() || val.empty()) throw ConfigError("train: empty train or validation set");
  const int k = train.front().h_ul.n_subcarriers;
  const int t = train.front().h_ul.n_symbols;
  if (train.front().h_dl.n_subcarriers != k || train.front().h_dl.n_symbols != t)
    throw ConfigError("train: the adversarial pipeline needs equal UL and DL grid dimensions");
  check_sample_dims(train, k, t, "train");
  check_sample_dims(val, k, t, "validation");

  NetworkConfig net{cfg.n_base, k, t, cfg.leaky_slope};
  Rng gen_rng(derive_seed(cfg.seed, RngStream::kGeneratorInit, 0));
  Generator gen(net, gen_rng);
  nn::AdamConfig adam_cfg{cfg.lr, cfg.beta1, cfg.beta2, 1e-8};
  nn::Adam adam_g(gen.parameters(), adam_cfg);

  std::optional<Discriminator> disc;
  std::optional<nn::Adam> adam_d;
  if (with_discriminator) {
    Rng disc_rng(derive_seed(cfg.seed, RngStream::kDiscriminatorInit, 0));
    disc.emplace(net, disc_rng);
    adam_d.emplace(disc->parameters(), adam_cfg);
  }

  const std::string criterion = with_discriminator ? "cp_error" : "nmse_h";
  const std::string method = with_discriminator ? "cpcgan" : "cnn";

  NormalizedSet norm = normalize_set(train, stats);

  TrainResult result;
  std::optional<Checkpoint> best;
  double best_score = 0.0;
  std::int64_t counter = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  // Fixed probe batch for re-anchoring batch-norm statistics at each scoring
  // point: the first training samples in generation order.
  const std::size_t probe_count = std::min<std::size_t>(train.size(),
                                                        static_cast<std::size_t>(cfg.batch));
  ag::Tensor probe = stack_batch(norm.ul, order, 0, probe_count, k, t);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, RngStream::kShuffle, static_cast<std::uint64_t>(epoch)));
    shuffle_in_place(order, shuffle_rng);

    for (std::size_t lo = 0; lo < train.size(); lo += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t hi = std::min(train.size(), lo + static_cast<std::size_t>(cfg.batch));
      if (hi - lo < 2) continue;  // batch norm needs at least two rows

      ag::Tensor ul = stack_batch(norm.ul, order, lo, hi, k, t);
      ag::Tensor dl = stack_batch(norm.dl, order, lo, hi, k, t);

      double d_value = 0.0, g_value = 0.0, l1_value = 0.0;
      if (with_discriminator) {
        ag::Tensor fake_detached;
        {
          ag::NoGradGuard no_grad;
          fake_detached = gen.forward(ul, true);
        }
        ag::Tensor d_total = d_loss(*disc, ul, dl, fake_detached, true);
        d_value = d_total.scalar();
        ensure_finite(d_value, "discriminator loss", counter + 1);
        adam_d->zero_grad();
        ag::backward(d_total);
        adam_d->step();

        for (int u = 0; u < cfg.g_updates_per_d; ++u) {
          ag::Tensor fake = gen.forward(ul, true);
          GLossParts parts = g_loss(*disc, ul, dl, fake, cfg.lambda1, true);
          g_value = parts.total.scalar();
          l1_value = parts.l1;
          ensure_finite(g_value, "generator loss", counter + 1);
          adam_g.zero_grad();
          ag::backward(parts.total);
          adam_g.step();
        }
      } else {
        ag::Tensor fake = gen.forward(ul, true);
        ag::Tensor loss =
            cfg.cnn_loss == "l1" ? ag::l1_loss(fake, dl) : ag::mse_loss(fake, dl);
        g_value = loss.scalar();
        ensure_finite(g_value, "loss", counter + 1);
        adam_g.zero_grad();
        ag::backward(loss);
        adam_g.step();
      }

      ++counter;
      if (logger) {
        if (with_discriminator)
          logger->batch(counter, d_value, g_value, l1_value);
        else
          logger->batch_loss(counter, g_value);
      }

      if (counter % cfg.val_interval_batches == 0) {
        gen.refresh_running_stats(probe);
        EvalStats es = evaluate_generator(gen, val, stats, cfg.lambda2, cfg.batch);
        ScorePoint point{counter, es.nmse_h, es.nmse_p, es.cp_error};
        result.scores.push_back(point);
        if (logger) logger->score(point, criterion);
        Checkpoint snap = snapshot_state(method, criterion, net, stats, gen,
                                         disc ? &*disc : nullptr, adam_g,
                                         adam_d ? &*adam_d : nullptr, point);
        if (!checkpoint_dir.empty())
          save_checkpoint(snap, checkpoint_file(checkpoint_dir, counter));
        const double score = with_discriminator ? point.cp_error : point.nmse_h;
        if (!best || score < best_score) {
          best = std::move(snap);
          best_score = score;
        }
      }
    }
  }

  if (!best)
    throw ConfigError("train: no scored checkpoint was produced; the run covered " +
                      std::to_string(counter) + " batches but val_interval_batches=" +
                      std::to_string(cfg.val_interval_batches) +
                      " — raise epochs or lower the interval");

  result.best = std::move(*best);
  result.total_batches = counter;
  result.d_steps = adam_d ? adam_d->step_count() : 0;
  result.g_steps = adam_g.step_count();
  if (logger) logger->summary(result.total_batches, result.d_steps, result.g_steps);
  return result;
}

}  // namespace

TrainResult train_cpcgan(const std::vector<data::CsiSample>& train,
                         const std::vector<data::CsiSample>& val,
                         const data::NormalizationStats& stats, const TrainConfig& cfg,
                         TrainLogger* logger, const std::string& checkpoint_dir) {
  return run_training(train, val, stats, cfg, logger, checkpoint_dir, true);
}

TrainResult train_cnn_baseline(const std::vector<data::CsiSample>& train,
                               const std::vector<data::CsiSample>& val,
                               const data::NormalizationStats& stats, const TrainConfig& cfg,
                               TrainLogger* logger, const std::string& checkpoint_dir) {
  return run_training(train, val, stats, cfg, logger, checkpoint_dir, false);
}

CsiMatrix predict(Generator& gen, const CsiMatrix& h_ul, const data::NormalizationStats& stats) {
  const int k = gen.config().height;
  const int t = gen.config().width;
  if (h_ul.n_subcarriers != k || h_ul.n_symbols != t)
    throw RuntimeError("predict: input does not match the trained grid dimensions");
  ag::NoGradGuard no_grad;
  ag::Tensor x = data::normalize(h_ul, stats);
  ag::Tensor out = gen.forward(ag::Tensor::from_values({1, 2, k, t}, x.values()), false);
  ag::Tensor single = ag::Tensor::from_values({2, k, t}, out.values());
  return data::denormalize(single, stats, Band::kDownlink);
}

std::vector<CsiMatrix> predict_mimo(Generator& gen, const MimoLinks& links,
                                    const data::NormalizationStats& stats) {
  if (links.n_rx < 1 || links.n_tx < 1 ||
      links.links.size() != static_cast<std::size_t>(links.n_rx) * links.n_tx)
    throw ConfigError("predict_mimo: link matrix does not match n_rx x n_tx");
  for (const CsiMatrix& m : links.links)
    if (!m.same_shape(links.links.front()))
      throw ConfigError("predict_mimo: ragged link shapes");
  std::vector<CsiMatrix> out;
  out.reserve(links.links.size());
  for (const CsiMatrix& m : links.links) out.push_back(predict(gen, m, stats));
  return out;
}

}  // namespace csipred::gan
