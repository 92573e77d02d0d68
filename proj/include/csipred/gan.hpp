#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csipred/dataset.hpp"
#include "csipred/metrics.hpp"
#include "csipred/nn.hpp"

namespace csipred::gan {

struct NetworkConfig {
  int n_base = 64;  // first-stage filter count; later stages scale it
  int height = 36;  // subcarriers
  int width = 7;    // OFDM symbols
  double leaky_slope = 0.2;
};

// Encoder-decoder generator with skip concatenation. Seven stride-2 encoder
// stages (widths n,2n,4n,8n,8n,8n,8n; the first without batch norm), seven
// decoder stages mirroring them through recorded per-stage output sizes, tanh
// output head. Input and output are [N, 2, height, width].
class Generator {
 public:
  Generator(const NetworkConfig& cfg, Rng& init_rng, double init_std = nn::kDefaultInitStd);

  ag::Tensor forward(const ag::Tensor& x, bool training);
  std::vector<ag::Tensor> parameters();
  std::vector<std::vector<double>*> buffers();  // batch-norm running statistics
  const NetworkConfig& config() const { return cfg_; }
  // Spatial sizes entering each encoder stage, plus the bottleneck output.
  const std::vector<std::array<int, 2>>& stage_input_sizes() const { return enc_in_sizes_; }

  // Re-anchors every batch-norm running statistic to the given probe batch at
  // the current weights (single momentum-1 train-mode pass, no gradients), so
  // eval-mode forwards agree with the training-time normalization.
  void refresh_running_stats(const ag::Tensor& probe);

 private:
  struct EncStage {
    nn::Conv2d conv;
    std::optional<nn::BatchNorm2d> bn;
  };
  struct DecStage {
    nn::ConvTranspose2d deconv;
    std::optional<nn::BatchNorm2d> bn;
  };
  NetworkConfig cfg_;
  std::vector<EncStage> encoder_;
  std::vector<DecStage> decoder_;
  std::vector<std::array<int, 2>> enc_in_sizes_;
};

// Four stride-2 conv stages (widths n,2n,4n,8n, batch norm from the second
// on), then flatten, a single dense unit and a sigmoid. Input is the
// 4-channel [H_UL || H_DL] pair; output is [N, 1] in (0, 1).
class Discriminator {
 public:
  Discriminator(const NetworkConfig& cfg, Rng& init_rng, double init_std = nn::kDefaultInitStd);

  ag::Tensor forward(const ag::Tensor& pair, bool training);
  std::vector<ag::Tensor> parameters();
  std::vector<std::vector<double>*> buffers();

 private:
  struct Stage {
    nn::Conv2d conv;
    std::optional<nn::BatchNorm2d> bn;
  };
  NetworkConfig cfg_;
  std::vector<Stage> stages_;
  nn::Dense head_;
};

// Adversarial pieces on probability tensors.
ag::Tensor adversarial_d_loss(const ag::Tensor& p_real, const ag::Tensor& p_fake);
ag::Tensor adversarial_g_loss(const ag::Tensor& p_fake);

// -[log D(ul, dl_real) + log(1 - D(ul, dl_fake))], batch-mean. The fake input
// must already be detached from the generator graph.
ag::Tensor d_loss(Discriminator& disc, const ag::Tensor& ul, const ag::Tensor& dl_real,
                  const ag::Tensor& dl_fake_detached, bool training = true);

struct GLossParts {
  ag::Tensor total;
  double adversarial = 0.0;
  double l1 = 0.0;  // unweighted mean L1 term
};

// -log D(ul, G(ul)) + lambda1 * mean-L1(dl_real - fake), batch-mean, using the
// non-saturating generator objective.
GLossParts g_loss(Discriminator& disc, const ag::Tensor& ul, const ag::Tensor& dl_real,
                  const ag::Tensor& dl_fake, double lambda1, bool training = true);

struct TrainConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lambda1 = 100.0;
  double lambda2 = 1.0;
  int batch = 32;
  int n_base = 64;
  int g_updates_per_d = 2;
  int val_interval_batches = 100;
  int epochs = 1;
  std::uint64_t seed = 1;
  double leaky_slope = 0.2;
  std::string cnn_loss = "mse";  // baseline trainer loss: "mse" | "l1"

  void validate() const;
};

struct ScorePoint {
  std::int64_t counter = 0;
  double nmse_h = 0.0;
  double nmse_p = 0.0;
  double cp_error = 0.0;
};

// Full training state snapshot; payloads serialize as little-endian f32.
struct Checkpoint {
  std::string method = "cpcgan";  // "cpcgan" | "cnn"
  std::string selection_criterion = "cp_error";
  NetworkConfig net;
  data::NormalizationStats stats;
  std::int64_t counter = 0;
  double val_nmse_h = 0.0;
  double val_nmse_p = 0.0;
  double val_cp_error = 0.0;
  std::vector<std::vector<double>> gen_params, gen_buffers;
  std::vector<std::vector<double>> disc_params, disc_buffers;
  std::vector<std::vector<double>> gen_adam_m, gen_adam_v;
  std::vector<std::vector<double>> disc_adam_m, disc_adam_v;
  std::int64_t gen_adam_steps = 0;
  std::int64_t disc_adam_steps = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds a generator carrying the checkpoint's weights and running stats.
Generator generator_from_checkpoint(const Checkpoint& ckpt);

// JSON-lines training log; one record per batch and one per scoring point.
class TrainLogger {
 public:
  explicit TrainLogger(const std::string& path);
  ~TrainLogger();
  void batch(std::int64_t counter, double d_loss_value, double g_loss_value, double l1_term);
  void batch_loss(std::int64_t counter, double loss_value);
  void score(const ScorePoint& point, const std::string& criterion);
  void summary(std::int64_t total_batches, std::int64_t d_steps, std::int64_t g_steps);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct TrainResult {
  Checkpoint best;
  std::vector<ScorePoint> scores;
  std::int64_t total_batches = 0;
  std::int64_t d_steps = 0;
  std::int64_t g_steps = 0;
};

// Algorithm: per batch one discriminator Adam step then g_updates_per_d
// generator Adam steps (each with a fresh forward pass); every
// val_interval_batches the denormalized validation nmse_h/nmse_p/cp_error are
// computed and a scored checkpoint is persisted; the checkpoint minimizing
// cp_error is returned. Non-finite losses abort.
TrainResult train_cpcgan(const std::vector<data::CsiSample>& train,
                         const std::vector<data::CsiSample>& val,
                         const data::NormalizationStats& stats, const TrainConfig& cfg,
                         TrainLogger* logger = nullptr, const std::string& checkpoint_dir = "");

// Same generator architecture trained with the plain reconstruction loss and
// no discriminator; checkpoint selection by validation nmse_h.
TrainResult train_cnn_baseline(const std::vector<data::CsiSample>& train,
                               const std::vector<data::CsiSample>& val,
                               const data::NormalizationStats& stats, const TrainConfig& cfg,
                               TrainLogger* logger = nullptr,
                               const std::string& checkpoint_dir = "");

// normalize -> two-channel -> eval-mode forward -> denormalize.
CsiMatrix predict(Generator& gen, const CsiMatrix& h_ul, const data::NormalizationStats& stats);

struct MimoLinks {
  int n_rx = 1;
  int n_tx = 1;
  std::vector<CsiMatrix> links;  // row-major [n_rx][n_tx]

  const CsiMatrix& at(int r, int c) const { return links[static_cast<std::size_t>(r) * n_tx + c]; }
};

// Independent per-link prediction; no cross-link coupling.
std::vector<CsiMatrix> predict_mimo(Generator& gen, const MimoLinks& links,
                                    const data::NormalizationStats& stats);

struct EvalStats {
  double nmse_h = 0.0;
  double nmse_p = 0.0;
  double cp_error = 0.0;
};

// Mean of the per-sample metric ratios over a sample list, on denormalized
// matrices.
EvalStats evaluate_generator(Generator& gen, const std::vector<data::CsiSample>& samples,
                             const data::NormalizationStats& stats, double lambda2,
                             int batch = 32);

}  // namespace csipred::gan
