#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "levelblend/corpus.hpp"

namespace levelblend::models {

enum class ModelKind { Vae, Gan, VaeGan };

std::string_view kind_name(ModelKind kind) noexcept;  // "VAE", "GAN", "VAEGAN"
ModelKind parse_kind(std::string_view name);          // case-insensitive, accepts "VAE-GAN"

struct ModelConfig {
  ModelKind kind = ModelKind::Vae;
  int latent_dim = 64;
  int epochs = 10000;
  double learning_rate = 0.001;
  int batch_size = 32;
  std::uint64_t seed = 1;
  double leaky_slope = 0.2;
  double kl_weight = 1.0;
  double adv_weight = 1.0;
  // GAN only: Wasserstein critic with weight clipping, trained with RMSprop
  // for critic_steps batches per generator step. With wasserstein = false the
  // GAN uses non-saturating cross-entropy and Adam at learning_rate.
  bool wasserstein = true;
  int critic_steps = 5;
  double weight_clip = 0.01;
  double critic_learning_rate = 0.00005;
  // Feature maps after the first (8x8) and second (4x4) strided layer.
  int channels_8x8 = 32;
  int channels_4x4 = 64;

  // Throws Error(InvalidConfig).
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& value);

// Encoder posterior for a batch, row-major count x latent_dim.
struct Posterior {
  std::vector<double> mean;
  std::vector<double> log_variance;
};

// A VAE, GAN or VAE-GAN. The decoder of a VAE and the generator of a GAN
// share one architecture and are both reached through decode().
//
// Inference methods are const and safe to call concurrently; training goes
// through train(), which takes ownership.
class Model {
 public:
  explicit Model(const ModelConfig& config);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const;
  ModelKind kind() const { return config().kind; }
  int latent_dim() const { return config().latent_dim; }
  bool has_encoder() const { return kind() != ModelKind::Gan; }

  // Per-cell sigmoid outputs for a batch of latents (row-major count x
  // latent_dim). Returns count x 4352 values, channel-major per segment.
  std::vector<float> decode_probabilities(std::span<const double> latents) const;

  std::vector<TileGrid> decode(std::span<const double> latents) const;

  // Throws Error(NoEncoder) for GANs.
  Posterior encode(std::span<const TileGrid> grids) const;

  // Discriminator logits; throws Error(InvalidConfig) for a plain VAE.
  std::vector<float> discriminate(std::span<const TileGrid> grids) const;

  // All parameters and buffers, concatenated in registration order.
  std::vector<float> flat_parameters() const;

  struct Impl;

 private:
  friend Impl& impl_of(Model& model);
  std::unique_ptr<Impl> impl_;
};

Model build_model(const ModelConfig& config);

// Loss terms of one epoch, averaged over samples. Terms a kind does not
// train are absent.
struct EpochRecord {
  int epoch = 0;
  std::optional<double> reconstruction;
  std::optional<double> kl;
  std::optional<double> generator;
  std::optional<double> discriminator;
};

using TrainingTrace = std::vector<EpochRecord>;

struct Manifest {
  ModelKind kind = ModelKind::Vae;
  int epochs_completed = 0;
  nlohmann::json final_losses = nlohmann::json::object();
  std::string corpus_hash;
  std::size_t corpus_size = 0;
  std::string created_at;
  std::string notes;
};

struct ModelCheckpoint {
  ModelConfig config;
  std::shared_ptr<const Model> model;
  Manifest manifest;
  TrainingTrace trace;
};

// Thrown when a loss becomes NaN or infinite; carries the epochs completed
// before the failure.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(int epoch, TrainingTrace partial);
  int epoch() const noexcept { return epoch_; }
  const TrainingTrace& partial_trace() const noexcept { return partial_; }

 private:
  int epoch_;
  TrainingTrace partial_;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

// Trains for model.config().epochs passes over the corpus. Throws
// Error(EmptyCorpus) or NonFiniteLossError.
ModelCheckpoint train(Model model, std::span<const TileGrid> corpus,
                      const EpochObserver& observer = {});

// A checkpoint is a directory holding weights.pt, manifest.json and trace.csv.
void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& dir);

// Throws Error(CorruptCheckpoint) for unreadable or truncated files and
// Error(KindMismatch) when `expected` disagrees with the manifest.
ModelCheckpoint load_checkpoint(const std::filesystem::path& dir,
                                std::optional<ModelKind> expected = std::nullopt);

// Fraction of cells reproduced by argmax(decode(encode mean)).
double reconstruction_accuracy(const Model& model, std::span<const TileGrid> grids);

}  // namespace levelblend::models
