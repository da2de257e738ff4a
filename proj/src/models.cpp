#include "levelblend/models.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

namespace levelblend::models {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

constexpr int kBottleneckSide = 4;

// Module constructors draw from torch's global generator.
std::mutex& init_mutex() {
  static std::mutex m;
  return m;
}

struct ConvTrunkImpl : nn::Module {
  ConvTrunkImpl(int c1, int c2, double slope)
      : conv1(register_module("conv1", nn::Conv2d(nn::Conv2dOptions(kTileTypeCount, c1, 4).stride(2).padding(1)))),
        bn1(register_module("bn1", nn::BatchNorm2d(c1))),
        conv2(register_module("conv2", nn::Conv2d(nn::Conv2dOptions(c1, c2, 4).stride(2).padding(1)))),
        bn2(register_module("bn2", nn::BatchNorm2d(c2))),
        slope(slope) {}

  torch::Tensor forward(torch::Tensor x) {
    const auto act = F::LeakyReLUFuncOptions().negative_slope(slope);
    x = F::leaky_relu(bn1(conv1(x)), act);  // 8x8
    x = F::leaky_relu(bn2(conv2(x)), act);  // 4x4
    return x.flatten(1);
  }

  nn::Conv2d conv1;
  nn::BatchNorm2d bn1;
  nn::Conv2d conv2;
  nn::BatchNorm2d bn2;
  double slope;
};
TORCH_MODULE(ConvTrunk);

struct EncoderImpl : nn::Module {
  EncoderImpl(const ModelConfig& c)
      : trunk(register_module("trunk", ConvTrunk(c.channels_8x8, c.channels_4x4, c.leaky_slope))),
        mean(register_module("mean", nn::Linear(c.channels_4x4 * kBottleneckSide * kBottleneckSide, c.latent_dim))),
        log_variance(register_module("log_variance", nn::Linear(c.channels_4x4 * kBottleneckSide * kBottleneckSide, c.latent_dim))) {}

  std::pair<torch::Tensor, torch::Tensor> forward(torch::Tensor x) {
    auto h = trunk(x);
    return {mean(h), log_variance(h)};
  }

  ConvTrunk trunk;
  nn::Linear mean;
  nn::Linear log_variance;
};
TORCH_MODULE(Encoder);

// 64 -> 4x4 maps -> non-strided 3x3 conv -> two stride-2 transposed convs.
// Returns logits; sigmoid is applied by the caller.
struct DecoderImpl : nn::Module {
  DecoderImpl(const ModelConfig& c)
      : project(register_module("project", nn::Linear(c.latent_dim, c.channels_4x4 * kBottleneckSide * kBottleneckSide))),
        bn0(register_module("bn0", nn::BatchNorm2d(c.channels_4x4))),
        conv(register_module("conv", nn::Conv2d(nn::Conv2dOptions(c.channels_4x4, c.channels_4x4, 3).padding(1)))),
        bn1(register_module("bn1", nn::BatchNorm2d(c.channels_4x4))),
        up1(register_module("up1", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(c.channels_4x4, c.channels_8x8, 4).stride(2).padding(1)))),
        bn2(register_module("bn2", nn::BatchNorm2d(c.channels_8x8))),
        up2(register_module("up2", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(c.channels_8x8, kTileTypeCount, 4).stride(2).padding(1)))),
        channels(c.channels_4x4) {}

  torch::Tensor forward(torch::Tensor z) {
    auto h = project(z).view({-1, channels, kBottleneckSide, kBottleneckSide});
    h = torch::relu(bn0(h));
    h = torch::relu(bn1(conv(h)));
    h = torch::relu(bn2(up1(h)));  // 8x8
    return up2(h);                  // 16x16
  }

  nn::Linear project;
  nn::BatchNorm2d bn0;
  nn::Conv2d conv;
  nn::BatchNorm2d bn1;
  nn::ConvTranspose2d up1;
  nn::BatchNorm2d bn2;
  nn::ConvTranspose2d up2;
  int64_t channels;
};
TORCH_MODULE(Decoder);

struct DiscriminatorImpl : nn::Module {
  DiscriminatorImpl(const ModelConfig& c)
      : trunk(register_module("trunk", ConvTrunk(c.channels_8x8, c.channels_4x4, c.leaky_slope))),
        head(register_module("head", nn::Linear(c.channels_4x4 * kBottleneckSide * kBottleneckSide, 1))) {}

  torch::Tensor forward(torch::Tensor x) { return head(trunk(x)).squeeze(1); }

  ConvTrunk trunk;
  nn::Linear head;
};
TORCH_MODULE(Discriminator);

torch::Tensor one_hot_batch(std::span<const TileGrid> grids) {
  auto out = torch::zeros({static_cast<int64_t>(grids.size()), kTileTypeCount, kSegmentSize, kSegmentSize});
  auto* data = out.data_ptr<float>();
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const OneHotGrid oh = one_hot(grids[i]);
    std::copy(oh.begin(), oh.end(), data + i * kOneHotSize);
  }
  return out;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void append_module_tensors(const nn::Module& module, std::vector<float>& out) {
  for (const auto& p : module.parameters()) {
    auto t = p.detach().contiguous().view(-1);
    out.insert(out.end(), t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
  }
  for (const auto& b : module.buffers()) {
    if (b.scalar_type() != torch::kFloat) continue;  // skips num_batches_tracked
    auto t = b.detach().contiguous().view(-1);
    out.insert(out.end(), t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
  }
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(9);
  s << *v;
  return s.str();
}

std::optional<double> parse_optional(const std::string& field) {
  if (field.empty()) return std::nullopt;
  return std::stod(field);
}

}  // namespace

struct Model::Impl {
  ModelConfig config;
  mutable Encoder encoder{nullptr};
  mutable Decoder decoder{nullptr};
  mutable Discriminator discriminator{nullptr};

  void set_training(bool on) const {
    if (encoder) encoder->train(on);
    decoder->train(on);
    if (discriminator) discriminator->train(on);
  }
};

Model::Impl& impl_of(Model& model) { return *model.impl_; }

std::string_view kind_name(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::Vae: return "VAE";
    case ModelKind::Gan: return "GAN";
    case ModelKind::VaeGan: return "VAEGAN";
  }
  return "VAE";
}

ModelKind parse_kind(std::string_view name) {
  std::string upper;
  for (char c : name) {
    if (c != '-' && c != '_') upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  if (upper == "VAE") return ModelKind::Vae;
  if (upper == "GAN") return ModelKind::Gan;
  if (upper == "VAEGAN") return ModelKind::VaeGan;
  throw Error(ErrorCode::InvalidConfig, "unknown model kind '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (latent_dim < 1) fail("latent_dim must be positive");
  if (epochs < 1) fail("epochs must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) fail("leaky_slope must lie in [0, 1)");
  if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight)) fail("kl_weight must be non-negative");
  if (!(adv_weight >= 0.0) || !std::isfinite(adv_weight)) fail("adv_weight must be non-negative");
  if (!(critic_learning_rate > 0.0) || !std::isfinite(critic_learning_rate)) fail("critic_learning_rate must be positive");
  if (critic_steps < 1) fail("critic_steps must be at least 1");
  if (!(weight_clip > 0.0) || !std::isfinite(weight_clip)) fail("weight_clip must be positive");
  if (channels_8x8 < 1 || channels_4x4 < 1) fail("channel widths must be positive");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"kind", kind_name(c.kind)},
      {"latent_dim", c.latent_dim},
      {"epochs", c.epochs},
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"leaky_slope", c.leaky_slope},
      {"kl_weight", c.kl_weight},
      {"adv_weight", c.adv_weight},
      {"gan_loss", c.wasserstein ? "wasserstein" : "bce"},
      {"critic_steps", c.critic_steps},
      {"weight_clip", c.weight_clip},
      {"critic_learning_rate", c.critic_learning_rate},
      {"channels_8x8", c.channels_8x8},
      {"channels_4x4", c.channels_4x4},
  };
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    if (j.contains("kind")) c.kind = parse_kind(j.at("kind").get<std::string>());
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.kl_weight = j.value("kl_weight", c.kl_weight);
    c.adv_weight = j.value("adv_weight", c.adv_weight);
    if (j.contains("gan_loss")) {
      const auto loss = j.at("gan_loss").get<std::string>();
      if (loss != "wasserstein" && loss != "bce") throw Error(ErrorCode::InvalidConfig, "gan_loss is wasserstein or bce");
      c.wasserstein = loss == "wasserstein";
    }
    c.critic_steps = j.value("critic_steps", c.critic_steps);
    c.weight_clip = j.value("weight_clip", c.weight_clip);
    c.critic_learning_rate = j.value("critic_learning_rate", c.critic_learning_rate);
    c.channels_8x8 = j.value("channels_8x8", c.channels_8x8);
    c.channels_4x4 = j.value("channels_4x4", c.channels_4x4);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

Model::Model(const ModelConfig& config) : impl_(std::make_unique<Impl>()) {
  config.validate();
  impl_->config = config;
  std::lock_guard lock(init_mutex());
  torch::manual_seed(config.seed);
  if (config.kind != ModelKind::Gan) impl_->encoder = Encoder(config);
  impl_->decoder = Decoder(config);
  if (config.kind != ModelKind::Vae) impl_->discriminator = Discriminator(config);
  impl_->set_training(false);
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

const ModelConfig& Model::config() const { return impl_->config; }

Model build_model(const ModelConfig& config) { return Model(config); }

std::vector<float> Model::decode_probabilities(std::span<const double> latents) const {
  const auto dim = static_cast<std::size_t>(latent_dim());
  if (latents.empty() || latents.size() % dim != 0) {
    throw Error(ErrorCode::InvalidShape, "latent batch must be a positive multiple of " +
                                             std::to_string(dim) + " values");
  }
  if (!std::all_of(latents.begin(), latents.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::NonFiniteLatent, "latent vector contains a non-finite entry");
  }
  torch::NoGradGuard no_grad;
  const auto count = static_cast<int64_t>(latents.size() / dim);
  std::vector<float> z_values(latents.begin(), latents.end());
  auto z = torch::from_blob(z_values.data(), {count, static_cast<int64_t>(dim)}, torch::kFloat);
  auto probs = torch::sigmoid(impl_->decoder(z)).contiguous();
  const float* p = probs.data_ptr<float>();
  return std::vector<float>(p, p + probs.numel());
}

std::vector<TileGrid> Model::decode(std::span<const double> latents) const {
  const auto probs = decode_probabilities(latents);
  const std::size_t count = probs.size() / kOneHotSize;
  std::vector<TileGrid> grids;
  grids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    grids.push_back(argmax_decode(std::span<const float>(probs).subspan(i * kOneHotSize, kOneHotSize)));
  }
  return grids;
}

Posterior Model::encode(std::span<const TileGrid> grids) const {
  if (!has_encoder()) {
    throw Error(ErrorCode::NoEncoder, "GAN models have no encoder; they only accept latent vectors");
  }
  Posterior out;
  if (grids.empty()) return out;
  torch::NoGradGuard no_grad;
  auto [mean, log_variance] = impl_->encoder(one_hot_batch(grids));
  mean = mean.to(torch::kDouble).contiguous();
  log_variance = log_variance.to(torch::kDouble).contiguous();
  out.mean.assign(mean.data_ptr<double>(), mean.data_ptr<double>() + mean.numel());
  out.log_variance.assign(log_variance.data_ptr<double>(),
                          log_variance.data_ptr<double>() + log_variance.numel());
  return out;
}

std::vector<float> Model::discriminate(std::span<const TileGrid> grids) const {
  if (!impl_->discriminator) throw Error(ErrorCode::InvalidConfig, "model has no discriminator");
  if (grids.empty()) return {};
  torch::NoGradGuard no_grad;
  auto logits = impl_->discriminator(one_hot_batch(grids)).contiguous();
  return std::vector<float>(logits.data_ptr<float>(), logits.data_ptr<float>() + logits.numel());
}

std::vector<float> Model::flat_parameters() const {
  std::vector<float> out;
  if (impl_->encoder) append_module_tensors(*impl_->encoder, out);
  append_module_tensors(*impl_->decoder, out);
  if (impl_->discriminator) append_module_tensors(*impl_->discriminator, out);
  return out;
}

NonFiniteLossError::NonFiniteLossError(int epoch, TrainingTrace partial)
    : Error(ErrorCode::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch)),
      epoch_(epoch),
      partial_(std::move(partial)) {}

ModelCheckpoint train(Model model, std::span<const TileGrid> corpus, const EpochObserver& observer) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "training corpus is empty");
  const ModelConfig config = model.config();
  Model::Impl& m = impl_of(model);

  const auto data = one_hot_batch(corpus);
  const auto n = static_cast<int64_t>(corpus.size());
  auto generator = at::make_generator<at::CPUGeneratorImpl>(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 shuffle_rng(config.seed);
  std::vector<int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  const auto adam = torch::optim::AdamOptions(config.learning_rate);
  const bool wasserstein = config.kind == ModelKind::Gan && config.wasserstein;
  std::vector<torch::Tensor> autoencoder_params;
  if (m.encoder) {
    for (auto& p : m.encoder->parameters()) autoencoder_params.push_back(p);
  }
  for (auto& p : m.decoder->parameters()) autoencoder_params.push_back(p);
  auto make_optimizer = [&](std::vector<torch::Tensor> params) -> std::unique_ptr<torch::optim::Optimizer> {
    if (wasserstein) {
      return std::make_unique<torch::optim::RMSprop>(std::move(params),
                                                     torch::optim::RMSpropOptions(config.critic_learning_rate));
    }
    return std::make_unique<torch::optim::Adam>(std::move(params), adam);
  };
  auto main_opt = make_optimizer(autoencoder_params);
  std::unique_ptr<torch::optim::Optimizer> disc_opt;
  if (m.discriminator) disc_opt = make_optimizer(m.discriminator->parameters());

  auto bce = [](const torch::Tensor& logits, float label) {
    return F::binary_cross_entropy_with_logits(logits, torch::full_like(logits, label));
  };
  auto latent_noise = [&](int64_t rows) {
    return torch::randn({rows, config.latent_dim}, generator, torch::kFloat);
  };
  long critic_updates = 0;

  TrainingTrace trace;
  trace.reserve(static_cast<std::size_t>(config.epochs));
  m.set_training(true);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double recon_sum = 0.0, kl_sum = 0.0, gen_sum = 0.0, disc_sum = 0.0;
    bool finite = true;

    for (int64_t start = 0; start < n && finite; start += config.batch_size) {
      const int64_t rows = std::min<int64_t>(config.batch_size, n - start);
      auto index = torch::from_blob(order.data() + start, {rows}, torch::kLong).clone();
      auto x = data.index_select(0, index);

      if (wasserstein) {
        auto fake = torch::sigmoid(m.decoder(latent_noise(rows)));
        auto c_loss = m.discriminator(fake.detach()).mean() - m.discriminator(x).mean();
        disc_opt->zero_grad();
        c_loss.backward();
        disc_opt->step();
        {
          torch::NoGradGuard no_grad;
          for (auto& p : m.discriminator->parameters()) p.clamp_(-config.weight_clip, config.weight_clip);
        }

        double g = 0.0;
        if (++critic_updates % config.critic_steps == 0) {
          auto g_loss = -m.discriminator(fake).mean();
          main_opt->zero_grad();
          g_loss.backward();
          main_opt->step();
          g = g_loss.item<double>();
        } else {
          torch::NoGradGuard no_grad;
          g = -m.discriminator(fake).mean().item<double>();
        }

        const double d = c_loss.item<double>();
        finite = std::isfinite(d) && std::isfinite(g);
        disc_sum += d * static_cast<double>(rows);
        gen_sum += g * static_cast<double>(rows);
        continue;
      }

      if (config.kind == ModelKind::Gan) {
        auto fake = torch::sigmoid(m.decoder(latent_noise(rows)));
        auto d_loss = bce(m.discriminator(x), 1.0f) + bce(m.discriminator(fake.detach()), 0.0f);
        disc_opt->zero_grad();
        d_loss.backward();
        disc_opt->step();

        auto g_loss = bce(m.discriminator(fake), 1.0f);
        main_opt->zero_grad();
        g_loss.backward();
        main_opt->step();

        const double d = d_loss.item<double>(), g = g_loss.item<double>();
        finite = std::isfinite(d) && std::isfinite(g);
        disc_sum += d * static_cast<double>(rows);
        gen_sum += g * static_cast<double>(rows);
        continue;
      }

      auto [mean, log_variance] = m.encoder(x);
      auto eps = torch::randn(mean.sizes(), generator, torch::kFloat);
      auto z = mean + eps * torch::exp(0.5 * log_variance);
      auto logits = m.decoder(z);
      auto recon = F::binary_cross_entropy_with_logits(
                       logits, x, F::BinaryCrossEntropyWithLogitsFuncOptions().reduction(torch::kSum)) /
                   static_cast<double>(rows);
      auto kl = -0.5 * torch::sum(1 + log_variance - mean.pow(2) - log_variance.exp()) /
                static_cast<double>(rows);
      auto loss = recon + config.kl_weight * kl;

      if (config.kind == ModelKind::VaeGan) {
        auto reconstructed = torch::sigmoid(logits);
        auto prior_samples = torch::sigmoid(m.decoder(latent_noise(rows)));
        auto d_loss = bce(m.discriminator(x), 1.0f) +
                      bce(m.discriminator(reconstructed.detach()), 0.0f) +
                      bce(m.discriminator(prior_samples.detach()), 0.0f);
        disc_opt->zero_grad();
        d_loss.backward();
        disc_opt->step();

        auto adversarial = bce(m.discriminator(reconstructed), 1.0f) + bce(m.discriminator(prior_samples), 1.0f);
        loss = loss + config.adv_weight * adversarial;

        const double d = d_loss.item<double>(), g = adversarial.item<double>();
        finite = finite && std::isfinite(d) && std::isfinite(g);
        disc_sum += d * static_cast<double>(rows);
        gen_sum += g * static_cast<double>(rows);
      }

      main_opt->zero_grad();
      loss.backward();
      main_opt->step();

      const double r = recon.item<double>(), k = kl.item<double>();
      finite = finite && std::isfinite(r) && std::isfinite(k);
      recon_sum += r * static_cast<double>(rows);
      kl_sum += k * static_cast<double>(rows);
    }

    if (!finite) {
      m.set_training(false);
      throw NonFiniteLossError(epoch, std::move(trace));
    }

    EpochRecord record;
    record.epoch = epoch;
    const double denom = static_cast<double>(n);
    if (config.kind != ModelKind::Gan) {
      record.reconstruction = recon_sum / denom;
      record.kl = kl_sum / denom;
    }
    if (config.kind != ModelKind::Vae) {
      record.generator = gen_sum / denom;
      record.discriminator = disc_sum / denom;
    }
    trace.push_back(record);
    if (observer) observer(record);
  }
  m.set_training(false);

  ModelCheckpoint ckpt;
  ckpt.config = config;
  ckpt.manifest.kind = config.kind;
  ckpt.manifest.epochs_completed = config.epochs;
  const EpochRecord& last = trace.back();
  auto& losses = ckpt.manifest.final_losses;
  if (last.reconstruction) losses["reconstruction"] = *last.reconstruction;
  if (last.kl) losses["kl"] = *last.kl;
  if (last.generator) losses["generator"] = *last.generator;
  if (last.discriminator) losses["discriminator"] = *last.discriminator;
  ckpt.manifest.corpus_hash = corpus_hash(corpus);
  ckpt.manifest.corpus_size = corpus.size();
  ckpt.manifest.created_at = utc_now();
  if (config.kind == ModelKind::VaeGan) {
    ckpt.manifest.notes =
        "reconstruction term is per-cell binary cross-entropy in tile space, not discriminator feature space";
  }
  ckpt.trace = std::move(trace);
  ckpt.model = std::make_shared<const Model>(std::move(model));
  return ckpt;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  // Inference never mutates the modules; saving only reads them.
  auto& m = impl_of(const_cast<Model&>(*ckpt.model));
  try {
    torch::serialize::OutputArchive archive;
    auto put = [&](const char* key, const nn::Module& module) {
      torch::serialize::OutputArchive sub;
      module.save(sub);
      archive.write(key, sub);
    };
    if (m.encoder) put("encoder", *m.encoder);
    put("decoder", *m.decoder);
    if (m.discriminator) put("discriminator", *m.discriminator);
    archive.save_to((dir / "weights.pt").string());
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::IoError, std::string("failed to write weights: ") + e.what_without_backtrace());
  }

  nlohmann::json manifest = {
      {"format", "levelblend-checkpoint/1"},
      {"kind", kind_name(ckpt.manifest.kind)},
      {"epochs_completed", ckpt.manifest.epochs_completed},
      {"final_losses", ckpt.manifest.final_losses},
      {"corpus_hash", ckpt.manifest.corpus_hash},
      {"corpus_size", ckpt.manifest.corpus_size},
      {"created_at", ckpt.manifest.created_at},
      {"notes", ckpt.manifest.notes},
      {"config", to_json(ckpt.config)},
  };
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << '\n';
  if (!mf) throw Error(ErrorCode::IoError, "failed to write manifest in " + dir.string());

  std::ofstream tf(dir / "trace.csv");
  tf << "epoch,reconstruction,kl,generator,discriminator\n";
  for (const auto& r : ckpt.trace) {
    tf << r.epoch << ',' << format_optional(r.reconstruction) << ',' << format_optional(r.kl) << ','
       << format_optional(r.generator) << ',' << format_optional(r.discriminator) << '\n';
  }
  if (!tf) throw Error(ErrorCode::IoError, "failed to write trace in " + dir.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& dir, std::optional<ModelKind> expected) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream mf(manifest_path);
  if (!mf) throw Error(ErrorCode::CorruptCheckpoint, "missing " + manifest_path.string());

  ModelCheckpoint ckpt;
  try {
    const auto j = nlohmann::json::parse(mf);
    ckpt.config = config_from_json(j.at("config"));
    ckpt.manifest.kind = parse_kind(j.at("kind").get<std::string>());
    ckpt.manifest.epochs_completed = j.at("epochs_completed").get<int>();
    ckpt.manifest.final_losses = j.value("final_losses", nlohmann::json::object());
    ckpt.manifest.corpus_hash = j.at("corpus_hash").get<std::string>();
    ckpt.manifest.corpus_size = j.value("corpus_size", std::size_t{0});
    ckpt.manifest.created_at = j.value("created_at", std::string{});
    ckpt.manifest.notes = j.value("notes", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, "bad manifest " + manifest_path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptCheckpoint, "bad manifest " + manifest_path.string() + ": " + e.what());
  }
  if (ckpt.manifest.kind != ckpt.config.kind) {
    throw Error(ErrorCode::CorruptCheckpoint, "manifest kind disagrees with its config");
  }
  if (expected && *expected != ckpt.manifest.kind) {
    throw Error(ErrorCode::KindMismatch, "checkpoint holds a " + std::string(kind_name(ckpt.manifest.kind)) +
                                             ", expected " + std::string(kind_name(*expected)));
  }

  Model model(ckpt.config);
  auto& m = impl_of(model);
  const auto weights = dir / "weights.pt";
  if (!std::filesystem::exists(weights)) throw Error(ErrorCode::CorruptCheckpoint, "missing " + weights.string());
  try {
    torch::serialize::InputArchive archive;
    archive.load_from(weights.string());
    auto get = [&](const char* key, nn::Module& module) {
      torch::serialize::InputArchive sub;
      archive.read(key, sub);
      module.load(sub);
    };
    if (m.encoder) get("encoder", *m.encoder);
    get("decoder", *m.decoder);
    if (m.discriminator) get("discriminator", *m.discriminator);
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::CorruptCheckpoint,
                "cannot read " + weights.string() + ": " + e.what_without_backtrace());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, "cannot read " + weights.string() + ": " + e.what());
  }
  m.set_training(false);

  std::ifstream tf(dir / "trace.csv");
  std::string line;
  if (tf && std::getline(tf, line)) {
    while (std::getline(tf, line)) {
      std::vector<std::string> fields;
      std::stringstream ss(line);
      std::string field;
      while (std::getline(ss, field, ',')) fields.push_back(field);
      fields.resize(5);
      try {
        EpochRecord r;
        r.epoch = std::stoi(fields[0]);
        r.reconstruction = parse_optional(fields[1]);
        r.kl = parse_optional(fields[2]);
        r.generator = parse_optional(fields[3]);
        r.discriminator = parse_optional(fields[4]);
        ckpt.trace.push_back(r);
      } catch (const std::exception&) {
        throw Error(ErrorCode::CorruptCheckpoint, "malformed trace.csv row: " + line);
      }
    }
  }
  ckpt.model = std::make_shared<const Model>(std::move(model));
  return ckpt;
}

double reconstruction_accuracy(const Model& model, std::span<const TileGrid> grids) {
  if (grids.empty()) return 1.0;
  std::size_t matches = 0;
  constexpr std::size_t kChunk = 128;
  for (std::size_t start = 0; start < grids.size(); start += kChunk) {
    const auto chunk = grids.subspan(start, std::min(kChunk, grids.size() - start));
    const auto posterior = model.encode(chunk);
    const auto decoded = model.decode(posterior.mean);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto a = chunk[i].cells();
      const auto b = decoded[i].cells();
      for (std::size_t c = 0; c < a.size(); ++c) matches += a[c] == b[c] ? 1 : 0;
    }
  }
  return static_cast<double>(matches) / static_cast<double>(grids.size() * kSegmentCells);
}

}  // namespace levelblend::models
