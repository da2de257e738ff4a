#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "levelblend/models.hpp"
#include "model_fixture.hpp"

using namespace levelblend;
using namespace levelblend::models;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected levelblend::Error");
  return ErrorCode::IoError;
}

std::vector<double> random_latents(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::vector<double> out(static_cast<std::size_t>(count) * 64);
  for (double& v : out) v = n(rng);
  return out;
}

ModelConfig tiny(ModelKind kind, int epochs, std::uint64_t seed = 3) {
  ModelConfig c;
  c.kind = kind;
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("kind names") {
  CHECK(parse_kind("vae") == ModelKind::Vae);
  CHECK(parse_kind("GAN") == ModelKind::Gan);
  CHECK(parse_kind("VAE-GAN") == ModelKind::VaeGan);
  CHECK(parse_kind("vae_gan") == ModelKind::VaeGan);
  CHECK(kind_name(ModelKind::VaeGan) == "VAEGAN");
  CHECK(code_of([] { parse_kind("lstm"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("config validation and JSON round trip") {
  ModelConfig c;
  CHECK(c.latent_dim == 64);
  CHECK(c.learning_rate == 0.001);
  CHECK(c.epochs == 10000);
  CHECK(c.wasserstein);
  c.validate();
  CHECK(config_from_json(to_json(c)).seed == c.seed);
  CHECK(to_json(config_from_json(to_json(c))) == to_json(c));

  auto bad = c;
  bad.epochs = 0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad = c;
  bad.learning_rate = 0.0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad = c;
  bad.latent_dim = 0;
  CHECK(code_of([&] { build_model(bad); }) == ErrorCode::InvalidConfig);
  bad = c;
  bad.critic_steps = 0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);
  bad = c;
  bad.weight_clip = 0.0;
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidConfig);

  bad = c;
  bad.wasserstein = false;
  CHECK_FALSE(config_from_json(to_json(bad)).wasserstein);
}

TEST_CASE("output shapes and ranges") {
  for (auto kind : {ModelKind::Vae, ModelKind::Gan, ModelKind::VaeGan}) {
    const Model m = build_model(tiny(kind, 1));
    const auto z = random_latents(3, 1);
    const auto p = m.decode_probabilities(z);
    REQUIRE(p.size() == 3u * kOneHotSize);
    for (float v : p) REQUIRE((v > 0.0f && v < 1.0f));
    CHECK(m.decode(z).size() == 3);
    CHECK(m.has_encoder() == (kind != ModelKind::Gan));
    if (m.has_encoder()) {
      const std::vector<TileGrid> grids{TileGrid{}, TileGrid::filled(14)};
      const auto post = m.encode(grids);
      CHECK(post.mean.size() == 2u * 64);
      CHECK(post.log_variance.size() == 2u * 64);
    } else {
      CHECK(code_of([&] { m.encode(std::vector<TileGrid>{TileGrid{}}); }) == ErrorCode::NoEncoder);
    }
    if (kind != ModelKind::Vae) CHECK(m.discriminate(std::vector<TileGrid>{TileGrid{}}).size() == 1);
  }
}

TEST_CASE("decode rejects bad latents") {
  const Model m = build_model(tiny(ModelKind::Vae, 1));
  CHECK(code_of([&] { m.decode(std::vector<double>(63, 0.0)); }) == ErrorCode::InvalidShape);
  auto z = random_latents(1, 2);
  z[5] = std::nan("");
  CHECK(code_of([&] { m.decode(z); }) == ErrorCode::NonFiniteLatent);
  z[5] = INFINITY;
  CHECK(code_of([&] { m.decode(z); }) == ErrorCode::NonFiniteLatent);
}

TEST_CASE("same seed gives identical initial parameters") {
  for (auto kind : {ModelKind::Vae, ModelKind::Gan, ModelKind::VaeGan}) {
    const auto a = build_model(tiny(kind, 1, 9)).flat_parameters();
    const auto b = build_model(tiny(kind, 1, 9)).flat_parameters();
    const auto c = build_model(tiny(kind, 1, 10)).flat_parameters();
    CHECK(a == b);
    CHECK(a != c);
  }
}

TEST_CASE("decoding is independent of batch composition") {
  const Model m = build_model(tiny(ModelKind::Vae, 1));
  const auto zs = random_latents(20, 4);
  const auto batch = m.decode(zs);
  for (int i = 0; i < 20; ++i) {
    const auto one = m.decode(std::span<const double>(zs).subspan(static_cast<std::size_t>(i) * 64, 64));
    CHECK(one.front() == batch[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("training records one trace entry per epoch with the kind's loss terms") {
  const auto all = testsupport::corpus().all();
  const std::vector<TileGrid> subset(all.begin(), all.begin() + 40);
  for (auto kind : {ModelKind::Vae, ModelKind::Gan, ModelKind::VaeGan}) {
    const auto ckpt = train(Model(tiny(kind, 3)), subset);
    for (const auto& r : ckpt.trace) {
      if (r.generator) CHECK(std::isfinite(*r.generator));
      if (r.discriminator) CHECK(std::isfinite(*r.discriminator));
    }
    REQUIRE(ckpt.trace.size() == 3);
    for (int e = 0; e < 3; ++e) CHECK(ckpt.trace[static_cast<std::size_t>(e)].epoch == e + 1);
    const auto& r = ckpt.trace.back();
    const bool vae_terms = kind != ModelKind::Gan;
    const bool gan_terms = kind != ModelKind::Vae;
    CHECK(r.reconstruction.has_value() == vae_terms);
    CHECK(r.kl.has_value() == vae_terms);
    CHECK(r.generator.has_value() == gan_terms);
    CHECK(r.discriminator.has_value() == gan_terms);
    CHECK(ckpt.manifest.kind == kind);
    CHECK(ckpt.manifest.epochs_completed == 3);
    CHECK(ckpt.manifest.corpus_size == 40);
    CHECK(ckpt.manifest.corpus_hash == corpus_hash(subset));
  }
}

TEST_CASE("training is reproducible for a fixed seed") {
  const auto all = testsupport::corpus().all();
  const std::vector<TileGrid> subset(all.begin() + 100, all.begin() + 160);
  const auto a = train(Model(tiny(ModelKind::VaeGan, 2, 5)), subset);
  const auto b = train(Model(tiny(ModelKind::VaeGan, 2, 5)), subset);
  CHECK(a.model->flat_parameters() == b.model->flat_parameters());
  CHECK(a.trace.back().reconstruction == b.trace.back().reconstruction);
  CHECK(a.trace.back().discriminator == b.trace.back().discriminator);
}

TEST_CASE("a VAE nearly memorizes a single segment in 200 epochs") {
  // One optimizer step per epoch; a plain segment comes back exactly, one with
  // a pipe over a gap keeps two or three cells wrong.
  const auto& smb = testsupport::corpus().smb;
  for (const auto& [segment, floor] : {std::pair{smb[0], 1.0}, std::pair{smb[60], 0.98}}) {
    const auto ckpt = train(Model(tiny(ModelKind::Vae, 200)), std::vector<TileGrid>{segment});
    const double acc = reconstruction_accuracy(*ckpt.model, std::vector<TileGrid>{segment});
    CHECK(acc >= floor);
    if (floor == 1.0) {
      const auto z = ckpt.model->encode(std::vector<TileGrid>{segment}).mean;
      CHECK(ckpt.model->decode(z).front() == segment);
    }
  }
}

TEST_CASE("empty corpus") {
  CHECK(code_of([] { train(Model(tiny(ModelKind::Vae, 1)), std::vector<TileGrid>{}); }) == ErrorCode::EmptyCorpus);
}

TEST_CASE("encoder outputs are finite on the training corpus after training") {
  const auto& ckpt = testsupport::small_vae();
  const auto all = testsupport::corpus().all();
  const auto post = ckpt.model->encode(all);
  for (double v : post.mean) REQUIRE(std::isfinite(v));
  for (double v : post.log_variance) REQUIRE(std::isfinite(v));
  // A short run already reconstructs most cells.
  CHECK(reconstruction_accuracy(*ckpt.model, all) > 0.7);
}

TEST_CASE("checkpoint save and load") {
  testsupport::TempDir dir("ckpt");
  const auto& ckpt = testsupport::small_vae();
  save_checkpoint(ckpt, dir.path() / "vae");

  SUBCASE("round trip decodes 100 random latents identically") {
    const auto loaded = load_checkpoint(dir.path() / "vae");
    CHECK(loaded.manifest.kind == ModelKind::Vae);
    CHECK(loaded.manifest.epochs_completed == 25);
    CHECK(loaded.manifest.corpus_hash == ckpt.manifest.corpus_hash);
    CHECK(loaded.trace.size() == ckpt.trace.size());
    CHECK(to_json(loaded.config) == to_json(ckpt.config));
    const auto zs = random_latents(100, 8);
    CHECK(loaded.model->decode(zs) == ckpt.model->decode(zs));
    CHECK(loaded.model->flat_parameters() == ckpt.model->flat_parameters());
  }
  SUBCASE("manifest names the kind") {
    std::ifstream in(dir.path() / "vae" / "manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    CHECK(manifest["kind"] == "VAE");
    CHECK(manifest["epochs_completed"] == 25);
  }
  SUBCASE("kind mismatch") {
    CHECK(code_of([&] { load_checkpoint(dir.path() / "vae", ModelKind::Gan); }) == ErrorCode::KindMismatch);
  }
  SUBCASE("truncated weights") {
    const auto weights = dir.path() / "vae" / "weights.pt";
    const auto size = std::filesystem::file_size(weights);
    std::filesystem::resize_file(weights, size / 2);
    CHECK(code_of([&] { load_checkpoint(dir.path() / "vae"); }) == ErrorCode::CorruptCheckpoint);
  }
  SUBCASE("missing or garbled manifest") {
    std::ofstream(dir.path() / "vae" / "manifest.json") << "{not json";
    CHECK(code_of([&] { load_checkpoint(dir.path() / "vae"); }) == ErrorCode::CorruptCheckpoint);
    CHECK(code_of([&] { load_checkpoint(dir.path() / "nowhere"); }) == ErrorCode::CorruptCheckpoint);
  }
}

TEST_CASE("GAN checkpoints load without an encoder") {
  testsupport::TempDir dir("gan");
  save_checkpoint(testsupport::small_gan(), dir.path() / "gan");
  const auto loaded = load_checkpoint(dir.path() / "gan", ModelKind::Gan);
  CHECK_FALSE(loaded.model->has_encoder());
  const auto zs = random_latents(10, 2);
  CHECK(loaded.model->decode(zs) == testsupport::small_gan().model->decode(zs));
}
