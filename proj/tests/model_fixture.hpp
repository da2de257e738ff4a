// Small models trained once per test binary.
#pragma once

#include "levelblend/models.hpp"
#include "support.hpp"

namespace testsupport {

inline const levelblend::TrainingCorpus& corpus() {
  static const auto c = levelblend::load_default_corpus(data_dir());
  return c;
}

// A VAE trained for a few dozen epochs: good enough that decodes look like
// level segments, cheap enough for unit tests.
inline const levelblend::models::ModelCheckpoint& small_vae() {
  static const auto ckpt = [] {
    levelblend::models::ModelConfig config;
    config.epochs = 25;
    config.seed = 7;
    const auto all = corpus().all();
    return levelblend::models::train(levelblend::models::Model(config), all);
  }();
  return ckpt;
}

inline const levelblend::models::ModelCheckpoint& small_gan() {
  static const auto ckpt = [] {
    levelblend::models::ModelConfig config;
    config.kind = levelblend::models::ModelKind::Gan;
    config.epochs = 2;
    config.seed = 7;
    const auto all = corpus().all();
    return levelblend::models::train(levelblend::models::Model(config), all);
  }();
  return ckpt;
}

}  // namespace testsupport
