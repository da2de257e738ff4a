#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "levelblend/corpus.hpp"
#include "levelblend/models.hpp"

namespace levelblend::latent {

inline constexpr int kLatentDim = 64;

// A point in the learned design space.
class LatentVector {
 public:
  LatentVector() : values_(kLatentDim, 0.0) {}
  explicit LatentVector(std::vector<double> values);  // throws on wrong length or non-finite

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const LatentVector&) const = default;

 private:
  std::vector<double> values_;
};

// (1 - t) * a + t * b
LatentVector lerp(const LatentVector& a, const LatentVector& b, double t);

nlohmann::json to_json(const LatentVector& z);
LatentVector latent_from_json(const nlohmann::json& value);

// i.i.d. standard normal vectors, reproducible per seed.
std::vector<LatentVector> sample_latents(int count, std::uint64_t seed);

// Posterior mean of the encoder. Throws Error(NoEncoder) for GANs.
LatentVector encode(const models::Model& model, const TileGrid& grid);
std::vector<LatentVector> encode(const models::Model& model, std::span<const TileGrid> grids);

TileGrid decode(const models::Model& model, const LatentVector& z);
std::vector<TileGrid> decode(const models::Model& model, std::span<const LatentVector> zs);

// Decodes `steps` evenly spaced points on the segment from z_a to z_b.
std::vector<TileGrid> interpolate_latent(const models::Model& model, const LatentVector& z_a,
                                         const LatentVector& z_b, int steps);

// Encodes both segments, then interpolates between their latents.
std::vector<TileGrid> interpolate(const models::Model& model, const TileGrid& a, const TileGrid& b,
                                  int steps);

}  // namespace levelblend::latent
