#include "levelblend/latent.hpp"

#include <cmath>
#include <random>

namespace levelblend::latent {

namespace {

// Weights are formed as exact ratios so that reversing the endpoints yields
// bit-identical intermediate vectors.
LatentVector weighted_sum(const LatentVector& a, double wa, const LatentVector& b, double wb) {
  std::vector<double> v(kLatentDim);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = wa * a[i] + wb * b[i];
  return LatentVector(std::move(v));
}

}  // namespace

LatentVector::LatentVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(kLatentDim)) {
    throw Error(ErrorCode::InvalidShape, "latent vectors have 64 entries, got " +
                                             std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteLatent, "latent vector has a non-finite entry");
  }
}

LatentVector lerp(const LatentVector& a, const LatentVector& b, double t) {
  return weighted_sum(a, 1.0 - t, b, t);
}

nlohmann::json to_json(const LatentVector& z) {
  return nlohmann::json(std::vector<double>(z.values().begin(), z.values().end()));
}

LatentVector latent_from_json(const nlohmann::json& value) {
  if (!value.is_array()) throw Error(ErrorCode::InvalidShape, "latent must be a JSON array of 64 numbers");
  std::vector<double> v;
  v.reserve(value.size());
  for (const auto& x : value) {
    if (!x.is_number()) throw Error(ErrorCode::InvalidShape, "latent entries must be numbers");
    v.push_back(x.get<double>());
  }
  return LatentVector(std::move(v));
}

std::vector<LatentVector> sample_latents(int count, std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::InvalidSpec, "sample count must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<LatentVector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::vector<double> v(kLatentDim);
    for (double& x : v) x = normal(rng);
    out.emplace_back(std::move(v));
  }
  return out;
}

LatentVector encode(const models::Model& model, const TileGrid& grid) {
  return LatentVector(model.encode(std::span<const TileGrid>(&grid, 1)).mean);
}

std::vector<LatentVector> encode(const models::Model& model, std::span<const TileGrid> grids) {
  std::vector<LatentVector> out;
  out.reserve(grids.size());
  for (const auto& g : grids) {
    out.emplace_back(model.encode(std::span<const TileGrid>(&g, 1)).mean);
  }
  return out;
}

TileGrid decode(const models::Model& model, const LatentVector& z) {
  return model.decode(z.values()).front();
}

// One vector per forward pass: backend kernels are not guaranteed to give
// bit-identical rows across batch sizes, and decode(z) must not depend on
// what it was batched with.
std::vector<TileGrid> decode(const models::Model& model, std::span<const LatentVector> zs) {
  std::vector<TileGrid> out;
  out.reserve(zs.size());
  for (const auto& z : zs) out.push_back(decode(model, z));
  return out;
}

std::vector<TileGrid> interpolate_latent(const models::Model& model, const LatentVector& z_a,
                                         const LatentVector& z_b, int steps) {
  if (steps < 2) throw Error(ErrorCode::InvalidSpec, "interpolation needs at least 2 steps");
  std::vector<LatentVector> path;
  path.reserve(static_cast<std::size_t>(steps));
  const double last = steps - 1;
  for (int i = 0; i < steps; ++i) {
    path.push_back(weighted_sum(z_a, (last - i) / last, z_b, i / last));
  }
  return decode(model, path);
}

std::vector<TileGrid> interpolate(const models::Model& model, const TileGrid& a, const TileGrid& b,
                                  int steps) {
  if (steps < 2) throw Error(ErrorCode::InvalidSpec, "interpolation needs at least 2 steps");
  const std::array<TileGrid, 2> ends{a, b};
  const auto zs = encode(model, ends);
  return interpolate_latent(model, zs[0], zs[1], steps);
}

}  // namespace levelblend::latent
