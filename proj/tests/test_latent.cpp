#include <doctest.h>

#include <cmath>

#include "levelblend/latent.hpp"
#include "model_fixture.hpp"

using namespace levelblend;
using namespace levelblend::latent;

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

const models::Model& vae() { return *testsupport::small_vae().model; }

}  // namespace

TEST_CASE("latent vectors validate their entries") {
  CHECK(LatentVector().size() == 64);
  CHECK(code_of([] { LatentVector(std::vector<double>(63)); }) == ErrorCode::InvalidShape);
  std::vector<double> v(64, 0.0);
  v[10] = std::nan("");
  CHECK(code_of([&] { LatentVector{v}; }) == ErrorCode::NonFiniteLatent);
  v[10] = -INFINITY;
  CHECK(code_of([&] { LatentVector{v}; }) == ErrorCode::NonFiniteLatent);
  CHECK(code_of([] { latent_from_json(nlohmann::json{1, 2}); }) == ErrorCode::InvalidShape);
  CHECK(code_of([] { latent_from_json(nlohmann::json("z")); }) == ErrorCode::InvalidShape);

  const auto z = sample_latents(1, 4).front();
  CHECK(latent_from_json(to_json(z)) == z);
}

TEST_CASE("prior samples are standard normal") {
  const auto zs = sample_latents(10000, 11);
  REQUIRE(zs.size() == 10000);
  for (int d = 0; d < 64; ++d) {
    double sum = 0.0, sq = 0.0;
    for (const auto& z : zs) {
      sum += z[static_cast<std::size_t>(d)];
      sq += z[static_cast<std::size_t>(d)] * z[static_cast<std::size_t>(d)];
    }
    const double mean = sum / 10000.0;
    const double var = sq / 10000.0 - mean * mean;
    CAPTURE(d);
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
  }
  CHECK(sample_latents(5, 11) == std::vector<LatentVector>(zs.begin(), zs.begin() + 5));
  CHECK(sample_latents(5, 12) != sample_latents(5, 11));
  CHECK(code_of([] { sample_latents(0, 1); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("encode and decode are deterministic") {
  const auto& seg = testsupport::corpus().ki[7];
  CHECK(encode(vae(), seg) == encode(vae(), seg));
  const auto z = sample_latents(1, 3).front();
  CHECK(decode(vae(), z) == decode(vae(), z));
  CHECK(code_of([&] { encode(*testsupport::small_gan().model, seg); }) == ErrorCode::NoEncoder);
}

TEST_CASE("batched decode equals one-at-a-time decode") {
  const auto zs = sample_latents(30, 21);
  const auto batch = decode(vae(), zs);
  for (std::size_t i = 0; i < zs.size(); ++i) CHECK(batch[i] == decode(vae(), zs[i]));

  const auto all = testsupport::corpus().all();
  const std::span<const TileGrid> some(all.data(), 12);
  const auto encoded = encode(vae(), some);
  for (std::size_t i = 0; i < some.size(); ++i) CHECK(encoded[i] == encode(vae(), some[i]));
}

TEST_CASE("interpolation endpoints are reconstructions") {
  const auto& a = testsupport::corpus().smb[3];
  const auto& b = testsupport::corpus().ki[40];
  const auto path = interpolate(vae(), a, b, 7);
  REQUIRE(path.size() == 7);
  CHECK(path.front() == decode(vae(), encode(vae(), a)));
  CHECK(path.back() == decode(vae(), encode(vae(), b)));

  const auto two = interpolate(vae(), a, b, 2);
  CHECK(two.front() == path.front());
  CHECK(two.back() == path.back());

  CHECK(code_of([&] { interpolate(vae(), a, b, 1); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([&] { interpolate(*testsupport::small_gan().model, a, b, 3); }) == ErrorCode::NoEncoder);
}

TEST_CASE("interpolation in latent space") {
  const auto zs = sample_latents(2, 8);
  const auto& za = zs[0];
  const auto& zb = zs[1];

  SUBCASE("the midpoint of three steps decodes the average") {
    const auto path = interpolate_latent(vae(), za, zb, 3);
    std::vector<double> mid(64);
    for (std::size_t i = 0; i < 64; ++i) mid[i] = 0.5 * za[i] + 0.5 * zb[i];
    CHECK(path[1] == decode(vae(), LatentVector(mid)));
    CHECK(path[1] == decode(vae(), lerp(za, zb, 0.5)));
  }
  SUBCASE("identical endpoints give a constant path") {
    const auto path = interpolate_latent(vae(), za, za, 5);
    for (const auto& g : path) CHECK(g == decode(vae(), za));
  }
  SUBCASE("swapping the endpoints reverses the path") {
    auto forward = interpolate_latent(vae(), za, zb, 9);
    const auto backward = interpolate_latent(vae(), zb, za, 9);
    std::reverse(forward.begin(), forward.end());
    CHECK(forward == backward);
  }
  SUBCASE("GAN generators interpolate between latents") {
    const auto path = interpolate_latent(*testsupport::small_gan().model, za, zb, 4);
    CHECK(path.front() == decode(*testsupport::small_gan().model, za));
    CHECK(path.back() == decode(*testsupport::small_gan().model, zb));
  }
}
