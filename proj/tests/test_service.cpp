#include <doctest.h>

#include <atomic>
#include <thread>

#include "levelblend/service.hpp"
#include "model_fixture.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

using namespace levelblend;
using namespace levelblend::service;
using nlohmann::json;

namespace {

// Registry with the fixture VAE ("vae") and GAN ("gan") saved under a
// temporary directory.
struct Fixture {
  testsupport::TempDir dir{"service"};
  std::shared_ptr<ModelRegistry> registry = std::make_shared<ModelRegistry>();
  std::shared_ptr<SessionStore> sessions;
  std::unique_ptr<Api> api;

  Fixture() {
    models::save_checkpoint(testsupport::small_vae(), dir.path() / "vae");
    models::save_checkpoint(testsupport::small_gan(), dir.path() / "gan");
    registry->add("vae", dir.path() / "vae");
    registry->add("gan", dir.path() / "gan");
    sessions = std::make_shared<SessionStore>(dir.path() / "sessions");
    ApiConfig config;
    config.evolve_budget_cap = 10000;
    api = std::make_unique<Api>(registry, sessions, config);
  }

  Response call(std::string_view method, std::string_view path, const json& body = json::object()) const {
    return api->handle(method, path, body.dump());
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

json grid_json(const TileGrid& g) { return to_json(g)["tiles"]; }

std::string error_code(const Response& r) { return r.body["error"]["code"].get<std::string>(); }

}  // namespace

TEST_CASE("model listing and registry index") {
  auto& f = fixture();
  const auto r = f.call("GET", "/models");
  REQUIRE(r.status == 200);
  REQUIRE(r.body["models"].size() == 2);
  CHECK(r.body["models"][0]["id"] == "gan");
  CHECK(r.body["models"][0]["kind"] == "GAN");
  CHECK(r.body["models"][1]["kind"] == "VAE");
  CHECK(f.call("GET", "/health").body["status"] == "ok");

  const auto index = f.dir.path() / "registry.json";
  f.registry->save(index);
  const auto loaded = ModelRegistry::load(index);
  CHECK(loaded.entries().size() == 2);
  const auto z = latent::sample_latents(3, 1);
  CHECK(latent::decode(loaded.model("vae"), z) == latent::decode(f.registry->model("vae"), z));
  CHECK_THROWS_AS(f.registry->add("vae", f.dir.path() / "vae"), Error);
}

TEST_CASE("sampling echoes the seed and is reproducible") {
  auto& f = fixture();
  const auto a = f.call("POST", "/models/vae/sample", {{"count", 4}, {"seed", 77}});
  REQUIRE(a.status == 200);
  CHECK(a.body["seed"] == 77);
  REQUIRE(a.body["segments"].size() == 4);
  CHECK(f.call("POST", "/models/vae/sample", {{"count", 4}, {"seed", 77}}).body == a.body);
  CHECK(f.call("POST", "/models/vae/sample", {{"count", 4}, {"seed", 78}}).body != a.body);

  for (const auto& seg : a.body["segments"]) {
    const auto d = f.call("POST", "/models/vae/decode", {{"latent", seg["latent"]}});
    REQUIRE(d.status == 200);
    CHECK(d.body["tiles"] == seg["tiles"]);
    const auto m = f.call("POST", "/metrics", {{"tiles", seg["tiles"]}});
    CHECK(m.body == seg["metrics"]);
  }
  CHECK(f.call("POST", "/models/vae/sample", {{"count", 0}}).status == 422);
  CHECK(f.call("POST", "/models/vae/sample", {{"count", 1001}}).status == 422);
}

TEST_CASE("encode and decode") {
  auto& f = fixture();
  const auto& seg = testsupport::corpus().ki[3];
  const auto e = f.call("POST", "/models/vae/encode", {{"tiles", grid_json(seg)}});
  REQUIRE(e.status == 200);
  CHECK(e.body["latent"].size() == 64);
  const auto d = f.call("POST", "/models/vae/decode", {{"latent", e.body["latent"]}});
  CHECK(grid_from_json(d.body) == latent::decode(*testsupport::small_vae().model, latent::encode(*testsupport::small_vae().model, seg)));

  const auto gan = f.call("POST", "/models/gan/encode", {{"tiles", grid_json(seg)}});
  CHECK(gan.status == 422);
  CHECK(error_code(gan) == "NO_ENCODER");
  CHECK(f.call("POST", "/models/vae/decode", {{"latent", json::array({1, 2})}}).status == 422);
  CHECK(f.call("POST", "/models/vae/encode", {{"tiles", json::array()}}).status == 422);
}

TEST_CASE("interpolation endpoints") {
  auto& f = fixture();
  const auto& a = testsupport::corpus().smb[11];
  const auto& b = testsupport::corpus().ki[90];
  const auto r = f.call("POST", "/models/vae/interpolate", {{"grids", {grid_json(a), grid_json(b)}}, {"steps", 5}});
  REQUIRE(r.status == 200);
  REQUIRE(r.body["segments"].size() == 5);
  const auto& m = *testsupport::small_vae().model;
  CHECK(grid_from_json(r.body["segments"][0]) == latent::decode(m, latent::encode(m, a)));
  CHECK(grid_from_json(r.body["segments"][4]) == latent::decode(m, latent::encode(m, b)));

  const auto by_latent = f.call("POST", "/models/gan/interpolate", {{"latents", r.body["latents"]}, {"steps", 3}});
  CHECK(by_latent.status == 200);
  CHECK(by_latent.body["segments"].size() == 3);
  CHECK(f.call("POST", "/models/vae/interpolate", {{"latents", r.body["latents"]}, {"steps", 1}}).status == 422);
  CHECK(f.call("POST", "/models/vae/interpolate", {{"latents", r.body["latents"]}, {"steps", 257}}).status == 422);
}

TEST_CASE("evolve") {
  auto& f = fixture();
  const json spec = {{"objective", "DENSITY"}, {"target", 30}, {"budget", 160}, {"seed", 5}};
  const auto r = f.call("POST", "/models/vae/evolve", spec);
  REQUIRE(r.status == 200);
  CHECK(r.body["seed"] == 5);
  CHECK(r.body["evaluations"].get<long>() <= 160);
  const auto grid = grid_from_json(r.body);
  CHECK(r.body["metrics"] == metrics::to_json(metrics::compute(grid)));
  CHECK(r.body["achieved"].get<double>() == metrics::density(grid));
  CHECK(f.call("POST", "/models/vae/evolve", spec).body == r.body);

  auto over = spec;
  over["budget"] = 20000;
  const auto capped = f.call("POST", "/models/vae/evolve", over);
  CHECK(capped.status == 429);
  CHECK(error_code(capped) == "BUDGET_EXCEEDED");
  CHECK(f.call("POST", "/models/vae/evolve", {{"objective", "FUN"}}).status == 422);
}

TEST_CASE("errors map to statuses") {
  auto& f = fixture();
  const auto missing = f.call("POST", "/models/nope/sample");
  CHECK(missing.status == 404);
  CHECK(error_code(missing) == "NOT_FOUND");
  CHECK(f.call("GET", "/sessions/0123456789abcdef").status == 404);
  CHECK(f.call("GET", "/sessions/..%2f..").status == 404);
  CHECK(f.call("DELETE", "/models").status == 404);
  CHECK(f.call("GET", "/nowhere").status == 404);

  const auto bad = f.api->handle("POST", "/metrics", "{not json");
  CHECK(bad.status == 400);
  CHECK(error_code(bad) == "BAD_REQUEST");
  CHECK(status_for(ErrorCode::VersionConflict) == 409);
  CHECK(status_for(ErrorCode::IoError) == 500);
  CHECK(status_for(ErrorCode::InvalidSpec) == 422);
}

TEST_CASE("sessions persist and reject stale versions") {
  auto& f = fixture();
  const auto created = f.call("POST", "/sessions", {{"name", "castle"}});
  REQUIRE(created.status == 201);
  const std::string id = created.body["id"];
  CHECK(created.body["version"] == 1);

  const auto z = latent::sample_latents(1, 2).front();
  evolve::EvolutionSpec spec;
  spec.objective = evolve::Objective::Difficulty;
  spec.target_pct = 25;
  Placement p{testsupport::corpus().smb[5], 16, 0, {"vae", z, spec}};
  const json placements = json::array({to_json(p), to_json(Placement{testsupport::corpus().ki[5], 32, 0, {"gan", {}, {}}})});

  const auto updated = f.call("PUT", "/sessions/" + id, {{"version", 1}, {"placements", placements}});
  REQUIRE(updated.status == 200);
  CHECK(updated.body["version"] == 2);
  CHECK(updated.body["name"] == "castle");

  const auto stale = f.call("PUT", "/sessions/" + id, {{"version", 1}, {"placements", json::array()}});
  CHECK(stale.status == 409);
  CHECK(error_code(stale) == "VERSION_CONFLICT");

  // A fresh store over the same directory sees the committed document.
  SessionStore reopened(f.sessions->dir());
  const auto s = reopened.get(id);
  CHECK(s.version == 2);
  REQUIRE(s.placements.size() == 2);
  CHECK(s.placements[0].grid == p.grid);
  CHECK(s.placements[0].x == 16);
  CHECK(s.placements[0].provenance.latent == z);
  CHECK(evolve::to_json(*s.placements[0].provenance.objective) == evolve::to_json(spec));
  CHECK_FALSE(s.placements[1].provenance.latent.has_value());
  CHECK(to_json(session_from_json(to_json(s))) == to_json(s));

  bool listed = false;
  const auto all = f.call("GET", "/sessions");
  for (const auto& item : all.body["sessions"]) listed = listed || item["id"] == id;
  CHECK(listed);
}

TEST_CASE("concurrent updates at the same version commit exactly once") {
  auto& f = fixture();
  for (int round = 0; round < 10; ++round) {
    const auto s = f.sessions->create("race");
    std::atomic<int> ok{0}, conflicts{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 2; ++t) {
      threads.emplace_back([&, t] {
        const auto r = f.call("PUT", "/sessions/" + s.id,
                              {{"version", s.version}, {"name", "writer " + std::to_string(t)}, {"placements", json::array()}});
        (r.status == 200 ? ok : conflicts)++;
        if (r.status != 200) CHECK(r.status == 409);
      });
    }
    for (auto& th : threads) th.join();
    CHECK(ok == 1);
    CHECK(conflicts == 1);
    CHECK(f.sessions->get(s.id).version == s.version + 1);
  }
}

TEST_CASE("HTTP round trip") {
  auto& f = fixture();
  HttpServer server(*f.api);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread runner([&] { server.run(); });

  httplib::Client client("127.0.0.1", port);
  const auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  const auto sample = client.Post("/models/vae/sample", json{{"count", 2}, {"seed", 9}}.dump(), "application/json");
  REQUIRE(sample);
  CHECK(sample->status == 200);
  CHECK(json::parse(sample->body) == f.call("POST", "/models/vae/sample", {{"count", 2}, {"seed", 9}}).body);

  const auto missing = client.Get("/models/none/x");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  const auto bad = client.Post("/metrics", "[", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  server.stop();
  runner.join();
}
