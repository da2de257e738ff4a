#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "levelblend/corpus.hpp"
#include "levelblend/evolve.hpp"
#include "levelblend/latent.hpp"
#include "levelblend/models.hpp"

namespace levelblend::service {

// ---------------------------------------------------------------- registry

struct ModelRegistryEntry {
  std::string model_id;
  models::ModelKind kind = models::ModelKind::Vae;
  std::filesystem::path checkpoint;
  nlohmann::json manifest;  // summary: epochs, corpus hash, final losses
};

nlohmann::json to_json(const ModelRegistryEntry& entry);

// Checkpoints are loaded when added and shared read-only afterwards.
//
// Index format: {"models": [{"id": "vae", "checkpoint": "path"}]}, with
// relative paths resolved against the index file's directory.
class ModelRegistry {
 public:
  ModelRegistry() = default;

  static ModelRegistry load(const std::filesystem::path& index);
  void save(const std::filesystem::path& index) const;

  // Throws Error(InvalidSpec) on a bad or duplicate id, or the checkpoint
  // loader's errors.
  void add(const std::string& model_id, const std::filesystem::path& checkpoint_dir);
  void add(const std::string& model_id, const std::filesystem::path& checkpoint_dir,
           std::shared_ptr<const models::Model> model);

  std::vector<ModelRegistryEntry> entries() const;
  const ModelRegistryEntry& entry(const std::string& model_id) const;       // Error(NotFound)
  const models::Model& model(const std::string& model_id) const;           // Error(NotFound)

 private:
  struct Slot {
    ModelRegistryEntry entry;
    std::shared_ptr<const models::Model> model;
  };
  std::map<std::string, Slot> slots_;
};

// ---------------------------------------------------------------- sessions

struct Provenance {
  std::string model_id;
  std::optional<latent::LatentVector> latent;
  std::optional<evolve::EvolutionSpec> objective;
};

struct Placement {
  TileGrid grid;
  int x = 0;
  int y = 0;
  Provenance provenance;
};

struct DesignSession {
  std::string id;
  std::string name;
  std::vector<Placement> placements;
  long version = 0;  // bumped on every committed update
  std::string created_at;
  std::string updated_at;
};

nlohmann::json to_json(const Placement& p);
Placement placement_from_json(const nlohmann::json& value);
nlohmann::json to_json(const DesignSession& s);
DesignSession session_from_json(const nlohmann::json& value);

// One JSON document per session under `dir`. Updates are compare-and-swap
// on the version counter, serialized per session.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir);

  DesignSession create(const std::string& name);
  DesignSession get(const std::string& id) const;  // Error(NotFound)
  // Throws Error(VersionConflict) unless expected_version matches the stored
  // document.
  DesignSession update(const std::string& id, long expected_version, std::optional<std::string> name,
                       std::vector<Placement> placements);
  std::vector<DesignSession> list() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_of(const std::string& id) const;
  std::mutex& lock_for(const std::string& id) const;

  std::filesystem::path dir_;
  mutable std::mutex locks_mutex_;
  mutable std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

// ---------------------------------------------------------------- API

struct ApiConfig {
  long evolve_budget_cap = 10000;
  int max_sample_count = 1000;
  int max_interpolation_steps = 256;
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

// Transport-independent request handler. Thread-safe.
//
//   GET  /models
//   POST /models/{id}/sample       {"count", "seed"}
//   POST /models/{id}/encode       {"tiles"}
//   POST /models/{id}/decode       {"latent"}
//   POST /models/{id}/interpolate  {"grids": [a, b] | "latents": [a, b], "steps"}
//   POST /models/{id}/evolve       {"objective", "target" | "tile", "budget", "seed", ...}
//   POST /metrics                  {"tiles"}
//   GET  /sessions, POST /sessions {"name"}
//   GET  /sessions/{id}, PUT /sessions/{id} {"version", "name", "placements"}
//
// Errors come back as {"error": {"code", "message"}}.
class Api {
 public:
  Api(std::shared_ptr<const ModelRegistry> registry, std::shared_ptr<SessionStore> sessions, ApiConfig config = {});

  Response handle(std::string_view method, std::string_view path, std::string_view body) const;

  const ApiConfig& config() const { return config_; }

 private:
  Response route(std::string_view method, const std::vector<std::string>& parts, const nlohmann::json& body) const;

  std::shared_ptr<const ModelRegistry> registry_;
  std::shared_ptr<SessionStore> sessions_;
  ApiConfig config_;
};

int status_for(ErrorCode code) noexcept;

// HTTP adapter around Api.
class HttpServer {
 public:
  explicit HttpServer(const Api& api);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and returns the port (an ephemeral one when port == 0).
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace levelblend::service
