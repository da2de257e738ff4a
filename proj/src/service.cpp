#include "levelblend/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include <httplib.h>

#include "levelblend/metrics.hpp"

namespace levelblend::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool valid_token(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    if (!ok) return false;
  }
  return true;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

std::string random_token() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + " is not valid JSON: " + e.what());
  }
}

// Write-then-rename so readers never observe a half-written document.
void write_json_file(const fs::path& path, const json& value) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << value.dump(2) << '\n';
    out.close();
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot replace " + path.string() + ": " + ec.message());
}

json error_body(ErrorCode code, std::string_view message) {
  return {{"error", {{"code", error_code_name(code)}, {"message", message}}}};
}

std::vector<std::string> split_path(std::string_view path) {
  if (const auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto end = path.find('/', start);
    const auto piece = path.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (!piece.empty()) parts.emplace_back(piece);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

template <typename T>
T field(const json& body, const char* key, T fallback) {
  if (!body.contains(key) || body[key].is_null()) return fallback;
  try {
    return body[key].get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidSpec, std::string("field \"") + key + "\" has the wrong type");
  }
}

const json& required(const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) {
    throw Error(ErrorCode::InvalidSpec, std::string("missing field \"") + key + "\"");
  }
  return body[key];
}

json segment_json(const TileGrid& grid) {
  json j = to_json(grid);
  j["metrics"] = metrics::to_json(metrics::compute(grid));
  return j;
}

}  // namespace

// ---------------------------------------------------------------- registry

json to_json(const ModelRegistryEntry& e) {
  return {{"id", e.model_id}, {"kind", models::kind_name(e.kind)}, {"checkpoint", e.checkpoint.string()},
          {"manifest", e.manifest}};
}

ModelRegistry ModelRegistry::load(const fs::path& index) {
  const json doc = read_json_file(index);
  ModelRegistry registry;
  if (!doc.contains("models") || !doc["models"].is_array()) {
    throw Error(ErrorCode::InvalidSpec, index.string() + ": expected {\"models\": [...]}");
  }
  for (const auto& m : doc["models"]) {
    if (!m.is_object() || !m.contains("id") || !m.contains("checkpoint") || !m["id"].is_string() ||
        !m["checkpoint"].is_string()) {
      throw Error(ErrorCode::InvalidSpec, index.string() + ": each model needs string \"id\" and \"checkpoint\"");
    }
    fs::path dir = m["checkpoint"].get<std::string>();
    if (dir.is_relative()) dir = index.parent_path() / dir;
    registry.add(m["id"].get<std::string>(), dir);
  }
  return registry;
}

void ModelRegistry::save(const fs::path& index) const {
  json models = json::array();
  for (const auto& [id, slot] : slots_) {
    models.push_back({{"id", id}, {"checkpoint", fs::absolute(slot.entry.checkpoint).string()}});
  }
  if (index.has_parent_path()) fs::create_directories(index.parent_path());
  write_json_file(index, {{"models", models}});
}

void ModelRegistry::add(const std::string& model_id, const fs::path& checkpoint_dir) {
  auto ckpt = models::load_checkpoint(checkpoint_dir);
  add(model_id, checkpoint_dir, ckpt.model);
}

void ModelRegistry::add(const std::string& model_id, const fs::path& checkpoint_dir,
                        std::shared_ptr<const models::Model> model) {
  if (!valid_token(model_id)) throw Error(ErrorCode::InvalidSpec, "model id must match [A-Za-z0-9_-]{1,64}");
  if (slots_.count(model_id)) throw Error(ErrorCode::InvalidSpec, "duplicate model id '" + model_id + "'");
  if (!model) throw Error(ErrorCode::InvalidSpec, "model is null");

  ModelRegistryEntry entry{model_id, model->kind(), checkpoint_dir, json::object()};
  const fs::path manifest_path = checkpoint_dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    const json m = read_json_file(manifest_path);
    for (const char* key : {"epochs_completed", "corpus_hash", "corpus_size", "final_losses", "created_at"}) {
      if (m.contains(key)) entry.manifest[key] = m[key];
    }
  }
  slots_.emplace(model_id, Slot{std::move(entry), std::move(model)});
}

std::vector<ModelRegistryEntry> ModelRegistry::entries() const {
  std::vector<ModelRegistryEntry> out;
  for (const auto& [id, slot] : slots_) out.push_back(slot.entry);
  return out;
}

const ModelRegistryEntry& ModelRegistry::entry(const std::string& model_id) const {
  const auto it = slots_.find(model_id);
  if (it == slots_.end()) throw Error(ErrorCode::NotFound, "unknown model '" + model_id + "'");
  return it->second.entry;
}

const models::Model& ModelRegistry::model(const std::string& model_id) const {
  const auto it = slots_.find(model_id);
  if (it == slots_.end()) throw Error(ErrorCode::NotFound, "unknown model '" + model_id + "'");
  return *it->second.model;
}

// ---------------------------------------------------------------- sessions

json to_json(const Placement& p) {
  json j = to_json(p.grid);
  j["x"] = p.x;
  j["y"] = p.y;
  j["provenance"] = {
      {"model_id", p.provenance.model_id},
      {"latent", p.provenance.latent ? latent::to_json(*p.provenance.latent) : json(nullptr)},
      {"objective", p.provenance.objective ? evolve::to_json(*p.provenance.objective) : json(nullptr)},
  };
  return j;
}

Placement placement_from_json(const json& v) {
  if (!v.is_object()) throw Error(ErrorCode::InvalidSpec, "placement must be an object");
  Placement p;
  p.grid = grid_from_json(required(v, "tiles"));
  p.x = field<int>(v, "x", 0);
  p.y = field<int>(v, "y", 0);
  if (v.contains("provenance") && v["provenance"].is_object()) {
    const auto& prov = v["provenance"];
    p.provenance.model_id = field<std::string>(prov, "model_id", "");
    if (prov.contains("latent") && !prov["latent"].is_null()) p.provenance.latent = latent::latent_from_json(prov["latent"]);
    if (prov.contains("objective") && !prov["objective"].is_null()) {
      p.provenance.objective = evolve::spec_from_json(prov["objective"]);
    }
  }
  return p;
}

json to_json(const DesignSession& s) {
  json placements = json::array();
  for (const auto& p : s.placements) placements.push_back(to_json(p));
  return {{"id", s.id},           {"name", s.name},
          {"version", s.version}, {"created_at", s.created_at},
          {"updated_at", s.updated_at}, {"placements", placements}};
}

DesignSession session_from_json(const json& v) {
  DesignSession s;
  s.id = field<std::string>(v, "id", "");
  s.name = field<std::string>(v, "name", "");
  s.version = field<long>(v, "version", 0);
  s.created_at = field<std::string>(v, "created_at", "");
  s.updated_at = field<std::string>(v, "updated_at", "");
  if (v.contains("placements")) {
    if (!v["placements"].is_array()) throw Error(ErrorCode::InvalidSpec, "\"placements\" must be an array");
    for (const auto& p : v["placements"]) s.placements.push_back(placement_from_json(p));
  }
  return s;
}

SessionStore::SessionStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (!fs::is_directory(dir_)) throw Error(ErrorCode::IoError, "cannot create session directory " + dir_.string());
}

fs::path SessionStore::path_of(const std::string& id) const {
  if (!valid_token(id)) throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
  return dir_ / (id + ".json");
}

std::mutex& SessionStore::lock_for(const std::string& id) const {
  std::lock_guard guard(locks_mutex_);
  auto& slot = locks_[id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

DesignSession SessionStore::create(const std::string& name) {
  DesignSession s;
  do {
    s.id = random_token();
  } while (fs::exists(path_of(s.id)));
  s.name = name;
  s.version = 1;
  s.created_at = s.updated_at = utc_now();
  std::lock_guard guard(lock_for(s.id));
  write_json_file(path_of(s.id), to_json(s));
  return s;
}

DesignSession SessionStore::get(const std::string& id) const {
  const fs::path path = path_of(id);
  std::lock_guard guard(lock_for(id));
  if (!fs::exists(path)) throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
  return session_from_json(read_json_file(path));
}

DesignSession SessionStore::update(const std::string& id, long expected_version, std::optional<std::string> name,
                                   std::vector<Placement> placements) {
  const fs::path path = path_of(id);
  std::lock_guard guard(lock_for(id));
  if (!fs::exists(path)) throw Error(ErrorCode::NotFound, "unknown session '" + id + "'");
  DesignSession s = session_from_json(read_json_file(path));
  if (s.version != expected_version) {
    throw Error(ErrorCode::VersionConflict, "session '" + id + "' is at version " + std::to_string(s.version) +
                                                ", update was based on " + std::to_string(expected_version));
  }
  if (name) s.name = *name;
  s.placements = std::move(placements);
  ++s.version;
  s.updated_at = utc_now();
  write_json_file(path, to_json(s));
  return s;
}

std::vector<DesignSession> SessionStore::list() const {
  std::vector<std::string> ids;
  for (const auto& f : fs::directory_iterator(dir_)) {
    if (f.path().extension() == ".json" && valid_token(f.path().stem().string())) ids.push_back(f.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  std::vector<DesignSession> out;
  for (const auto& id : ids) out.push_back(get(id));
  return out;
}

// ---------------------------------------------------------------- API

int status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::VersionConflict: return 409;
    case ErrorCode::BudgetExceeded: return 429;
    case ErrorCode::BadRequest: return 400;
    case ErrorCode::IoError:
    case ErrorCode::CorruptCheckpoint:
    case ErrorCode::NonFiniteLoss: return 500;
    default: return 422;
  }
}

Api::Api(std::shared_ptr<const ModelRegistry> registry, std::shared_ptr<SessionStore> sessions, ApiConfig config)
    : registry_(std::move(registry)), sessions_(std::move(sessions)), config_(config) {}

Response Api::handle(std::string_view method, std::string_view path, std::string_view body) const {
  try {
    json parsed = json::object();
    if (!body.empty()) {
      parsed = json::parse(body, nullptr, false);
      if (parsed.is_discarded()) return {400, error_body(ErrorCode::BadRequest, "request body is not valid JSON")};
    }
    return route(method, split_path(path), parsed);
  } catch (const Error& e) {
    return {status_for(e.code()), error_body(e.code(), e.what())};
  } catch (const json::exception& e) {
    return {422, error_body(ErrorCode::InvalidSpec, e.what())};
  } catch (const std::exception& e) {
    return {500, {{"error", {{"code", "INTERNAL"}, {"message", e.what()}}}}};
  }
}

Response Api::route(std::string_view method, const std::vector<std::string>& parts, const json& body) const {
  const auto n = parts.size();
  auto not_found = [&] {
    std::string path;
    for (const auto& p : parts) path += "/" + p;
    return Response{404, error_body(ErrorCode::NotFound, "no route for " + std::string(method) + " " + path)};
  };

  if (n == 1 && parts[0] == "health" && method == "GET") return {200, {{"status", "ok"}}};

  if (n >= 1 && parts[0] == "models") {
    if (n == 1 && method == "GET") {
      json list = json::array();
      for (const auto& e : registry_->entries()) list.push_back(to_json(e));
      return {200, {{"models", list}}};
    }
    if (n != 3 || method != "POST") return not_found();
    const std::string& id = parts[1];
    const std::string& action = parts[2];
    const models::Model& model = registry_->model(id);
    json out = {{"model_id", id}};

    if (action == "sample") {
      const int count = field<int>(body, "count", 1);
      const auto seed = field<std::uint64_t>(body, "seed", 1);
      if (count < 1 || count > config_.max_sample_count) {
        throw Error(ErrorCode::InvalidSpec, "count must lie in [1, " + std::to_string(config_.max_sample_count) + "]");
      }
      json segments = json::array();
      for (const auto& z : latent::sample_latents(count, seed)) {
        json seg = segment_json(latent::decode(model, z));
        seg["latent"] = latent::to_json(z);
        segments.push_back(std::move(seg));
      }
      out["count"] = count;
      out["seed"] = seed;
      out["segments"] = std::move(segments);
      return {200, out};
    }
    if (action == "encode") {
      const TileGrid grid = grid_from_json(required(body, "tiles"));
      out["latent"] = latent::to_json(latent::encode(model, grid));
      return {200, out};
    }
    if (action == "decode") {
      const auto z = latent::latent_from_json(required(body, "latent"));
      out.update(segment_json(latent::decode(model, z)));
      out["latent"] = latent::to_json(z);
      return {200, out};
    }
    if (action == "interpolate") {
      const int steps = field<int>(body, "steps", 10);
      if (steps < 2 || steps > config_.max_interpolation_steps) {
        throw Error(ErrorCode::InvalidSpec,
                    "steps must lie in [2, " + std::to_string(config_.max_interpolation_steps) + "]");
      }
      std::vector<latent::LatentVector> ends;
      if (body.contains("latents")) {
        const auto& ls = body["latents"];
        if (!ls.is_array() || ls.size() != 2) throw Error(ErrorCode::InvalidShape, "\"latents\" must hold two vectors");
        ends = {latent::latent_from_json(ls[0]), latent::latent_from_json(ls[1])};
      } else {
        const auto& gs = required(body, "grids");
        if (!gs.is_array() || gs.size() != 2) throw Error(ErrorCode::InvalidShape, "\"grids\" must hold two grids");
        ends = {latent::encode(model, grid_from_json(gs[0])), latent::encode(model, grid_from_json(gs[1]))};
      }
      json segments = json::array();
      for (const auto& g : latent::interpolate_latent(model, ends[0], ends[1], steps)) segments.push_back(segment_json(g));
      out["steps"] = steps;
      out["latents"] = {latent::to_json(ends[0]), latent::to_json(ends[1])};
      out["segments"] = std::move(segments);
      return {200, out};
    }
    if (action == "evolve") {
      const auto spec = evolve::spec_from_json(body);
      if (spec.budget > config_.evolve_budget_cap) {
        throw Error(ErrorCode::BudgetExceeded, "budget " + std::to_string(spec.budget) + " exceeds the cap of " +
                                                   std::to_string(config_.evolve_budget_cap));
      }
      const auto result = evolve::evolve_segment(model, spec);
      out.update(evolve::to_json(result));
      out["spec"] = evolve::to_json(spec);
      out["seed"] = spec.seed;
      return {200, out};
    }
    return not_found();
  }

  if (n == 1 && parts[0] == "metrics" && method == "POST") {
    return {200, metrics::to_json(metrics::compute(grid_from_json(required(body, "tiles"))))};
  }

  if (n >= 1 && parts[0] == "sessions") {
    if (n == 1 && method == "GET") {
      json list = json::array();
      for (const auto& s : sessions_->list()) {
        list.push_back({{"id", s.id}, {"name", s.name}, {"version", s.version},
                        {"placements", s.placements.size()}, {"updated_at", s.updated_at}});
      }
      return {200, {{"sessions", list}}};
    }
    if (n == 1 && method == "POST") return {201, to_json(sessions_->create(field<std::string>(body, "name", "untitled")))};
    if (n == 2 && method == "GET") return {200, to_json(sessions_->get(parts[1]))};
    if (n == 2 && (method == "PUT" || method == "POST")) {
      if (!required(body, "version").is_number_integer()) {
        throw Error(ErrorCode::InvalidSpec, "\"version\" must be an integer");
      }
      const long version = body["version"].get<long>();
      std::optional<std::string> name;
      if (body.contains("name")) name = field<std::string>(body, "name", "");
      std::vector<Placement> placements;
      const auto& ps = required(body, "placements");
      if (!ps.is_array()) throw Error(ErrorCode::InvalidSpec, "\"placements\" must be an array");
      for (const auto& p : ps) placements.push_back(placement_from_json(p));
      return {200, to_json(sessions_->update(parts[1], version, std::move(name), std::move(placements)))};
    }
  }
  return not_found();
}

// ---------------------------------------------------------------- HTTP

struct HttpServer::Impl {
  explicit Impl(const Api& a) : api(a) {}
  const Api& api;
  httplib::Server server;
};

HttpServer::HttpServer(const Api& api) : impl_(std::make_unique<Impl>(api)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const Response r = impl_->api.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto& s = impl_->server;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"}});
  s.Get(".*", handler);
  s.Post(".*", handler);
  s.Put(".*", handler);
  s.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& s = impl_->server;
  if (port == 0) {
    const int bound = s.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
    return bound;
  }
  if (!s.bind_to_port(host, port)) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace levelblend::service
