// levelblend command line: train, sample, evolve, analyze, serve, register.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "levelblend/analysis.hpp"
#include "levelblend/corpus.hpp"
#include "levelblend/evolve.hpp"
#include "levelblend/image.hpp"
#include "levelblend/latent.hpp"
#include "levelblend/metrics.hpp"
#include "levelblend/models.hpp"
#include "levelblend/service.hpp"

#ifndef LEVELBLEND_DEFAULT_DATA_DIR
#define LEVELBLEND_DEFAULT_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace levelblend;

namespace {

struct CorpusPaths {
  std::string smb_level;
  std::string ki_level;
};

fs::path data_dir() {
  if (const char* env = std::getenv("LEVELBLEND_DATA_DIR"); env && *env) return env;
  return LEVELBLEND_DEFAULT_DATA_DIR;
}

TrainingCorpus corpus_from(const CorpusPaths& paths) {
  if (paths.smb_level.empty() && paths.ki_level.empty()) return load_default_corpus(data_dir());
  const fs::path levels = data_dir() / "levels";
  return load_corpus(paths.smb_level.empty() ? levels / "mario-1-1.txt" : fs::path(paths.smb_level),
                     paths.ki_level.empty() ? levels / "kidicarus_5.txt" : fs::path(paths.ki_level));
}

void print_segment(const TileGrid& grid) {
  std::cout << serialize_text_block(grid) << "\n";
  std::cout << metrics::to_json(metrics::compute(grid)).dump() << "\n\n";
}

int run_train(const std::string& kind, int epochs, std::uint64_t seed, const std::string& out,
              int log_every, const CorpusPaths& paths) {
  const auto corpus = corpus_from(paths);
  const auto all = corpus.all();
  std::cerr << "corpus: " << corpus.smb.size() << " SMB + " << corpus.ki.size() << " KI segments\n";

  models::ModelConfig config;
  config.kind = models::parse_kind(kind);
  config.epochs = epochs;
  config.seed = seed;
  config.validate();

  const auto t0 = std::chrono::steady_clock::now();
  auto observer = [&](const models::EpochRecord& r) {
    if (log_every <= 0 || (r.epoch % log_every != 0 && r.epoch != 1 && r.epoch != epochs)) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "epoch " << r.epoch;
    if (r.reconstruction) std::cerr << " rec " << *r.reconstruction;
    if (r.kl) std::cerr << " kl " << *r.kl;
    if (r.generator) std::cerr << " gen " << *r.generator;
    if (r.discriminator) std::cerr << " disc " << *r.discriminator;
    std::cerr << " (" << s << " s)\n";
  };
  const auto ckpt = models::train(models::Model(config), all, observer);
  models::save_checkpoint(ckpt, out);
  if (ckpt.model->has_encoder()) {
    std::cerr << "reconstruction accuracy: " << models::reconstruction_accuracy(*ckpt.model, all) << "\n";
  }
  std::cout << out << "\n";
  return 0;
}

int run_sample(const std::string& model_dir, int count, std::uint64_t seed, const std::string& png_dir,
               bool as_json) {
  const auto ckpt = models::load_checkpoint(model_dir);
  const auto zs = latent::sample_latents(count, seed);
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const TileGrid grid = latent::decode(*ckpt.model, zs[i]);
    if (!png_dir.empty()) {
      fs::create_directories(png_dir);
      write_png(render_image(grid, 8), fs::path(png_dir) / ("sample_" + std::to_string(i) + ".png"));
    }
    if (as_json) {
      auto j = to_json(grid);
      j["latent"] = latent::to_json(zs[i]);
      j["metrics"] = metrics::to_json(metrics::compute(grid));
      out.push_back(std::move(j));
    } else {
      print_segment(grid);
    }
  }
  if (as_json) std::cout << nlohmann::json{{"seed", seed}, {"count", count}, {"segments", out}}.dump(2) << "\n";
  return 0;
}

int run_evolve(const std::string& model_dir, evolve::EvolutionSpec spec, const std::string& objective,
               const std::string& png) {
  spec.objective = evolve::parse_objective(objective);
  spec.validate();
  const auto ckpt = models::load_checkpoint(model_dir);
  const auto result = evolve::evolve_segment(*ckpt.model, spec);
  std::cerr << serialize_text_block(result.grid) << "\n";
  if (!png.empty()) write_png(render_image(result.grid, 8), png);
  auto j = evolve::to_json(result);
  j["spec"] = evolve::to_json(spec);
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct AnalyzeOptions {
  std::string model_dir;
  std::string experiment = "range";
  int n = 10000;
  int runs = 100;
  std::uint64_t seed = 1;
  long budget = 10000;
  std::string out = "results";
  std::string label;
  int jobs = 1;
};

int run_analyze(const AnalyzeOptions& o, const CorpusPaths& paths) {
  const auto ckpt = models::load_checkpoint(o.model_dir);
  const auto& model = *ckpt.model;
  auto report_files = [](const std::vector<fs::path>& files) {
    for (const auto& f : files) std::cout << f.string() << "\n";
  };
  const bool all = o.experiment == "all";
  if (all || o.experiment == "range") {
    const auto report = analysis::expressive_range(model, o.n, o.seed, o.label, o.jobs);
    const auto& f = report.fractions;
    std::cerr << "blend fractions: SMB_ONLY " << f.smb_only << " KI_ONLY " << f.ki_only << " BLENDED "
              << f.blended << " EMPTY " << f.empty << "\n";
    report_files(analysis::emit_artifacts(report, o.out));
  }
  if (all || o.experiment == "corner") {
    report_files(analysis::emit_artifacts(analysis::corner_data(model, o.n, o.seed, corpus_from(paths), o.label, o.jobs),
                                          o.out));
  }
  if (all || o.experiment == "accuracy") {
    std::vector<double> targets(analysis::kDefaultTargets.begin(), analysis::kDefaultTargets.end());
    const auto report = analysis::evolution_accuracy(model, analysis::kDefaultObjectives, targets, o.runs, o.seed,
                                                     o.budget, o.label, o.jobs);
    std::cerr << analysis::accuracy_csv(report);
    report_files(analysis::emit_artifacts(report, o.out));
  }
  return 0;
}

int run_serve(const std::string& host, int port, const std::string& registry_path, std::string sessions_dir,
              long budget_cap) {
  auto registry = std::make_shared<service::ModelRegistry>(service::ModelRegistry::load(registry_path));
  if (sessions_dir.empty()) sessions_dir = (fs::path(registry_path).parent_path() / "sessions").string();
  auto sessions = std::make_shared<service::SessionStore>(sessions_dir);
  service::ApiConfig config;
  config.evolve_budget_cap = budget_cap;
  service::Api api(registry, sessions, config);
  service::HttpServer server(api);
  const int bound = server.bind(host, port);
  std::cerr << "serving " << registry->entries().size() << " model(s) on http://" << host << ":" << bound
            << " (sessions in " << sessions_dir << ")\n";
  server.run();
  return 0;
}

int run_register(const std::string& registry_path, const std::string& id, const std::string& model_dir) {
  service::ModelRegistry registry;
  if (fs::exists(registry_path)) registry = service::ModelRegistry::load(registry_path);
  registry.add(id, fs::absolute(model_dir));
  registry.save(registry_path);
  std::cout << registry_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blend platformer level segments through a learned latent space"};
  app.require_subcommand(1);

  CorpusPaths paths;
  app.add_option("--smb-level", paths.smb_level, "SMB level text (default: $LEVELBLEND_DATA_DIR/levels/mario-1-1.txt)");
  app.add_option("--ki-level", paths.ki_level, "KI level text (default: $LEVELBLEND_DATA_DIR/levels/kidicarus_5.txt)");

  std::string kind = "vae";
  int epochs = 10000;
  std::uint64_t seed = 1;
  std::string out;
  int log_every = 100;
  auto* train = app.add_subcommand("train", "Train a model on the two-game corpus");
  train->add_option("--kind", kind, "vae, gan or vaegan")->capture_default_str();
  train->add_option("--epochs", epochs)->capture_default_str();
  train->add_option("--seed", seed)->capture_default_str();
  train->add_option("--out", out, "checkpoint directory")->required();
  train->add_option("--log-every", log_every, "epochs between progress lines (0 = quiet)")->capture_default_str();

  std::string model_dir;
  int count = 1;
  std::string png_dir;
  bool as_json = false;
  auto* sample = app.add_subcommand("sample", "Decode random latent vectors");
  sample->add_option("--model", model_dir, "checkpoint directory")->required();
  sample->add_option("--count", count)->capture_default_str();
  sample->add_option("--seed", seed)->capture_default_str();
  sample->add_option("--png-dir", png_dir, "also render each segment here");
  sample->add_flag("--json", as_json, "print JSON instead of text");

  evolve::EvolutionSpec spec;
  std::string objective = "DENSITY";
  std::string png;
  auto* evolve_cmd = app.add_subcommand("evolve", "Search the latent space for a segment meeting a target");
  evolve_cmd->add_option("--model", model_dir, "checkpoint directory")->required();
  evolve_cmd->add_option("--objective", objective, "DENSITY, DIFFICULTY, NONLINEARITY, SMB_PROPORTION or MAX_TILE")
      ->capture_default_str();
  evolve_cmd->add_option("--target", spec.target_pct, "target percentage")->capture_default_str();
  evolve_cmd->add_option("--tile", spec.tile_id, "tile id for MAX_TILE");
  evolve_cmd->add_option("--seed", spec.seed)->capture_default_str();
  evolve_cmd->add_option("--budget", spec.budget, "maximum evaluations")->capture_default_str();
  evolve_cmd->add_option("--tolerance", spec.tolerance)->capture_default_str();
  evolve_cmd->add_option("--png", png, "render the result here");

  AnalyzeOptions analyze_opts;
  auto* analyze = app.add_subcommand("analyze", "Run an experiment and write CSVs and plots");
  analyze->add_option("--model", analyze_opts.model_dir, "checkpoint directory")->required();
  analyze->add_option("--experiment", analyze_opts.experiment)
      ->check(CLI::IsMember({"range", "corner", "accuracy", "all"}))
      ->capture_default_str();
  analyze->add_option("--n", analyze_opts.n, "latent samples")->capture_default_str();
  analyze->add_option("--runs", analyze_opts.runs, "evolution runs per target")->capture_default_str();
  analyze->add_option("--seed", analyze_opts.seed)->capture_default_str();
  analyze->add_option("--budget", analyze_opts.budget, "evaluations per evolution run")->capture_default_str();
  analyze->add_option("--out", analyze_opts.out, "output directory")->capture_default_str();
  analyze->add_option("--label", analyze_opts.label, "name used in output files (default: model kind)");
  analyze->add_option("--jobs", analyze_opts.jobs, "worker threads")->capture_default_str();

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string registry_path = "registry.json";
  std::string sessions_dir;
  long budget_cap = 10000;
  auto* serve = app.add_subcommand("serve", "Serve the JSON API");
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--registry", registry_path, "model registry index")->capture_default_str();
  serve->add_option("--sessions", sessions_dir, "session directory (default: next to the registry)");
  serve->add_option("--budget-cap", budget_cap, "largest evolve budget accepted")->capture_default_str();

  std::string model_id;
  auto* reg = app.add_subcommand("register", "Add a checkpoint to a registry index");
  reg->add_option("--registry", registry_path)->capture_default_str();
  reg->add_option("--id", model_id)->required();
  reg->add_option("--model", model_dir, "checkpoint directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(kind, epochs, seed, out, log_every, paths);
    if (*sample) return run_sample(model_dir, count, seed, png_dir, as_json);
    if (*evolve_cmd) return run_evolve(model_dir, spec, objective, png);
    if (*analyze) return run_analyze(analyze_opts, paths);
    if (*serve) return run_serve(host, port, registry_path, sessions_dir, budget_cap);
    if (*reg) return run_register(registry_path, model_id, model_dir);
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
