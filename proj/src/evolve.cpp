#include "levelblend/evolve.hpp"

#include <cctype>
#include <cmath>

namespace levelblend::evolve {

std::string_view objective_name(Objective o) noexcept {
  switch (o) {
    case Objective::Density: return "DENSITY";
    case Objective::Difficulty: return "DIFFICULTY";
    case Objective::Nonlinearity: return "NONLINEARITY";
    case Objective::SmbProportion: return "SMB_PROPORTION";
    case Objective::MaxTile: return "MAX_TILE";
  }
  return "DENSITY";
}

Objective parse_objective(std::string_view name) {
  std::string upper;
  for (char c : name) upper += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (Objective o : {Objective::Density, Objective::Difficulty, Objective::Nonlinearity,
                      Objective::SmbProportion, Objective::MaxTile}) {
    if (objective_name(o) == upper) return o;
  }
  if (upper == "NON_LINEARITY") return Objective::Nonlinearity;
  throw Error(ErrorCode::InvalidSpec, "unknown objective '" + std::string(name) + "'");
}

void EvolutionSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (objective == Objective::MaxTile) {
    if (!is_valid_tile_id(tile_id)) fail("MAX_TILE needs a tile id in [0,16]");
  } else if (!(target_pct >= 0.0 && target_pct <= 100.0)) {
    fail("target_pct must lie in [0,100]");
  }
  if (!(tolerance >= 0.0) || !std::isfinite(tolerance)) fail("tolerance must be non-negative");
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) fail("sigma0 must be positive");
}

double EvolutionSpec::stop_fitness() const {
  return objective == Objective::MaxTile ? -100.0 : tolerance;
}

nlohmann::json to_json(const EvolutionSpec& s) {
  nlohmann::json j = {
      {"objective", objective_name(s.objective)},
      {"budget", s.budget},
      {"tolerance", s.tolerance},
      {"seed", s.seed},
      {"sigma0", s.sigma0},
  };
  if (s.objective == Objective::MaxTile) {
    j["tile"] = s.tile_id;
  } else {
    j["target"] = s.target_pct;
  }
  return j;
}

EvolutionSpec spec_from_json(const nlohmann::json& j) {
  EvolutionSpec s;
  try {
    s.objective = parse_objective(j.at("objective").get<std::string>());
    s.target_pct = j.value("target", s.target_pct);
    s.tile_id = j.value("tile", s.tile_id);
    s.budget = j.value("budget", s.budget);
    s.tolerance = j.value("tolerance", s.tolerance);
    s.seed = j.value("seed", s.seed);
    s.sigma0 = j.value("sigma0", s.sigma0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("bad evolution spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::optional<double> objective_metric(const TileGrid& grid, const EvolutionSpec& spec) {
  switch (spec.objective) {
    case Objective::Density: return metrics::density(grid);
    case Objective::Difficulty: return metrics::difficulty(grid);
    case Objective::Nonlinearity: return metrics::nonlinearity(grid).pct;
    case Objective::SmbProportion: return metrics::smb_proportion(grid);
    case Objective::MaxTile: return metrics::tile_fraction(grid, spec.tile_id);
  }
  return std::nullopt;
}

double fitness(const TileGrid& grid, const EvolutionSpec& spec) {
  const auto value = objective_metric(grid, spec);
  if (spec.objective == Objective::MaxTile) return -*value;
  if (!value) return kUndefinedProportionPenalty;
  return std::abs(*value - spec.target_pct);
}

cma::BatchObjective make_fitness(const models::Model& model, const EvolutionSpec& spec) {
  spec.validate();
  return [&model, spec](const std::vector<cma::Vector>& zs) {
    const auto dim = static_cast<std::size_t>(model.latent_dim());
    std::vector<double> flat;
    flat.reserve(zs.size() * dim);
    for (const auto& z : zs) flat.insert(flat.end(), z.data(), z.data() + z.size());
    const auto grids = model.decode(flat);
    std::vector<double> out;
    out.reserve(grids.size());
    for (const auto& g : grids) out.push_back(fitness(g, spec));
    return out;
  };
}

EvolutionResult evolve_segment(const models::Model& model, const EvolutionSpec& spec) {
  spec.validate();
  cma::Options options;
  options.mean0 = cma::Vector::Zero(model.latent_dim());
  options.sigma0 = spec.sigma0;
  options.budget = spec.budget;
  options.stop_fitness = spec.stop_fitness();
  options.seed = spec.seed;

  cma::Result search = cma::minimize(make_fitness(model, spec), options);
  latent::LatentVector best(std::vector<double>(search.best.data(), search.best.data() + search.best.size()));
  TileGrid grid = latent::decode(model, best);

  EvolutionResult result{grid, best, metrics::compute(grid), objective_metric(grid, spec),
                         fitness(grid, spec), std::move(search)};
  return result;
}

nlohmann::json to_json(const EvolutionResult& r) {
  nlohmann::json j = levelblend::to_json(r.grid);
  j["latent"] = latent::to_json(r.latent);
  j["metrics"] = metrics::to_json(r.metrics);
  j["achieved"] = r.achieved ? nlohmann::json(*r.achieved) : nlohmann::json(nullptr);
  j["fitness"] = r.fitness;
  j["evaluations"] = r.search.evaluations;
  j["generations"] = r.search.generations;
  j["termination"] = cma::termination_name(r.search.termination);
  return j;
}

}  // namespace levelblend::evolve
