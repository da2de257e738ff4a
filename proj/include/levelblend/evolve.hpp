#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

#include "levelblend/cma.hpp"
#include "levelblend/corpus.hpp"
#include "levelblend/latent.hpp"
#include "levelblend/metrics.hpp"
#include "levelblend/models.hpp"

namespace levelblend::evolve {

enum class Objective { Density, Difficulty, Nonlinearity, SmbProportion, MaxTile };

std::string_view objective_name(Objective o) noexcept;  // "DENSITY", ..., "MAX_TILE"
Objective parse_objective(std::string_view name);

// Fitness assigned when SMB proportion is undefined (no foreground tiles).
inline constexpr double kUndefinedProportionPenalty = 100.0;

struct EvolutionSpec {
  Objective objective = Objective::Density;
  double target_pct = 50.0;  // ignored for MAX_TILE
  int tile_id = -1;          // MAX_TILE only
  long budget = 10000;
  double tolerance = 0.5;    // percentage points
  std::uint64_t seed = 1;
  double sigma0 = 0.5;

  // Throws Error(InvalidSpec).
  void validate() const;

  // Fitness at or below which the search stops early. For MAX_TILE only a
  // segment made entirely of the tile qualifies.
  double stop_fitness() const;
};

nlohmann::json to_json(const EvolutionSpec& spec);
EvolutionSpec spec_from_json(const nlohmann::json& value);

// The metric an objective targets, in percent; empty for an undefined SMB
// proportion.
std::optional<double> objective_metric(const TileGrid& grid, const EvolutionSpec& spec);

// |metric - target| for target objectives, -tile_fraction for MAX_TILE.
double fitness(const TileGrid& grid, const EvolutionSpec& spec);

// Decodes each candidate latent and scores it.
cma::BatchObjective make_fitness(const models::Model& model, const EvolutionSpec& spec);

struct EvolutionResult {
  TileGrid grid;
  latent::LatentVector latent;
  metrics::SegmentMetrics metrics;
  std::optional<double> achieved;
  double fitness = 0.0;
  cma::Result search;
};

// CMA-ES from the latent origin, using sigma0 and budget from `spec`.
EvolutionResult evolve_segment(const models::Model& model, const EvolutionSpec& spec);

nlohmann::json to_json(const EvolutionResult& result);

}  // namespace levelblend::evolve
