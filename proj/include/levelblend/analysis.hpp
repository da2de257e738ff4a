#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levelblend/corpus.hpp"
#include "levelblend/evolve.hpp"
#include "levelblend/metrics.hpp"
#include "levelblend/models.hpp"

namespace levelblend::analysis {

struct BlendFractions {
  double smb_only = 0.0;
  double ki_only = 0.0;
  double blended = 0.0;
  double empty = 0.0;

  bool operator==(const BlendFractions&) const = default;
};

BlendFractions blend_fractions(const std::vector<metrics::SegmentMetrics>& samples);

struct ExpressiveRangeReport {
  models::ModelKind kind = models::ModelKind::Vae;
  std::string label;  // used in file names
  int n = 0;
  std::uint64_t seed = 0;
  std::vector<metrics::SegmentMetrics> samples;
  BlendFractions fractions;
};

// Decodes n standard-normal latents drawn from `seed`.
ExpressiveRangeReport expressive_range(const models::Model& model, int n, std::uint64_t seed,
                                       std::string label = {}, int jobs = 1);

enum class PointSource { Generated, Smb, Ki };
std::string_view source_name(PointSource s) noexcept;  // "generated", "smb", "ki"

struct CornerPoint {
  PointSource source = PointSource::Generated;
  std::array<double, 4> values{};  // density, difficulty, nonlinearity pct, SMB proportion
};

inline constexpr std::array<const char*, 4> kCornerMetrics{"density", "difficulty", "nonlinearity",
                                                           "smb_proportion"};
inline constexpr int kHistogramBins = 10;

struct CornerData {
  models::ModelKind kind = models::ModelKind::Vae;
  std::string label;
  int n = 0;
  std::uint64_t seed = 0;
  std::vector<CornerPoint> points;
  int excluded_generated = 0;  // undefined SMB proportion
  int excluded_training = 0;
  // [metric][bin], generated points only; 100 falls in the last bin.
  std::array<std::array<int, kHistogramBins>, 4> histograms{};

  int count(PointSource s) const;
};

CornerData corner_data(const models::Model& model, int n, std::uint64_t seed, const TrainingCorpus& corpus,
                       std::string label = {}, int jobs = 1);

struct AccuracyRow {
  evolve::Objective objective = evolve::Objective::Density;
  double target = 0.0;
  int runs = 0;
  int defined = 0;  // runs whose achieved value exists
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

struct EvolvedRun {
  evolve::Objective objective = evolve::Objective::Density;
  double target = 0.0;
  int run = 0;
  std::uint64_t seed = 0;
  std::optional<double> achieved;
  double fitness = 0.0;
  long evaluations = 0;
  cma::Termination termination = cma::Termination::Budget;
  TileGrid grid;
};

struct AccuracyReport {
  models::ModelKind kind = models::ModelKind::Vae;
  std::string label;
  int runs = 0;
  long budget = 0;
  std::uint64_t base_seed = 0;
  std::vector<AccuracyRow> rows;
  std::vector<EvolvedRun> evolved;
};

inline constexpr std::array<double, 5> kDefaultTargets{0.0, 25.0, 50.0, 75.0, 100.0};
inline const std::vector<evolve::Objective> kDefaultObjectives{
    evolve::Objective::Density, evolve::Objective::Difficulty, evolve::Objective::Nonlinearity,
    evolve::Objective::SmbProportion};

// Seed of one evolution run, distinct across (objective, target, run).
std::uint64_t run_seed(std::uint64_t base_seed, evolve::Objective objective, double target, int run);

AccuracyReport evolution_accuracy(const models::Model& model, const std::vector<evolve::Objective>& objectives,
                                  const std::vector<double>& targets, int runs, std::uint64_t base_seed,
                                  long budget = 10000, std::string label = {}, int jobs = 1);

// CSV text, exactly as written by emit_artifacts.
std::string range_csv(const ExpressiveRangeReport& report);
std::string corner_csv(const CornerData& data);
std::string accuracy_csv(const AccuracyReport& report);
std::string evolved_csv(const AccuracyReport& report);

// Number formatting shared by all CSVs; "NA" for an empty value.
std::string format_value(double v);
std::string format_value(std::optional<double> v);

// Each call writes CSVs, PNG plots and a manifest into out_dir and returns
// the written paths. Throws Error(IoError).
std::vector<std::filesystem::path> emit_artifacts(const ExpressiveRangeReport& report,
                                                  const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> emit_artifacts(const CornerData& data, const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> emit_artifacts(const AccuracyReport& report,
                                                  const std::filesystem::path& out_dir);

// Blend fractions recomputed from the blend_class column of a range CSV.
BlendFractions fractions_from_range_csv(const std::string& csv);

}  // namespace levelblend::analysis
