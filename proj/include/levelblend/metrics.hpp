#pragma once

#include <array>
#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

#include "levelblend/corpus.hpp"

namespace levelblend::metrics {

enum class BlendClass { SmbOnly, KiOnly, Blended, Empty };

std::string_view blend_class_name(BlendClass c) noexcept;
BlendClass parse_blend_class(std::string_view name);

// Tile class membership. Hazards feed difficulty only; they are not solid.
bool is_solid(int tile_id) noexcept;
bool is_enemy(int tile_id) noexcept;
bool is_hazard(int tile_id) noexcept;
bool is_smb_foreground(int tile_id) noexcept;
bool is_ki_foreground(int tile_id) noexcept;

// Maximum possible variance of column heights in [0,16]; bounds the OLS mse.
inline constexpr double kNonlinearityNormalizer = 64.0;
inline constexpr int kDifficultyCap = 16;

struct Nonlinearity {
  double mse = 0.0;
  double pct = 0.0;
};

struct SegmentMetrics {
  double density_pct = 0.0;
  double difficulty_pct = 0.0;
  double nonlinearity_pct = 0.0;
  double nonlinearity_mse = 0.0;
  std::optional<double> smb_proportion_pct;
  std::array<int, kTileTypeCount> tile_counts{};
  BlendClass blend_class = BlendClass::Empty;

  bool operator==(const SegmentMetrics&) const = default;
};

std::array<int, kTileTypeCount> tile_counts(const TileGrid& grid);

double density(const TileGrid& grid);
double difficulty(const TileGrid& grid);

// Column height = 16 - topmost solid row, or 0 for a column with no solid tile.
std::array<int, kSegmentSize> column_heights(const TileGrid& grid);
Nonlinearity nonlinearity(const TileGrid& grid);

std::optional<double> smb_proportion(const TileGrid& grid);
std::optional<double> ki_proportion(const TileGrid& grid);
BlendClass blend_class(const TileGrid& grid);
double tile_fraction(const TileGrid& grid, int tile_id);

SegmentMetrics compute(const TileGrid& grid);

nlohmann::json to_json(const SegmentMetrics& m);

}  // namespace levelblend::metrics
