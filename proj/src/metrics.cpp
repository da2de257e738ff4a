#include "levelblend/metrics.hpp"

#include <algorithm>

namespace levelblend::metrics {

namespace {

struct GameCounts {
  int smb = 0;
  int ki = 0;
};

GameCounts foreground_counts(const TileGrid& grid) {
  GameCounts counts;
  for (std::uint8_t v : grid.cells()) {
    if (is_smb_foreground(v)) ++counts.smb;
    if (is_ki_foreground(v)) ++counts.ki;
  }
  return counts;
}

}  // namespace

std::string_view blend_class_name(BlendClass c) noexcept {
  switch (c) {
    case BlendClass::SmbOnly: return "SMB_ONLY";
    case BlendClass::KiOnly: return "KI_ONLY";
    case BlendClass::Blended: return "BLENDED";
    case BlendClass::Empty: return "EMPTY";
  }
  return "EMPTY";
}

BlendClass parse_blend_class(std::string_view name) {
  for (BlendClass c : {BlendClass::SmbOnly, BlendClass::KiOnly, BlendClass::Blended, BlendClass::Empty}) {
    if (blend_class_name(c) == name) return c;
  }
  throw Error(ErrorCode::InvalidSpec, "unknown blend class " + std::string(name));
}

bool is_solid(int tile_id) noexcept {
  switch (tile_id) {
    case tile::kSmbGround:
    case tile::kSmbBreakable:
    case tile::kSmbFullQuestion:
    case tile::kSmbEmptyQuestion:
    case tile::kSmbPipeTopLeft:
    case tile::kSmbPipeTopRight:
    case tile::kSmbPipeBottomLeft:
    case tile::kSmbPipeBottomRight:
    case tile::kKiPlatform:
    case tile::kKiMovablePlatform:
    case tile::kKiGround:
      return true;
    default:
      return false;
  }
}

bool is_enemy(int tile_id) noexcept { return tile_id == tile::kSmbEnemy; }
bool is_hazard(int tile_id) noexcept { return tile_id == tile::kKiHazard; }

bool is_smb_foreground(int tile_id) noexcept {
  return tile_id >= 0 && tile_id <= tile::kSmbCoin && tile_id != tile::kSmbBackground;
}

bool is_ki_foreground(int tile_id) noexcept {
  return tile_id >= tile::kKiPlatform && tile_id <= tile::kKiHazard;
}

std::array<int, kTileTypeCount> tile_counts(const TileGrid& grid) {
  std::array<int, kTileTypeCount> counts{};
  for (std::uint8_t v : grid.cells()) ++counts[v];
  return counts;
}

double density(const TileGrid& grid) {
  const auto cells = grid.cells();
  const auto solid = std::count_if(cells.begin(), cells.end(), [](int v) { return is_solid(v); });
  return 100.0 * static_cast<double>(solid) / kSegmentCells;
}

double difficulty(const TileGrid& grid) {
  const auto cells = grid.cells();
  const auto n = std::count_if(cells.begin(), cells.end(),
                               [](int v) { return is_enemy(v) || is_hazard(v); });
  return 100.0 * static_cast<double>(std::min<long>(n, kDifficultyCap)) / kDifficultyCap;
}

std::array<int, kSegmentSize> column_heights(const TileGrid& grid) {
  std::array<int, kSegmentSize> heights{};
  for (int c = 0; c < kSegmentSize; ++c) {
    for (int r = 0; r < kSegmentSize; ++r) {
      if (is_solid(grid.at(r, c))) {
        heights[static_cast<std::size_t>(c)] = kSegmentSize - r;
        break;
      }
    }
  }
  return heights;
}

Nonlinearity nonlinearity(const TileGrid& grid) {
  const auto heights = column_heights(grid);
  constexpr double n = kSegmentSize;
  constexpr double x_mean = (n - 1.0) / 2.0;
  double y_mean = 0.0;
  for (int h : heights) y_mean += h;
  y_mean /= n;

  double sxx = 0.0;
  double sxy = 0.0;
  for (int k = 0; k < kSegmentSize; ++k) {
    const double dx = k - x_mean;
    sxx += dx * dx;
    sxy += dx * (heights[static_cast<std::size_t>(k)] - y_mean);
  }
  const double slope = sxy / sxx;
  const double intercept = y_mean - slope * x_mean;

  double sse = 0.0;
  for (int k = 0; k < kSegmentSize; ++k) {
    const double residual = heights[static_cast<std::size_t>(k)] - (slope * k + intercept);
    sse += residual * residual;
  }
  Nonlinearity out;
  out.mse = sse / n;
  out.pct = std::clamp(100.0 * out.mse / kNonlinearityNormalizer, 0.0, 100.0);
  return out;
}

std::optional<double> smb_proportion(const TileGrid& grid) {
  const auto counts = foreground_counts(grid);
  const int total = counts.smb + counts.ki;
  if (total == 0) return std::nullopt;
  return 100.0 * counts.smb / total;
}

std::optional<double> ki_proportion(const TileGrid& grid) {
  const auto counts = foreground_counts(grid);
  const int total = counts.smb + counts.ki;
  if (total == 0) return std::nullopt;
  return 100.0 * counts.ki / total;
}

BlendClass blend_class(const TileGrid& grid) {
  const auto counts = foreground_counts(grid);
  if (counts.smb > 0 && counts.ki > 0) return BlendClass::Blended;
  if (counts.smb > 0) return BlendClass::SmbOnly;
  if (counts.ki > 0) return BlendClass::KiOnly;
  return BlendClass::Empty;
}

double tile_fraction(const TileGrid& grid, int tile_id) {
  if (!is_valid_tile_id(tile_id)) {
    throw Error(ErrorCode::InvalidTileId, "tile id " + std::to_string(tile_id) + " out of range");
  }
  const auto cells = grid.cells();
  return 100.0 * static_cast<double>(std::count(cells.begin(), cells.end(), tile_id)) / kSegmentCells;
}

SegmentMetrics compute(const TileGrid& grid) {
  SegmentMetrics m;
  m.density_pct = density(grid);
  m.difficulty_pct = difficulty(grid);
  const auto nl = nonlinearity(grid);
  m.nonlinearity_mse = nl.mse;
  m.nonlinearity_pct = nl.pct;
  m.smb_proportion_pct = smb_proportion(grid);
  m.tile_counts = tile_counts(grid);
  m.blend_class = blend_class(grid);
  return m;
}

nlohmann::json to_json(const SegmentMetrics& m) {
  nlohmann::json j;
  j["density"] = m.density_pct;
  j["difficulty"] = m.difficulty_pct;
  j["nonlinearity_mse"] = m.nonlinearity_mse;
  j["nonlinearity"] = m.nonlinearity_pct;
  j["smb_proportion"] = m.smb_proportion_pct ? nlohmann::json(*m.smb_proportion_pct) : nlohmann::json(nullptr);
  j["tile_counts"] = m.tile_counts;
  j["blend_class"] = blend_class_name(m.blend_class);
  return j;
}

}  // namespace levelblend::metrics
