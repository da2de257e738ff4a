#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "levelblend/error.hpp"

namespace levelblend {

enum class Game { Smb, Ki };

std::string_view game_name(Game game) noexcept;

inline constexpr int kSegmentSize = 16;
inline constexpr int kSegmentCells = kSegmentSize * kSegmentSize;
inline constexpr int kTileTypeCount = 17;

// Integer tile encodings. Ids 0-10 belong to SMB, 11-16 to KI.
namespace tile {
inline constexpr int kSmbGround = 0;
inline constexpr int kSmbBreakable = 1;
inline constexpr int kSmbBackground = 2;
inline constexpr int kSmbFullQuestion = 3;
inline constexpr int kSmbEmptyQuestion = 4;
inline constexpr int kSmbEnemy = 5;
inline constexpr int kSmbPipeTopLeft = 6;
inline constexpr int kSmbPipeTopRight = 7;
inline constexpr int kSmbPipeBottomLeft = 8;
inline constexpr int kSmbPipeBottomRight = 9;
inline constexpr int kSmbCoin = 10;
inline constexpr int kKiPlatform = 11;
inline constexpr int kKiMovablePlatform = 12;
inline constexpr int kKiDoor = 13;
inline constexpr int kKiGround = 14;
inline constexpr int kKiHazard = 15;
inline constexpr int kKiBackground = 16;
}  // namespace tile

struct TileType {
  int id;
  char vglc_char;
  Game game;
  std::string_view display_name;
};

const std::array<TileType, kTileTypeCount>& tile_types() noexcept;

constexpr bool is_valid_tile_id(int id) noexcept {
  return id >= 0 && id < kTileTypeCount;
}

// Character used for a tile in the segment text format: the VGLC character,
// except KI background which is written as '~'.
char segment_char(int tile_id);

struct Level {
  Game game = Game::Smb;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> cells;  // row-major, rows * cols

  int at(int row, int col) const { return cells[static_cast<std::size_t>(row * cols + col)]; }
};

// A 16x16 segment; row 0 is the top.
class TileGrid {
 public:
  TileGrid() { cells_.fill(tile::kSmbBackground); }

  static TileGrid filled(int tile_id);
  static TileGrid from_cells(std::span<const int> cells);

  int at(int row, int col) const { return cells_[index(row, col)]; }
  void set(int row, int col, int tile_id);

  std::span<const std::uint8_t, kSegmentCells> cells() const { return cells_; }

  bool operator==(const TileGrid&) const = default;

 private:
  static std::size_t index(int row, int col) {
    return static_cast<std::size_t>(row * kSegmentSize + col);
  }

  std::array<std::uint8_t, kSegmentCells> cells_{};
};

inline constexpr int kOneHotSize = kTileTypeCount * kSegmentCells;

// Channel-major 17x16x16 binary tensor: offset = (channel * 16 + row) * 16 + col.
using OneHotGrid = std::array<std::uint8_t, kOneHotSize>;

constexpr std::size_t one_hot_offset(int channel, int row, int col) noexcept {
  return static_cast<std::size_t>((channel * kSegmentSize + row) * kSegmentSize + col);
}

Level parse_level(std::string_view text, Game game);
Level read_level_file(const std::filesystem::path& path, Game game);

// Pads SMB levels to 16 rows with background at the top; KI levels must
// already be 16 columns wide.
Level normalize_level(const Level& level);

// SMB: left to right, count = cols - 15. KI: bottom to top, count = rows - 15.
std::vector<TileGrid> extract_windows(const Level& level);

OneHotGrid one_hot(const TileGrid& grid);

// Argmax over the channel axis of a channel-major 17x16x16 tensor. Ties go to
// the lowest channel id.
TileGrid argmax_decode(std::span<const float> tensor);

std::vector<std::string> serialize_text(const TileGrid& grid);
std::string serialize_text_block(const TileGrid& grid);  // lines joined by '\n'
TileGrid parse_segment_text(std::span<const std::string> lines);
TileGrid parse_segment_text(std::string_view block);

nlohmann::json to_json(const TileGrid& grid);  // {"tiles": [[int;16];16]}
TileGrid grid_from_json(const nlohmann::json& value);

struct TrainingCorpus {
  std::vector<TileGrid> smb;
  std::vector<TileGrid> ki;

  std::vector<TileGrid> all() const;  // SMB segments first, then KI
  std::size_t size() const { return smb.size() + ki.size(); }
};

TrainingCorpus load_corpus(const std::filesystem::path& smb_level,
                           const std::filesystem::path& ki_level);

// Bundled level files under <data_dir>/levels.
TrainingCorpus load_default_corpus(const std::filesystem::path& data_dir);

// FNV-1a over the cell bytes of every segment, as 16 hex digits.
std::string corpus_hash(std::span<const TileGrid> segments);

}  // namespace levelblend
