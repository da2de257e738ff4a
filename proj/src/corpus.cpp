#include "levelblend/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace levelblend {

namespace {

constexpr char kBlendedKiBackground = '~';

std::string char_repr(char c) {
  if (c >= 0x20 && c < 0x7f) return std::string(1, c);
  char buf[8];
  std::snprintf(buf, sizeof buf, "\\x%02x", static_cast<unsigned char>(c));
  return buf;
}

int lookup_vglc(char c, Game game) {
  for (const TileType& t : tile_types()) {
    if (t.game == game && t.vglc_char == c) return t.id;
  }
  return -1;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  // Trailing blank lines are not rows.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownCharacter: return "UNKNOWN_CHARACTER";
    case ErrorCode::RaggedLines: return "RAGGED_LINES";
    case ErrorCode::CannotNormalize: return "CANNOT_NORMALIZE";
    case ErrorCode::TooSmall: return "TOO_SMALL";
    case ErrorCode::InvalidShape: return "INVALID_SHAPE";
    case ErrorCode::InvalidTileId: return "INVALID_TILE_ID";
    case ErrorCode::InvalidConfig: return "INVALID_CONFIG";
    case ErrorCode::EmptyCorpus: return "EMPTY_CORPUS";
    case ErrorCode::NonFiniteLoss: return "NON_FINITE_LOSS";
    case ErrorCode::CorruptCheckpoint: return "CORRUPT_CHECKPOINT";
    case ErrorCode::KindMismatch: return "KIND_MISMATCH";
    case ErrorCode::NoEncoder: return "NO_ENCODER";
    case ErrorCode::NonFiniteLatent: return "NON_FINITE_LATENT";
    case ErrorCode::InvalidBudget: return "INVALID_BUDGET";
    case ErrorCode::NonFiniteFitness: return "NON_FINITE_FITNESS";
    case ErrorCode::InvalidSpec: return "INVALID_SPEC";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::VersionConflict: return "VERSION_CONFLICT";
    case ErrorCode::BudgetExceeded: return "BUDGET_EXCEEDED";
    case ErrorCode::BadRequest: return "BAD_REQUEST";
  }
  return "UNKNOWN";
}

std::string_view game_name(Game game) noexcept {
  return game == Game::Smb ? "SMB" : "KI";
}

const std::array<TileType, kTileTypeCount>& tile_types() noexcept {
  static const std::array<TileType, kTileTypeCount> types{{
      {0, 'X', Game::Smb, "SMB Ground"},
      {1, 'S', Game::Smb, "SMB Breakable"},
      {2, '-', Game::Smb, "SMB Background"},
      {3, '?', Game::Smb, "SMB Full Question"},
      {4, 'Q', Game::Smb, "SMB Empty Question"},
      {5, 'E', Game::Smb, "SMB Enemy"},
      {6, '<', Game::Smb, "SMB Pipe Top Left"},
      {7, '>', Game::Smb, "SMB Pipe Top Right"},
      {8, '[', Game::Smb, "SMB Pipe Bottom Left"},
      {9, ']', Game::Smb, "SMB Pipe Bottom Right"},
      {10, 'o', Game::Smb, "SMB Coin"},
      {11, 'T', Game::Ki, "KI Platform"},
      {12, 'M', Game::Ki, "KI Movable Platform"},
      {13, 'D', Game::Ki, "KI Door"},
      {14, '#', Game::Ki, "KI Ground"},
      {15, 'H', Game::Ki, "KI Hazard"},
      {16, '-', Game::Ki, "KI Background"},
  }};
  return types;
}

char segment_char(int tile_id) {
  if (!is_valid_tile_id(tile_id)) {
    throw Error(ErrorCode::InvalidTileId, "tile id " + std::to_string(tile_id) + " out of range");
  }
  if (tile_id == tile::kKiBackground) return kBlendedKiBackground;
  return tile_types()[static_cast<std::size_t>(tile_id)].vglc_char;
}

TileGrid TileGrid::filled(int tile_id) {
  if (!is_valid_tile_id(tile_id)) {
    throw Error(ErrorCode::InvalidTileId, "tile id " + std::to_string(tile_id) + " out of range");
  }
  TileGrid g;
  g.cells_.fill(static_cast<std::uint8_t>(tile_id));
  return g;
}

TileGrid TileGrid::from_cells(std::span<const int> cells) {
  if (cells.size() != static_cast<std::size_t>(kSegmentCells)) {
    throw Error(ErrorCode::InvalidShape,
                "expected 256 cells, got " + std::to_string(cells.size()));
  }
  TileGrid g;
  for (int i = 0; i < kSegmentCells; ++i) {
    g.set(i / kSegmentSize, i % kSegmentSize, cells[static_cast<std::size_t>(i)]);
  }
  return g;
}

void TileGrid::set(int row, int col, int tile_id) {
  if (row < 0 || row >= kSegmentSize || col < 0 || col >= kSegmentSize) {
    throw Error(ErrorCode::InvalidShape, "cell (" + std::to_string(row) + "," +
                                             std::to_string(col) + ") outside 16x16 grid");
  }
  if (!is_valid_tile_id(tile_id)) {
    throw Error(ErrorCode::InvalidTileId, "tile id " + std::to_string(tile_id) + " out of range");
  }
  cells_[index(row, col)] = static_cast<std::uint8_t>(tile_id);
}

Level parse_level(std::string_view text, Game game) {
  const auto lines = split_lines(text);
  Level level;
  level.game = game;
  level.rows = static_cast<int>(lines.size());
  level.cols = lines.empty() ? 0 : static_cast<int>(lines.front().size());
  level.cells.reserve(static_cast<std::size_t>(level.rows) * static_cast<std::size_t>(level.cols));
  for (int r = 0; r < level.rows; ++r) {
    const std::string_view line = lines[static_cast<std::size_t>(r)];
    if (static_cast<int>(line.size()) != level.cols) {
      throw Error(ErrorCode::RaggedLines, "line " + std::to_string(r + 1) + " has length " +
                                              std::to_string(line.size()) + ", expected " +
                                              std::to_string(level.cols));
    }
    for (int c = 0; c < level.cols; ++c) {
      const char ch = line[static_cast<std::size_t>(c)];
      const int id = lookup_vglc(ch, game);
      if (id < 0) {
        throw Error(ErrorCode::UnknownCharacter,
                    "unknown " + std::string(game_name(game)) + " character '" + char_repr(ch) +
                        "' at line " + std::to_string(r + 1) + ", column " + std::to_string(c + 1));
      }
      level.cells.push_back(static_cast<std::uint8_t>(id));
    }
  }
  return level;
}

Level read_level_file(const std::filesystem::path& path, Game game) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open level file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_level(buf.str(), game);
}

Level normalize_level(const Level& level) {
  if (level.game == Game::Ki) {
    if (level.cols != kSegmentSize) {
      throw Error(ErrorCode::CannotNormalize,
                  "KI level must be 16 columns wide, got " + std::to_string(level.cols));
    }
    return level;
  }
  if (level.rows > kSegmentSize) {
    throw Error(ErrorCode::CannotNormalize,
                "SMB level has " + std::to_string(level.rows) + " rows, at most 16 allowed");
  }
  const int pad = kSegmentSize - level.rows;
  Level out;
  out.game = Game::Smb;
  out.rows = kSegmentSize;
  out.cols = level.cols;
  out.cells.assign(static_cast<std::size_t>(pad) * static_cast<std::size_t>(level.cols),
                   static_cast<std::uint8_t>(tile::kSmbBackground));
  out.cells.insert(out.cells.end(), level.cells.begin(), level.cells.end());
  return out;
}

std::vector<TileGrid> extract_windows(const Level& level) {
  std::vector<TileGrid> windows;
  if (level.game == Game::Smb) {
    if (level.rows != kSegmentSize) {
      throw Error(ErrorCode::CannotNormalize, "SMB level is not normalized to 16 rows");
    }
    if (level.cols < kSegmentSize) {
      throw Error(ErrorCode::TooSmall, "SMB level narrower than 16 columns");
    }
    for (int start = 0; start + kSegmentSize <= level.cols; ++start) {
      TileGrid g;
      for (int r = 0; r < kSegmentSize; ++r) {
        for (int c = 0; c < kSegmentSize; ++c) g.set(r, c, level.at(r, start + c));
      }
      windows.push_back(g);
    }
  } else {
    if (level.cols != kSegmentSize) {
      throw Error(ErrorCode::CannotNormalize, "KI level is not 16 columns wide");
    }
    if (level.rows < kSegmentSize) {
      throw Error(ErrorCode::TooSmall, "KI level shorter than 16 rows");
    }
    // Bottom window first: KI is played upward.
    for (int top = level.rows - kSegmentSize; top >= 0; --top) {
      TileGrid g;
      for (int r = 0; r < kSegmentSize; ++r) {
        for (int c = 0; c < kSegmentSize; ++c) g.set(r, c, level.at(top + r, c));
      }
      windows.push_back(g);
    }
  }
  return windows;
}

OneHotGrid one_hot(const TileGrid& grid) {
  OneHotGrid out{};
  for (int r = 0; r < kSegmentSize; ++r) {
    for (int c = 0; c < kSegmentSize; ++c) out[one_hot_offset(grid.at(r, c), r, c)] = 1;
  }
  return out;
}

TileGrid argmax_decode(std::span<const float> tensor) {
  if (tensor.size() != static_cast<std::size_t>(kOneHotSize)) {
    throw Error(ErrorCode::InvalidShape,
                "expected 17x16x16 tensor (4352 values), got " + std::to_string(tensor.size()));
  }
  TileGrid g;
  for (int r = 0; r < kSegmentSize; ++r) {
    for (int c = 0; c < kSegmentSize; ++c) {
      int best = 0;
      float best_value = tensor[one_hot_offset(0, r, c)];
      for (int ch = 1; ch < kTileTypeCount; ++ch) {
        const float v = tensor[one_hot_offset(ch, r, c)];
        if (v > best_value) {
          best = ch;
          best_value = v;
        }
      }
      g.set(r, c, best);
    }
  }
  return g;
}

std::vector<std::string> serialize_text(const TileGrid& grid) {
  std::vector<std::string> lines(kSegmentSize, std::string(kSegmentSize, ' '));
  for (int r = 0; r < kSegmentSize; ++r) {
    for (int c = 0; c < kSegmentSize; ++c) {
      lines[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = segment_char(grid.at(r, c));
    }
  }
  return lines;
}

std::string serialize_text_block(const TileGrid& grid) {
  std::string out;
  for (const auto& line : serialize_text(grid)) {
    if (!out.empty()) out += '\n';
    out += line;
  }
  return out;
}

TileGrid parse_segment_text(std::span<const std::string> lines) {
  if (lines.size() != static_cast<std::size_t>(kSegmentSize)) {
    throw Error(ErrorCode::InvalidShape,
                "segment text needs 16 lines, got " + std::to_string(lines.size()));
  }
  TileGrid g;
  for (int r = 0; r < kSegmentSize; ++r) {
    const std::string& line = lines[static_cast<std::size_t>(r)];
    if (line.size() != static_cast<std::size_t>(kSegmentSize)) {
      throw Error(ErrorCode::RaggedLines, "segment line " + std::to_string(r + 1) +
                                              " has length " + std::to_string(line.size()));
    }
    for (int c = 0; c < kSegmentSize; ++c) {
      const char ch = line[static_cast<std::size_t>(c)];
      int id = -1;
      if (ch == kBlendedKiBackground) {
        id = tile::kKiBackground;
      } else if (ch == '-') {
        id = tile::kSmbBackground;
      } else {
        id = lookup_vglc(ch, Game::Smb);
        if (id < 0) id = lookup_vglc(ch, Game::Ki);
      }
      if (id < 0) {
        throw Error(ErrorCode::UnknownCharacter,
                    "unknown segment character '" + char_repr(ch) + "' at line " +
                        std::to_string(r + 1) + ", column " + std::to_string(c + 1));
      }
      g.set(r, c, id);
    }
  }
  return g;
}

TileGrid parse_segment_text(std::string_view block) {
  std::vector<std::string> lines;
  for (auto line : split_lines(block)) lines.emplace_back(line);
  return parse_segment_text(lines);
}

nlohmann::json to_json(const TileGrid& grid) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < kSegmentSize; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < kSegmentSize; ++c) row.push_back(grid.at(r, c));
    rows.push_back(std::move(row));
  }
  return {{"tiles", std::move(rows)}};
}

TileGrid grid_from_json(const nlohmann::json& value) {
  const nlohmann::json& rows = value.is_object() && value.contains("tiles") ? value["tiles"] : value;
  if (!rows.is_array() || rows.size() != static_cast<std::size_t>(kSegmentSize)) {
    throw Error(ErrorCode::InvalidShape, "\"tiles\" must be an array of 16 rows");
  }
  TileGrid g;
  for (int r = 0; r < kSegmentSize; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(kSegmentSize)) {
      throw Error(ErrorCode::InvalidShape, "row " + std::to_string(r) + " must hold 16 tiles");
    }
    for (int c = 0; c < kSegmentSize; ++c) {
      const auto& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_number_integer()) {
        throw Error(ErrorCode::InvalidTileId, "tile ids must be integers");
      }
      g.set(r, c, cell.get<int>());
    }
  }
  return g;
}

std::vector<TileGrid> TrainingCorpus::all() const {
  std::vector<TileGrid> out;
  out.reserve(size());
  out.insert(out.end(), smb.begin(), smb.end());
  out.insert(out.end(), ki.begin(), ki.end());
  return out;
}

TrainingCorpus load_corpus(const std::filesystem::path& smb_level,
                           const std::filesystem::path& ki_level) {
  TrainingCorpus corpus;
  corpus.smb = extract_windows(normalize_level(read_level_file(smb_level, Game::Smb)));
  corpus.ki = extract_windows(normalize_level(read_level_file(ki_level, Game::Ki)));
  return corpus;
}

TrainingCorpus load_default_corpus(const std::filesystem::path& data_dir) {
  return load_corpus(data_dir / "levels" / "mario-1-1.txt", data_dir / "levels" / "kidicarus_5.txt");
}

std::string corpus_hash(std::span<const TileGrid> segments) {
  std::uint64_t h = 14695981039346656037ull;
  for (const TileGrid& g : segments) {
    for (std::uint8_t v : g.cells()) {
      h ^= v;
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace levelblend
