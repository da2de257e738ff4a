// Shared fixtures and brute-force oracles for the unit tests.
#pragma once

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "levelblend/corpus.hpp"

#ifndef LEVELBLEND_TEST_DATA_DIR
#define LEVELBLEND_TEST_DATA_DIR "data"
#endif

namespace testsupport {

inline std::filesystem::path data_dir() { return LEVELBLEND_TEST_DATA_DIR; }

// Fresh scratch directory under the system temp dir, removed on exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("levelblend_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Grids from a few generators so every metric sees non-trivial inputs:
// uniform ids, mostly-background sprinkles, and column skylines.
inline levelblend::TileGrid random_grid(std::mt19937_64& rng) {
  using levelblend::TileGrid;
  std::uniform_int_distribution<int> id(0, levelblend::kTileTypeCount - 1);
  std::uniform_int_distribution<int> mode_pick(0, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TileGrid g;
  const int mode = mode_pick(rng);
  const int background = unit(rng) < 0.5 ? 2 : 16;
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) g.set(r, c, background);
  }
  if (mode == 0) {
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < 16; ++c) g.set(r, c, id(rng));
    }
  } else if (mode == 1) {
    const double p = unit(rng) * 0.3;
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < 16; ++c) {
        if (unit(rng) < p) g.set(r, c, id(rng));
      }
    }
  } else {
    std::uniform_int_distribution<int> height(0, 16);
    const std::array<int, 4> solids{0, 1, 11, 14};
    std::uniform_int_distribution<int> solid(0, 3);
    for (int c = 0; c < 16; ++c) {
      const int h = height(rng);
      const int t = solids[static_cast<std::size_t>(solid(rng))];
      for (int r = 16 - h; r < 16; ++r) g.set(r, c, t);
      if (h < 16 && unit(rng) < 0.2) g.set(15 - h, c, unit(rng) < 0.5 ? 5 : 15);
    }
  }
  return g;
}

// --- Oracles written against the tile table, not the library predicates.

inline bool oracle_solid(int id) {
  switch (id) {
    case 0: case 1: case 3: case 4: case 6: case 7: case 8: case 9:  // X S ? Q < > [ ]
    case 11: case 12: case 14:                                       // T M #
      return true;
    default:
      return false;
  }
}

inline double oracle_density(const levelblend::TileGrid& g) {
  int n = 0;
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) n += oracle_solid(g.at(r, c));
  }
  return 100.0 * n / 256.0;
}

inline double oracle_difficulty(const levelblend::TileGrid& g) {
  int n = 0;
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) n += g.at(r, c) == 5 || g.at(r, c) == 15;
  }
  return 100.0 * std::min(n, 16) / 16.0;
}

inline std::array<int, 16> oracle_heights(const levelblend::TileGrid& g) {
  std::array<int, 16> h{};
  for (int c = 0; c < 16; ++c) {
    for (int r = 0; r < 16; ++r) {
      if (oracle_solid(g.at(r, c))) {
        h[static_cast<std::size_t>(c)] = 16 - r;
        break;
      }
    }
  }
  return h;
}

// OLS through the 2x2 normal equations, solved by Cramer's rule in long
// double; returns the mean squared residual.
inline double oracle_ols_mse(const std::array<int, 16>& h) {
  long double sk = 0, skk = 0, sh = 0, skh = 0;
  for (int k = 0; k < 16; ++k) {
    sk += k;
    skk += static_cast<long double>(k) * k;
    sh += h[static_cast<std::size_t>(k)];
    skh += static_cast<long double>(k) * h[static_cast<std::size_t>(k)];
  }
  const long double n = 16;
  const long double det = skk * n - sk * sk;
  const long double a = (skh * n - sk * sh) / det;
  const long double b = (skk * sh - sk * skh) / det;
  long double sse = 0;
  for (int k = 0; k < 16; ++k) {
    const long double e = h[static_cast<std::size_t>(k)] - (a * k + b);
    sse += e * e;
  }
  return static_cast<double>(sse / n);
}

struct ProportionCounts {
  int smb = 0;
  int ki = 0;
};

inline ProportionCounts oracle_foreground(const levelblend::TileGrid& g) {
  ProportionCounts p;
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) {
      const int id = g.at(r, c);
      if (id <= 10 && id != 2) ++p.smb;
      if (id >= 11 && id <= 15) ++p.ki;
    }
  }
  return p;
}

}  // namespace testsupport
