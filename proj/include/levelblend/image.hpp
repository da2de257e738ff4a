#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "levelblend/corpus.hpp"

namespace levelblend {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  bool operator==(const Rgb&) const = default;
};

class Image {
 public:
  Image(int width, int height, Rgb fill = {255, 255, 255});

  int width() const { return width_; }
  int height() const { return height_; }

  Rgb pixel(int x, int y) const;
  void set_pixel(int x, int y, Rgb color);  // silently clips
  void fill_rect(int x, int y, int w, int h, Rgb color);

  const std::vector<std::uint8_t>& rgb() const { return rgb_; }

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> rgb_;
};

// Fixed tile palette, indexed by tile id.
//   0 ground       (139, 69, 19)    9 pipe bot R   (0, 128, 0)
//   1 breakable    (205, 92, 60)   10 coin         (255, 215, 0)
//   2 SMB sky      (107, 140, 255) 11 platform     (230, 230, 230)
//   3 question     (255, 165, 0)   12 movable      (150, 150, 255)
//   4 used block   (160, 110, 60)  13 door         (120, 40, 140)
//   5 enemy        (220, 20, 60)   14 KI ground    (90, 90, 90)
//   6 pipe top L   (0, 200, 0)     15 hazard       (255, 60, 0)
//   7 pipe top R   (0, 180, 0)     16 KI sky       (20, 20, 40)
//   8 pipe bot L   (0, 150, 0)
const std::array<Rgb, kTileTypeCount>& tile_palette() noexcept;

Image render_image(const TileGrid& grid, int tile_px);

void write_png(const Image& image, const std::filesystem::path& path);

}  // namespace levelblend
