#include "levelblend/image.hpp"

#include <cstdio>
#include <memory>

#include <png.h>

namespace levelblend {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidShape, "image dimensions must be positive");
  }
  rgb_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < rgb_.size(); i += 3) {
    rgb_[i] = fill.r;
    rgb_[i + 1] = fill.g;
    rgb_[i + 2] = fill.b;
  }
}

Rgb Image::pixel(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                         static_cast<std::size_t>(x)) * 3;
  return {rgb_.at(i), rgb_.at(i + 1), rgb_.at(i + 2)};
}

void Image::set_pixel(int x, int y, Rgb color) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                         static_cast<std::size_t>(x)) * 3;
  rgb_[i] = color.r;
  rgb_[i + 1] = color.g;
  rgb_[i + 2] = color.b;
}

void Image::fill_rect(int x, int y, int w, int h, Rgb color) {
  for (int yy = y; yy < y + h; ++yy) {
    for (int xx = x; xx < x + w; ++xx) set_pixel(xx, yy, color);
  }
}

const std::array<Rgb, kTileTypeCount>& tile_palette() noexcept {
  static const std::array<Rgb, kTileTypeCount> palette{{
      {139, 69, 19},
      {205, 92, 60},
      {107, 140, 255},
      {255, 165, 0},
      {160, 110, 60},
      {220, 20, 60},
      {0, 200, 0},
      {0, 180, 0},
      {0, 150, 0},
      {0, 128, 0},
      {255, 215, 0},
      {230, 230, 230},
      {150, 150, 255},
      {120, 40, 140},
      {90, 90, 90},
      {255, 60, 0},
      {20, 20, 40},
  }};
  return palette;
}

Image render_image(const TileGrid& grid, int tile_px) {
  if (tile_px < 1) throw Error(ErrorCode::InvalidShape, "tile_px must be at least 1");
  Image img(kSegmentSize * tile_px, kSegmentSize * tile_px);
  const auto& palette = tile_palette();
  for (int r = 0; r < kSegmentSize; ++r) {
    for (int c = 0; c < kSegmentSize; ++c) {
      img.fill_rect(c * tile_px, r * tile_px, tile_px, tile_px,
                    palette[static_cast<std::size_t>(grid.at(r, c))]);
    }
  }
  return img;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
  };
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw Error(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::IoError, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, "libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const auto& data = image.rgb();
  const std::size_t stride = static_cast<std::size_t>(image.width()) * 3;
  for (int y = 0; y < image.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(data.data() + static_cast<std::size_t>(y) * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace levelblend
