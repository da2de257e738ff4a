#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "levelblend/image.hpp"

namespace levelblend::plot {

// Axis-aligned panel that maps data coordinates onto an image region.
// Axes span [lo, hi] on both sides, ticked every quarter.
class Panel {
 public:
  Panel(Image& image, int x, int y, int width, int height, double lo = 0.0, double hi = 100.0);

  void frame(std::string_view title, std::string_view x_label, std::string_view y_label);
  void point(double x, double y, Rgb color, int radius = 1);
  void line(double x0, double y0, double x1, double y1, Rgb color);
  // Vertical bar from the baseline; height is in [0, 1] of the panel.
  void bar(double x_lo, double x_hi, double fraction, Rgb color);

  int to_px(double x) const;
  int to_py(double y) const;

 private:
  Image& image_;
  int x_, y_, w_, h_;
  double lo_, hi_;
};

// Uppercase 3x5 pixel font scaled by `scale`. Unsupported characters draw
// as blanks.
void draw_text(Image& image, int x, int y, std::string_view text, Rgb color, int scale = 2);
int text_width(std::string_view text, int scale = 2);

void draw_line(Image& image, int x0, int y0, int x1, int y1, Rgb color);

struct Series {
  std::string name;
  Rgb color;
  std::vector<double> x;
  std::vector<double> y;
};

inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kGrey{170, 170, 170};
inline constexpr Rgb kSmbRed{220, 30, 30};
inline constexpr Rgb kKiBlue{30, 60, 220};
inline constexpr Rgb kGenerated{60, 60, 60};

Image scatter_plot(const std::vector<Series>& series, std::string_view title, std::string_view x_label,
                   std::string_view y_label);

// Counts per equal-width bin over [0, 100].
Image histogram_plot(const std::vector<int>& counts, std::string_view title, std::string_view x_label,
                     Rgb color = kGenerated);

// Target-vs-achieved lines with the identity diagonal drawn in grey.
Image line_plot(const std::vector<Series>& series, std::string_view title, std::string_view x_label,
                std::string_view y_label);

}  // namespace levelblend::plot
