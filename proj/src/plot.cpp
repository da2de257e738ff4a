#include "levelblend/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace levelblend::plot {

namespace {

// Rows of 3 bits, most significant bit on the left.
struct Glyph {
  char c;
  std::array<std::uint8_t, 5> rows;
};

constexpr std::array<Glyph, 46> kFont{{
    {'0', {7, 5, 5, 5, 7}}, {'1', {2, 6, 2, 2, 7}}, {'2', {7, 1, 7, 4, 7}}, {'3', {7, 1, 7, 1, 7}},
    {'4', {5, 5, 7, 1, 1}}, {'5', {7, 4, 7, 1, 7}}, {'6', {7, 4, 7, 5, 7}}, {'7', {7, 1, 1, 1, 1}},
    {'8', {7, 5, 7, 5, 7}}, {'9', {7, 5, 7, 1, 7}}, {'A', {2, 5, 7, 5, 5}}, {'B', {6, 5, 6, 5, 6}},
    {'C', {3, 4, 4, 4, 3}}, {'D', {6, 5, 5, 5, 6}}, {'E', {7, 4, 6, 4, 7}}, {'F', {7, 4, 6, 4, 4}},
    {'G', {3, 4, 5, 5, 3}}, {'H', {5, 5, 7, 5, 5}}, {'I', {7, 2, 2, 2, 7}}, {'J', {1, 1, 1, 5, 2}},
    {'K', {5, 5, 6, 5, 5}}, {'L', {4, 4, 4, 4, 7}}, {'M', {5, 7, 7, 5, 5}}, {'N', {6, 5, 5, 5, 5}},
    {'O', {2, 5, 5, 5, 2}}, {'P', {6, 5, 6, 4, 4}}, {'Q', {2, 5, 5, 6, 3}}, {'R', {6, 5, 6, 5, 5}},
    {'S', {3, 4, 2, 1, 6}}, {'T', {7, 2, 2, 2, 2}}, {'U', {5, 5, 5, 5, 7}}, {'V', {5, 5, 5, 5, 2}},
    {'W', {5, 5, 7, 7, 5}}, {'X', {5, 5, 2, 5, 5}}, {'Y', {5, 5, 2, 2, 2}}, {'Z', {7, 1, 2, 4, 7}},
    {'-', {0, 0, 7, 0, 0}}, {'.', {0, 0, 0, 0, 2}}, {'%', {5, 1, 2, 4, 5}}, {'/', {1, 1, 2, 4, 4}},
    {':', {0, 2, 0, 2, 0}}, {'_', {0, 0, 0, 0, 7}}, {'(', {2, 4, 4, 4, 2}}, {')', {2, 1, 1, 1, 2}},
    {'+', {0, 2, 7, 2, 0}}, {' ', {0, 0, 0, 0, 0}},
}};

const Glyph* find_glyph(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const auto& g : kFont) {
    if (g.c == c) return &g;
  }
  return nullptr;
}

constexpr int kWidth = 360;
constexpr int kHeight = 300;
constexpr int kLeft = 50;
constexpr int kTop = 30;
constexpr int kRight = 20;
constexpr int kBottom = 45;

}  // namespace

int text_width(std::string_view text, int scale) {
  return static_cast<int>(text.size()) * 4 * scale;
}

void draw_text(Image& image, int x, int y, std::string_view text, Rgb color, int scale) {
  for (char c : text) {
    if (const Glyph* g = find_glyph(c)) {
      for (int r = 0; r < 5; ++r) {
        for (int col = 0; col < 3; ++col) {
          if (g->rows[static_cast<std::size_t>(r)] & (4 >> col)) {
            image.fill_rect(x + col * scale, y + r * scale, scale, scale, color);
          }
        }
      }
    }
    x += 4 * scale;
  }
}

void draw_line(Image& image, int x0, int y0, int x1, int y1, Rgb color) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    image.set_pixel(x0, y0, color);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

Panel::Panel(Image& image, int x, int y, int width, int height, double lo, double hi)
    : image_(image), x_(x), y_(y), w_(width), h_(height), lo_(lo), hi_(hi) {}

int Panel::to_px(double x) const {
  const double t = std::clamp((x - lo_) / (hi_ - lo_), 0.0, 1.0);
  return x_ + static_cast<int>(std::lround(t * (w_ - 1)));
}

int Panel::to_py(double y) const {
  const double t = std::clamp((y - lo_) / (hi_ - lo_), 0.0, 1.0);
  return y_ + h_ - 1 - static_cast<int>(std::lround(t * (h_ - 1)));
}

void Panel::frame(std::string_view title, std::string_view x_label, std::string_view y_label) {
  draw_line(image_, x_, y_, x_ + w_ - 1, y_, kBlack);
  draw_line(image_, x_, y_ + h_ - 1, x_ + w_ - 1, y_ + h_ - 1, kBlack);
  draw_line(image_, x_, y_, x_, y_ + h_ - 1, kBlack);
  draw_line(image_, x_ + w_ - 1, y_, x_ + w_ - 1, y_ + h_ - 1, kBlack);
  for (int q = 0; q <= 4; ++q) {
    const double v = lo_ + (hi_ - lo_) * q / 4.0;
    char label[16];
    std::snprintf(label, sizeof label, "%g", v);
    const int px = to_px(v);
    const int py = to_py(v);
    draw_line(image_, px, y_ + h_, px, y_ + h_ + 3, kBlack);
    draw_line(image_, x_ - 4, py, x_ - 1, py, kBlack);
    draw_text(image_, px - text_width(label, 1) / 2, y_ + h_ + 6, label, kBlack, 1);
    draw_text(image_, x_ - 6 - text_width(label, 1), py - 2, label, kBlack, 1);
  }
  draw_text(image_, x_ + (w_ - text_width(title)) / 2, y_ - 16, title, kBlack);
  draw_text(image_, x_ + (w_ - text_width(x_label)) / 2, y_ + h_ + 16, x_label, kBlack);
  draw_text(image_, 2, y_ - 16, y_label, kBlack, 1);
}

void Panel::point(double x, double y, Rgb color, int radius) {
  image_.fill_rect(to_px(x) - radius, to_py(y) - radius, 2 * radius + 1, 2 * radius + 1, color);
}

void Panel::line(double x0, double y0, double x1, double y1, Rgb color) {
  draw_line(image_, to_px(x0), to_py(y0), to_px(x1), to_py(y1), color);
}

void Panel::bar(double x_lo, double x_hi, double fraction, Rgb color) {
  const int left = to_px(x_lo);
  const int right = to_px(x_hi);
  const int top = y_ + h_ - 1 - static_cast<int>(std::lround(std::clamp(fraction, 0.0, 1.0) * (h_ - 1)));
  image_.fill_rect(left + 1, top, std::max(1, right - left - 1), y_ + h_ - 1 - top, color);
}

Image scatter_plot(const std::vector<Series>& series, std::string_view title, std::string_view x_label,
                   std::string_view y_label) {
  Image image(kWidth, kHeight);
  Panel panel(image, kLeft, kTop, kWidth - kLeft - kRight, kHeight - kTop - kBottom);
  panel.frame(title, x_label, y_label);
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) panel.point(s.x[i], s.y[i], s.color);
  }
  return image;
}

Image histogram_plot(const std::vector<int>& counts, std::string_view title, std::string_view x_label,
                     Rgb color) {
  Image image(kWidth, kHeight);
  Panel panel(image, kLeft, kTop, kWidth - kLeft - kRight, kHeight - kTop - kBottom);
  panel.frame(title, x_label, "SHARE %");
  int total = 0;
  for (int c : counts) total += c;
  if (total == 0 || counts.empty()) return image;
  const double width = 100.0 / static_cast<double>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    panel.bar(width * static_cast<double>(i), width * static_cast<double>(i + 1),
              static_cast<double>(counts[i]) / total, color);
  }
  return image;
}

Image line_plot(const std::vector<Series>& series, std::string_view title, std::string_view x_label,
                std::string_view y_label) {
  Image image(kWidth, kHeight);
  Panel panel(image, kLeft, kTop, kWidth - kLeft - kRight, kHeight - kTop - kBottom);
  panel.frame(title, x_label, y_label);
  panel.line(0.0, 0.0, 100.0, 100.0, kGrey);
  int legend_y = kTop + 4;
  for (const auto& s : series) {
    for (std::size_t i = 0; i + 1 < s.x.size() && i + 1 < s.y.size(); ++i) {
      panel.line(s.x[i], s.y[i], s.x[i + 1], s.y[i + 1], s.color);
    }
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) panel.point(s.x[i], s.y[i], s.color, 2);
    draw_text(image, kLeft + 6, legend_y, s.name, s.color, 1);
    legend_y += 8;
  }
  return image;
}

}  // namespace levelblend::plot
