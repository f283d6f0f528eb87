#include "tfr_cli/plot.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>

#include "tfr/error.hpp"

namespace tfr::cli {

Image::Image(int w, int h, Rgb fill) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
  fill_rect(0, 0, w, h, fill);
}

Rgb Image::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  pixels[i] = c.r;
  pixels[i + 1] = c.g;
  pixels[i + 2] = c.b;
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
  for (int y = std::max(0, y0); y < std::min(height, y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(width, x1); ++x) set(x, y, c);
  }
}

void Image::line(int x0, int y0, int x1, int y1, Rgb c) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set(x0, y0, c);
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

namespace {

// 3x5 glyphs, one 3-bit row per entry, most significant bit on the left.
std::array<std::uint8_t, 5> glyph(char ch) {
  switch (ch) {
    case '0': return {7, 5, 5, 5, 7};
    case '1': return {2, 6, 2, 2, 7};
    case '2': return {7, 1, 7, 4, 7};
    case '3': return {7, 1, 7, 1, 7};
    case '4': return {5, 5, 7, 1, 1};
    case '5': return {7, 4, 7, 1, 7};
    case '6': return {7, 4, 7, 5, 7};
    case '7': return {7, 1, 1, 1, 1};
    case '8': return {7, 5, 7, 5, 7};
    case '9': return {7, 5, 7, 1, 7};
    case '.': return {0, 0, 0, 0, 2};
    case '-': return {0, 0, 7, 0, 0};
    case '+': return {0, 2, 7, 2, 0};
    case 'e': return {0, 7, 7, 4, 7};
    default: return {0, 0, 0, 0, 0};
  }
}

}  // namespace

void Image::text(int x, int y, const std::string& s, Rgb c, int scale) {
  for (char ch : s) {
    const auto g = glyph(ch);
    for (int r = 0; r < 5; ++r) {
      for (int k = 0; k < 3; ++k) {
        if (g[r] & (4 >> k)) fill_rect(x + k * scale, y + r * scale, x + (k + 1) * scale, y + (r + 1) * scale, c);
      }
    }
    x += 4 * scale;
  }
}

void write_png(const Image& img, const std::filesystem::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("PNG encoding failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

Rgb colormap(double t) {
  static constexpr std::array<std::array<double, 3>, 5> kStops{
      {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * (kStops.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(t), kStops.size() - 2);
  const double f = t - static_cast<double>(i);
  auto mix = [&](int k) { return static_cast<std::uint8_t>(std::lround(kStops[i][k] + f * (kStops[i + 1][k] - kStops[i][k]))); };
  return {mix(0), mix(1), mix(2)};
}

Image heatmap(const ScalarField& f, double lo, double hi, int block) {
  Image img(f.grid.nx * block, f.grid.ny * block);
  const double span = hi - lo;
  for (int i = 0; i < f.grid.ny; ++i) {
    for (int j = 0; j < f.grid.nx; ++j) {
      const double t = span > 0.0 ? (f.at(i, j) - lo) / span : 0.0;
      const int top = (f.grid.ny - 1 - i) * block;
      img.fill_rect(j * block, top, (j + 1) * block, top + block, colormap(t));
    }
  }
  return img;
}

namespace {

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

constexpr std::array<Rgb, 6> kPalette{
    {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}, {23, 190, 207}}};

}  // namespace

Image line_chart(const std::vector<Series>& series, nlohmann::json& axes, int width, int height) {
  std::set<double> xs;
  double ymax = 0.0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ConfigError("series '" + s.name + "' has mismatched x and y lengths");
    xs.insert(s.x.begin(), s.x.end());
    for (double v : s.y) ymax = std::max(ymax, v);
  }
  if (xs.empty()) throw ConfigError("nothing to plot");
  const double xlo = *xs.begin(), xhi = *xs.rbegin();
  const double xpad = xhi > xlo ? 0.05 * (xhi - xlo) : 1.0;
  const double y_top = ymax > 0.0 ? 1.1 * ymax : 1.0;

  const int left = 70, right = 20, top = 20, bottom = 40;
  Image img(width, height);
  const Rgb axis{0, 0, 0}, grid{225, 225, 225};
  auto px = [&](double x) {
    return left + static_cast<int>(std::lround((x - (xlo - xpad)) / (xhi - xlo + 2 * xpad) * (width - left - right)));
  };
  auto py = [&](double y) { return height - bottom - static_cast<int>(std::lround(y / y_top * (height - top - bottom))); };

  std::vector<double> yticks;
  for (int k = 0; k <= 4; ++k) yticks.push_back(y_top * k / 4.0);
  for (double y : yticks) {
    img.line(left, py(y), width - right, py(y), grid);
    const std::string lab = tick_label(y);
    img.text(left - 8 - 8 * static_cast<int>(lab.size()), py(y) - 5, lab, axis);
  }
  for (double x : xs) {
    img.line(px(x), height - bottom, px(x), height - bottom + 5, axis);
    const std::string lab = tick_label(x);
    img.text(px(x) - 4 * static_cast<int>(lab.size()), height - bottom + 10, lab, axis);
  }
  img.line(left, height - bottom, width - right, height - bottom, axis);
  img.line(left, top, left, height - bottom, axis);

  nlohmann::json legend = nlohmann::json::array();
  for (std::size_t s = 0; s < series.size(); ++s) {
    const Rgb c = kPalette[s % kPalette.size()];
    const auto& ser = series[s];
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (i > 0) img.line(px(ser.x[i - 1]), py(ser.y[i - 1]), px(ser.x[i]), py(ser.y[i]), c);
      img.fill_rect(px(ser.x[i]) - 3, py(ser.y[i]) - 3, px(ser.x[i]) + 4, py(ser.y[i]) + 4, c);
    }
    img.fill_rect(width - right - 14, top + 4 + 14 * static_cast<int>(s), width - right - 4, top + 14 + 14 * static_cast<int>(s), c);
    legend.push_back({{"name", ser.name}, {"color", {c.r, c.g, c.b}}, {"x", ser.x}, {"y", ser.y}});
  }
  axes = {{"x_ticks", std::vector<double>(xs.begin(), xs.end())}, {"y_ticks", yticks}, {"y_max", y_top},
          {"series", legend}};
  return img;
}

}  // namespace tfr::cli
