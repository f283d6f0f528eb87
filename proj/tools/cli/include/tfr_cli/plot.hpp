#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfr/domain.hpp"

namespace tfr::cli {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB raster, row 0 at the top.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image(int w, int h, Rgb fill = {255, 255, 255});
  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
  void line(int x0, int y0, int x1, int y1, Rgb c);
  /// Digits, '.', '-', 'e' and '+' in a 3x5 font magnified by `scale`.
  void text(int x, int y, const std::string& s, Rgb c, int scale = 2);
};

/// Throws DataError if the file cannot be written.
void write_png(const Image& img, const std::filesystem::path& path);

/// Perceptually ordered blue-to-yellow ramp; t is clamped to [0, 1].
Rgb colormap(double t);

/// One pixel block per node, y increasing upward. Values outside [lo, hi]
/// saturate; lo == hi maps everything to the bottom colour.
Image heatmap(const ScalarField& f, double lo, double hi, int block = 4);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart with markers; x ticks at the union of the series' x values.
/// `axes` receives the tick values and data ranges.
Image line_chart(const std::vector<Series>& series, nlohmann::json& axes, int width = 640, int height = 420);

}  // namespace tfr::cli
