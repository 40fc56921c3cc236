#pragma once

#include <array>
#include <cstddef>
#include <string>

namespace lpr {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned rectangle, (x1, y1) top-left, (x2, y2) bottom-right, pixel-edge coordinates.
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  Point center() const noexcept { return {(x1 + x2) * 0.5, (y1 + y2) * 0.5}; }
  bool degenerate() const noexcept { return !(x2 > x1) || !(y2 > y1); }
  friend bool operator==(const Box&, const Box&) = default;
};

/// The four fixed corner categories, also the heatmap channel order.
enum class Corner : std::size_t { left_top = 0, right_top = 1, left_down = 2, right_down = 3 };
inline constexpr std::size_t kCorners = 4;
using Quad = std::array<Point, kCorners>;  // LT, RT, LD, RD

struct PlateAnnotation {
  Box box;
  Quad corners;
  std::string text;
};

enum class CornerSource { peak, regressed_fallback };

struct Detection {
  Box box;
  double score = 0.0;
  Quad corners{};
  std::array<double, kCorners> corner_scores{};
  std::array<CornerSource, kCorners> corner_source{CornerSource::regressed_fallback, CornerSource::regressed_fallback,
                                                   CornerSource::regressed_fallback,
                                                   CornerSource::regressed_fallback};
  Point center;  // refined centre before clipping, image pixels
  // Feature-map cell of the centre peak; corner_rel is read here.
  std::size_t cell_y = 0;
  std::size_t cell_x = 0;
  std::string text;  // filled by recognition
};

}  // namespace lpr
