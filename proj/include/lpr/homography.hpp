#pragma once

#include <array>
#include <span>

#include "lpr/types.hpp"

namespace lpr {

/// 3x3 projective transform [[a1 a2 b1] [a3 a4 b2] [c1 c2 1]], row-major,
/// normalized so the bottom-right entry is 1.
class Homography {
public:
  Homography() = default;
  explicit Homography(const std::array<double, 9>& m);

  static Homography identity() { return Homography(); }

  double operator()(std::size_t r, std::size_t c) const { return m_[r * 3 + c]; }
  const std::array<double, 9>& matrix() const noexcept { return m_; }

  Point apply(const Point& p) const;
  Homography inverse() const;
  /// (*this) * rhs, i.e. rhs is applied first.
  Homography compose(const Homography& rhs) const;

private:
  std::array<double, 9> m_{1, 0, 0, 0, 1, 0, 0, 0, 1};
};

/// True when any three of the points are (numerically) collinear, including
/// repeated points.
bool degenerate_quad(std::span<const Point, 4> pts);

/// H with H(src[i]) = dst[i]. Solves the 8x8 linear system in double with
/// partial pivoting on Hartley-normalized coordinates plus one refinement
/// step. Throws ValidationError("degenerate quad ...") on collinear input or a
/// singular system.
Homography solve_homography(std::span<const Point, 4> src, std::span<const Point, 4> dst);

}  // namespace lpr
