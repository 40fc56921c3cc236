#include "lpr/homography.hpp"

#include <algorithm>
#include <cmath>

#include "lpr/error.hpp"

namespace lpr {

Homography::Homography(const std::array<double, 9>& m) : m_(m) {
  require(std::abs(m[8]) > 1e-300, "homography: bottom-right entry is zero");
  for (double& v : m_) v /= m[8];
  m_[8] = 1.0;
}

Point Homography::apply(const Point& p) const {
  const double w = m_[6] * p.x + m_[7] * p.y + m_[8];
  return {(m_[0] * p.x + m_[1] * p.y + m_[2]) / w, (m_[3] * p.x + m_[4] * p.y + m_[5]) / w};
}

Homography Homography::inverse() const {
  const auto& a = m_;
  std::array<double, 9> adj{
      a[4] * a[8] - a[5] * a[7], a[2] * a[7] - a[1] * a[8], a[1] * a[5] - a[2] * a[4],
      a[5] * a[6] - a[3] * a[8], a[0] * a[8] - a[2] * a[6], a[2] * a[3] - a[0] * a[5],
      a[3] * a[7] - a[4] * a[6], a[1] * a[6] - a[0] * a[7], a[0] * a[4] - a[1] * a[3]};
  const double det = a[0] * adj[0] + a[1] * adj[3] + a[2] * adj[6];
  require(std::abs(det) > 1e-300, "homography: singular matrix");
  return Homography(adj);
}

Homography Homography::compose(const Homography& rhs) const {
  std::array<double, 9> r{};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += m_[i * 3 + k] * rhs.m_[k * 3 + j];
      r[i * 3 + j] = s;
    }
  }
  return Homography(r);
}

bool degenerate_quad(std::span<const Point, 4> pts) {
  double scale2 = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      scale2 = std::max(scale2, std::pow(pts[i].x - pts[j].x, 2) + std::pow(pts[i].y - pts[j].y, 2));
    }
  }
  if (!(scale2 > 0.0) || !std::isfinite(scale2)) return true;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      for (std::size_t k = j + 1; k < 4; ++k) {
        const double cross = (pts[j].x - pts[i].x) * (pts[k].y - pts[i].y) -
                             (pts[j].y - pts[i].y) * (pts[k].x - pts[i].x);
        if (std::abs(cross) <= 1e-9 * scale2) return true;
      }
    }
  }
  return false;
}

namespace {

// Similarity taking the centroid to the origin and the mean distance to sqrt(2).
std::array<double, 3> normalizer(std::span<const Point, 4> pts) {
  double cx = 0.0, cy = 0.0;
  for (const Point& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= 4.0;
  cy /= 4.0;
  double mean = 0.0;
  for (const Point& p : pts) mean += std::hypot(p.x - cx, p.y - cy);
  mean /= 4.0;
  return {std::sqrt(2.0) / mean, cx, cy};  // scale, tx, ty
}

using Mat3 = std::array<double, 9>;

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
      r[i * 3 + j] = s;
    }
  }
  return r;
}

using Matrix8 = std::array<std::array<double, 8>, 8>;
using Vector8 = std::array<double, 8>;

struct LU {
  Matrix8 lu;
  std::array<std::size_t, 8> perm;
};

LU factor(Matrix8 a) {
  LU f;
  for (std::size_t i = 0; i < 8; ++i) f.perm[i] = i;
  for (std::size_t col = 0; col < 8; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < 8; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (!(std::abs(a[pivot][col]) > 1e-12)) fail("degenerate quad: singular homography system");
    std::swap(a[col], a[pivot]);
    std::swap(f.perm[col], f.perm[pivot]);
    for (std::size_t r = col + 1; r < 8; ++r) {
      const double m = a[r][col] / a[col][col];
      a[r][col] = m;
      for (std::size_t c = col + 1; c < 8; ++c) a[r][c] -= m * a[col][c];
    }
  }
  f.lu = a;
  return f;
}

Vector8 solve(const LU& f, const Vector8& b) {
  Vector8 y{};
  for (std::size_t i = 0; i < 8; ++i) {
    double s = b[f.perm[i]];
    for (std::size_t j = 0; j < i; ++j) s -= f.lu[i][j] * y[j];
    y[i] = s;
  }
  Vector8 x{};
  for (std::size_t i = 8; i-- > 0;) {
    double s = y[i];
    for (std::size_t j = i + 1; j < 8; ++j) s -= f.lu[i][j] * x[j];
    x[i] = s / f.lu[i][i];
  }
  return x;
}

}  // namespace

Homography solve_homography(std::span<const Point, 4> src, std::span<const Point, 4> dst) {
  if (degenerate_quad(src)) fail("degenerate quad: source points are collinear or repeated");
  if (degenerate_quad(dst)) fail("degenerate quad: destination points are collinear or repeated");

  const auto [ss, sx, sy] = normalizer(src);
  const auto [ds, dx, dy] = normalizer(dst);
  Matrix8 a{};
  Vector8 b{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double x = (src[i].x - sx) * ss, y = (src[i].y - sy) * ss;
    const double u = (dst[i].x - dx) * ds, v = (dst[i].y - dy) * ds;
    a[2 * i] = {x, y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u};
    b[2 * i] = u;
    a[2 * i + 1] = {0.0, 0.0, 0.0, x, y, 1.0, -x * v, -y * v};
    b[2 * i + 1] = v;
  }
  const LU f = factor(a);
  Vector8 h = solve(f, b);
  // One step of iterative refinement with an extended-precision residual.
  Vector8 r{};
  for (std::size_t i = 0; i < 8; ++i) {
    long double s = b[i];
    for (std::size_t j = 0; j < 8; ++j) s -= static_cast<long double>(a[i][j]) * h[j];
    r[i] = static_cast<double>(s);
  }
  const Vector8 d = solve(f, r);
  for (std::size_t i = 0; i < 8; ++i) h[i] += d[i];

  const Mat3 normalized{h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0};
  const Mat3 t_src{ss, 0.0, -ss * sx, 0.0, ss, -ss * sy, 0.0, 0.0, 1.0};
  const Mat3 t_dst_inv{1.0 / ds, 0.0, dx, 0.0, 1.0 / ds, dy, 0.0, 0.0, 1.0};
  const Mat3 m = multiply(multiply(t_dst_inv, normalized), t_src);
  if (!(std::abs(m[8]) > 1e-12 * std::abs(m[0]))) fail("degenerate quad: homography cannot be normalized");
  return Homography(m);
}

}  // namespace lpr
