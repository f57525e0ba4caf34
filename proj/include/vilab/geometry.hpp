#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace vilab {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2& operator+=(const Point2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  friend Point2 operator+(Point2 a, const Point2& b) { return a += b; }
  friend Point2 operator-(const Point2& a, const Point2& b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, const Point2& a) { return {s * a.x, s * a.y}; }
  double norm() const { return std::hypot(x, y); }
  double linf() const { return std::max(std::abs(x), std::abs(y)); }
};

/// 2x2 matrix, row-major: m[r][c]. For a Jacobian, column c holds dF/dxhat_c.
struct Mat2 {
  std::array<std::array<double, 2>, 2> m{};

  double det() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
  Mat2 inverse() const {
    const double d = det();
    Mat2 r;
    r.m[0][0] = m[1][1] / d;
    r.m[0][1] = -m[0][1] / d;
    r.m[1][0] = -m[1][0] / d;
    r.m[1][1] = m[0][0] / d;
    return r;
  }
  /// Spectral norm.
  double norm2() const {
    const double a = m[0][0], b = m[0][1], c = m[1][0], d = m[1][1];
    const double s1 = a * a + b * b + c * c + d * d;
    const double s2 = std::sqrt(std::max(0.0, s1 * s1 - 4.0 * (a * d - b * c) * (a * d - b * c)));
    return std::sqrt(0.5 * (s1 + s2));
  }
};

}  // namespace vilab
