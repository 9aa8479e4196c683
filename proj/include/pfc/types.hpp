#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pfc {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }
/// Counter-clockwise rotation by 90 degrees.
constexpr Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }

/// 2x2 matrix, row-major: m[i][j] = d v_i / d x_j for gradients.
struct Mat2 {
  double xx = 0.0, xy = 0.0, yx = 0.0, yy = 0.0;
};

/// Base error for every failure the library reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input (configs, parameters, tables).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during a run (solver divergence, invariant breach).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace pfc
