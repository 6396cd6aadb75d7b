#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace occkit {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }

  friend constexpr Vec3 operator+(const Vec3& a, const Vec3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend constexpr Vec3 operator-(const Vec3& a, const Vec3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend constexpr Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
  friend constexpr bool operator==(const Vec3& a, const Vec3& b) = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  return {v.x / n, v.y / n, v.z / n};
}

inline bool all_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }
  double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }

  Vec3 apply(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  static Mat3 identity() { return Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }

  friend bool operator==(const Mat3& a, const Mat3& b) = default;
};

// Row-major 4x4 rigid transform. Only the top three rows are used.
struct Mat4 {
  std::array<double, 16> m{};

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(4 * r + c)]; }
  double& operator()(int r, int c) { return m[static_cast<std::size_t>(4 * r + c)]; }

  Vec3 apply_point(const Vec3& p) const {
    return {m[0] * p.x + m[1] * p.y + m[2] * p.z + m[3],
            m[4] * p.x + m[5] * p.y + m[6] * p.z + m[7],
            m[8] * p.x + m[9] * p.y + m[10] * p.z + m[11]};
  }

  Vec3 apply_direction(const Vec3& d) const {
    return {m[0] * d.x + m[1] * d.y + m[2] * d.z,
            m[4] * d.x + m[5] * d.y + m[6] * d.z,
            m[8] * d.x + m[9] * d.y + m[10] * d.z};
  }

  Mat3 rotation() const {
    return Mat3{{m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]}};
  }

  Vec3 translation() const { return {m[3], m[7], m[11]}; }

  static Mat4 identity() {
    return Mat4{{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}};
  }

  static Mat4 from_rotation_translation(const Mat3& r, const Vec3& t) {
    return Mat4{{r.m[0], r.m[1], r.m[2], t.x,
                 r.m[3], r.m[4], r.m[5], t.y,
                 r.m[6], r.m[7], r.m[8], t.z,
                 0, 0, 0, 1}};
  }

  friend bool operator==(const Mat4& a, const Mat4& b) = default;
};

}  // namespace occkit
