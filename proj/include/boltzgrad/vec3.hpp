#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>

namespace boltzgrad {

/// 3-vector with double components; the only geometric type in the library.
struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    constexpr Vec3& operator/=(double s) { x /= s; y /= s; z /= s; return *this; }

    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator/(Vec3 a, double s) { return a /= s; }
constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }

constexpr bool operator==(const Vec3& a, const Vec3& b) {
    return a.x == b.x && a.y == b.y && a.z == b.z;
}

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(const Vec3& a) {
    const double n = norm(a);
    return {a.x / n, a.y / n, a.z / n};
}

/// Wrap a coordinate into [0, L).
inline double wrap_coord(double x, double L) {
    x -= L * std::floor(x / L);
    if (x >= L) x -= L;  // floor rounding can land exactly on L
    if (x < 0.0) x = 0.0;
    return x;
}

inline Vec3 wrap(Vec3 x, double L) {
    return {wrap_coord(x.x, L), wrap_coord(x.y, L), wrap_coord(x.z, L)};
}

/// Minimum-image displacement on the torus of side L, componentwise in (-L/2, L/2].
inline double min_image_coord(double d, double L) {
    d -= L * std::round(d / L);
    return d;
}

inline Vec3 min_image(Vec3 d, double L) {
    return {min_image_coord(d.x, L), min_image_coord(d.y, L), min_image_coord(d.z, L)};
}

/// Minimum-image distance between two wrapped positions.
inline double torus_distance(const Vec3& a, const Vec3& b, double L) {
    return norm(min_image(b - a, L));
}

}  // namespace boltzgrad
