#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "crowdfit/ad.hpp"

namespace crowdfit {

template <typename T>
struct Vec3 {
    T x{};
    T y{};
    T z{};

    template <typename U>
    static Vec3 from(const Vec3<U>& o) {
        return {T(o.x), T(o.y), T(o.z)};
    }

    T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    const T& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend Vec3 operator*(const Vec3& a, const T& s) { return {a.x * s, a.y * s, a.z * s}; }
    friend Vec3 operator*(const T& s, const Vec3& a) { return {a.x * s, a.y * s, a.z * s}; }
    friend Vec3 operator/(const Vec3& a, const T& s) { return {a.x / s, a.y / s, a.z / s}; }
    Vec3& operator+=(const Vec3& o) { return *this = *this + o; }
    Vec3& operator-=(const Vec3& o) { return *this = *this - o; }

    friend bool operator==(const Vec3& a, const Vec3& b) {
        return a.x == b.x && a.y == b.y && a.z == b.z;
    }
};

using Vec3d = Vec3<double>;

template <typename T>
struct Vec2 {
    T u{};
    T v{};
};

template <typename T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T>
Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename T>
T squared_norm(const Vec3<T>& a) {
    return dot(a, a);
}

template <typename T>
T norm(const Vec3<T>& a) {
    using std::sqrt;
    return sqrt(squared_norm(a));
}

template <typename T>
Vec3<double> value_of(const Vec3<T>& a) {
    return {value_of(a.x), value_of(a.y), value_of(a.z)};
}

// Row-major 3x3 matrix.
template <typename T>
struct Mat3 {
    std::array<T, 9> m{};

    static Mat3 identity() {
        Mat3 r;
        r.m = {T(1), T(0), T(0), T(0), T(1), T(0), T(0), T(0), T(1)};
        return r;
    }

    T& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }
    const T& operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }

    friend Mat3 operator*(const Mat3& a, const Mat3& b) {
        Mat3 r;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
            }
        }
        return r;
    }

    friend Vec3<T> operator*(const Mat3& a, const Vec3<T>& v) {
        return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
                a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
                a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
    }

    Mat3 transpose() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                r(i, j) = (*this)(j, i);
            }
        }
        return r;
    }
};

using Mat3d = Mat3<double>;

// Angles below this use the second-order Taylor expansion of Rodrigues.
inline constexpr double kRodriguesTaylorThreshold = 1e-6;

// Axis-angle vector to rotation matrix.
template <typename T>
Mat3<T> rodrigues(const Vec3<T>& r) {
    using std::cos;
    using std::sin;
    using std::sqrt;
    const T angle_sq = squared_norm(r);
    Mat3<T> out = Mat3<T>::identity();
    if (value_of(angle_sq) < kRodriguesTaylorThreshold * kRodriguesTaylorThreshold) {
        // I + [r]x + 0.5 [r]x^2
        const T xx = r.x * r.x, yy = r.y * r.y, zz = r.z * r.z;
        const T xy = r.x * r.y, xz = r.x * r.z, yz = r.y * r.z;
        out(0, 0) = T(1) - T(0.5) * (yy + zz);
        out(1, 1) = T(1) - T(0.5) * (xx + zz);
        out(2, 2) = T(1) - T(0.5) * (xx + yy);
        out(0, 1) = -r.z + T(0.5) * xy;
        out(1, 0) = r.z + T(0.5) * xy;
        out(0, 2) = r.y + T(0.5) * xz;
        out(2, 0) = -r.y + T(0.5) * xz;
        out(1, 2) = -r.x + T(0.5) * yz;
        out(2, 1) = r.x + T(0.5) * yz;
        return out;
    }
    const T angle = sqrt(angle_sq);
    const Vec3<T> k = r / angle;
    const T c = cos(angle);
    const T s = sin(angle);
    const T one_c = T(1) - c;
    out(0, 0) = c + one_c * k.x * k.x;
    out(1, 1) = c + one_c * k.y * k.y;
    out(2, 2) = c + one_c * k.z * k.z;
    out(0, 1) = one_c * k.x * k.y - s * k.z;
    out(1, 0) = one_c * k.x * k.y + s * k.z;
    out(0, 2) = one_c * k.x * k.z + s * k.y;
    out(2, 0) = one_c * k.x * k.z - s * k.y;
    out(1, 2) = one_c * k.y * k.z - s * k.x;
    out(2, 1) = one_c * k.y * k.z + s * k.x;
    return out;
}

// Rotation matrix to axis-angle with angle in [0, pi].
inline Vec3d rotation_to_axis_angle(const Mat3d& R) {
    const double cos_angle = std::clamp((R(0, 0) + R(1, 1) + R(2, 2) - 1.0) * 0.5, -1.0, 1.0);
    const double angle = std::acos(cos_angle);
    if (angle < 1e-12) {
        return {0.0, 0.0, 0.0};
    }
    Vec3d axis{R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1)};
    if (angle > std::numbers::pi - 1e-6) {
        // Near pi the skew part vanishes; read the axis off the symmetric part.
        int i = 0;
        if (R(1, 1) > R(i, i)) i = 1;
        if (R(2, 2) > R(i, i)) i = 2;
        Vec3d col{R(0, i), R(1, i), R(2, i)};
        col[i] += 1.0;
        return col * (angle / norm(col));
    }
    return axis * (angle / (2.0 * std::sin(angle)));
}

}  // namespace crowdfit
