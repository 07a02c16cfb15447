#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdfit/errors.hpp"
#include "crowdfit/geometry.hpp"

namespace crowdfit {

struct Intrinsics {
    int width = 0;
    int height = 0;
    double focal = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    // True when focal was derived from the image diagonal.
    bool focal_from_diagonal = false;

    // Uncalibrated image: focal is the diagonal length, principal point the center.
    static Intrinsics uncalibrated(int w, int h) {
        Intrinsics in = calibrated(w, h, std::hypot(static_cast<double>(w), static_cast<double>(h)));
        in.focal_from_diagonal = true;
        return in;
    }

    static Intrinsics calibrated(int w, int h, double f, std::optional<Vec2<double>> principal = std::nullopt) {
        if (w <= 0 || h <= 0) {
            throw DomainError("intrinsics: image size must be positive");
        }
        if (!(f > 0.0) || !std::isfinite(f)) {
            throw DomainError("intrinsics: focal must be positive, got " + std::to_string(f));
        }
        Intrinsics in;
        in.width = w;
        in.height = h;
        in.focal = f;
        in.cx = principal ? principal->u : 0.5 * w;
        in.cy = principal ? principal->v : 0.5 * h;
        return in;
    }

    double image_center_x() const noexcept { return 0.5 * width; }
    double image_center_y() const noexcept { return 0.5 * height; }

    friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

struct BBox {
    double center_x = 0.0;
    double center_y = 0.0;
    double width = 0.0;
    double height = 0.0;

    // Box size d; the larger side.
    double size() const noexcept { return std::max(width, height); }
    double area() const noexcept { return width * height; }

    // Box center relative to the image center, (c_x, c_y).
    double offset_x(const Intrinsics& in) const noexcept { return center_x - in.image_center_x(); }
    double offset_y(const Intrinsics& in) const noexcept { return center_y - in.image_center_y(); }

    friend bool operator==(const BBox&, const BBox&) = default;
};

// Crop camera [f_c, t_x, t_y].
template <typename T>
struct CamTriple {
    T scale{};
    T tx{};
    T ty{};

    friend bool operator==(const CamTriple&, const CamTriple&) = default;
};

using Cam = CamTriple<double>;

// Absolute translation of a person from its crop camera:
// t_X = t_x + 2 c_x / (d f_c), t_Y = t_y + 2 c_y / (d f_c), t_Z = 2 f / (d f_c).
template <typename T>
Vec3<T> translation_from_cam(const CamTriple<T>& cam, const BBox& box, const Intrinsics& in) {
    const double d = box.size();
    if (!(value_of(cam.scale) > 0.0)) {
        throw DomainError("translation_from_cam: f_c must be positive, got " +
                          std::to_string(value_of(cam.scale)));
    }
    if (!(d > 0.0)) {
        throw DomainError("translation_from_cam: box size must be positive");
    }
    const T inv = T(2.0 / d) / cam.scale;
    return {cam.tx + T(box.offset_x(in)) * inv, cam.ty + T(box.offset_y(in)) * inv, T(in.focal) * inv};
}

// Exact inverse of translation_from_cam.
inline Cam cam_from_translation(const Vec3d& t, const BBox& box, const Intrinsics& in) {
    const double d = box.size();
    if (!(t.z > 0.0)) {
        throw DomainError("cam_from_translation: t_Z must be positive (person behind camera), got " +
                          std::to_string(t.z));
    }
    if (!(d > 0.0)) {
        throw DomainError("cam_from_translation: box size must be positive");
    }
    Cam cam;
    cam.scale = 2.0 * in.focal / (d * t.z);
    cam.tx = t.x - 2.0 * box.offset_x(in) / (d * cam.scale);
    cam.ty = t.y - 2.0 * box.offset_y(in) / (d * cam.scale);
    return cam;
}

template <typename T>
Vec2<T> project_point(const Vec3<T>& p, const Vec3<T>& t, const Intrinsics& in, int index = 0) {
    const T z = p.z + t.z;
    if (!(value_of(z) > 0.0)) {
        throw ProjectionError("project: point " + std::to_string(index) + " has non-positive depth " +
                                  std::to_string(value_of(z)),
                              index);
    }
    const T inv = T(1.0) / z;
    return {T(in.cx) + T(in.focal) * (p.x + t.x) * inv, T(in.cy) + T(in.focal) * (p.y + t.y) * inv};
}

// Pinhole projection of (point + t) for every point.
template <typename T>
std::vector<Vec2<T>> project(std::span<const Vec3<T>> points, const Vec3<T>& t, const Intrinsics& in) {
    std::vector<Vec2<T>> out;
    out.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        out.push_back(project_point(points[i], t, in, static_cast<int>(i)));
    }
    return out;
}

}  // namespace crowdfit
