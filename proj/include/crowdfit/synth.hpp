#pragma once

// Synthetic crowds standing on a known plane, observed by a pinhole camera.
//
// Randomness: every person draws from its own mt19937_64 stream seeded with
// splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15), so adding people to a
// scene never changes the draws of the people already in it. Perturbation
// streams use the same scheme over the perturbation seed.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "crowdfit/body_model.hpp"
#include "crowdfit/camera.hpp"
#include "crowdfit/errors.hpp"
#include "crowdfit/scene.hpp"

namespace crowdfit {

struct SceneSpec {
    Plane plane;
    Intrinsics intrinsics;
    int count = 1;
    double sigma_pose = 0.0;   // radians, per pose component
    double sigma_shape = 0.0;  // per shape coefficient
    double sigma_kp = 0.0;     // pixels, per keypoint coordinate
    double extent = 10.0;      // side of the square placement area on the plane, meters
    std::uint64_t seed = 0;

    void validate() const {
        if (std::abs(norm(plane.normal) - 1.0) > 1e-9) {
            throw ConfigError("scene spec: plane normal must be unit length");
        }
        if (count < 1) {
            throw ConfigError("scene spec: person count must be at least 1");
        }
        if (!(sigma_pose >= 0.0) || !(sigma_shape >= 0.0) || !(sigma_kp >= 0.0)) {
            throw ConfigError("scene spec: noise levels must be non-negative");
        }
        if (!(extent > 0.0)) {
            throw ConfigError("scene spec: placement extent must be positive");
        }
    }
};

struct PerturbSpec {
    double sigma_depth = 0.0;  // meters on t_Z
    double sigma_pose = 0.0;   // radians
    double sigma_shape = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(sigma_depth >= 0.0) || !(sigma_pose >= 0.0) || !(sigma_shape >= 0.0)) {
            throw ConfigError("perturb spec: noise levels must be non-negative");
        }
    }
};

inline constexpr double kMinPerturbedDepth = 0.1;
inline constexpr int kPlacementAttempts = 100;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31U);
}

inline std::mt19937_64 person_stream(std::uint64_t seed, std::size_t index) {
    return std::mt19937_64(splitmix64(seed + (static_cast<std::uint64_t>(index) + 1) * 0x9E3779B97F4A7C15ULL));
}

// Ground plane seen from a camera pitched down by `pitch` radians and
// mounted `height` meters above it.
inline Plane camera_ground_plane(double pitch, double height) {
    return {{0.0, -std::cos(pitch), -std::sin(pitch)}, -height};
}

// Arms hanging at the sides; the zero-noise pose of generated people.
inline Pose standing_pose() {
    Pose p;
    p.rotations[16] = {0.0, 0.0, 1.25};
    p.rotations[17] = {0.0, 0.0, -1.25};
    return p;
}

// Root rotation standing a body upright on a plane with unit normal n,
// turned by `yaw` about the normal.
inline Vec3d upright_root_rotation(const Vec3d& n, double yaw) {
    const Vec3d body_up{0.0, -1.0, 0.0};
    const Vec3d axis = cross(body_up, n);
    const double s = norm(axis);
    const double c = dot(body_up, n);
    Mat3d align = Mat3d::identity();
    if (s > 1e-12) {
        align = rodrigues(axis * (std::atan2(s, c) / s));
    } else if (c < 0.0) {
        align = rodrigues(Vec3d{std::numbers::pi, 0.0, 0.0});
    }
    const Mat3d turn = rodrigues(body_up * yaw);
    return rotation_to_axis_angle(align * turn);
}

inline GroundTruthBundle ground_truth_for(const SkeletonTemplate& tmpl, const Pose& pose, const Shape& shape,
                                          const Vec3d& t, const Intrinsics& in) {
    GroundTruthBundle gt;
    gt.pose = pose;
    gt.shape = shape;
    gt.translation = t;
    const auto fk = forward_kinematics(tmpl, pose, shape);
    for (const auto& j : fk.joints) {
        gt.joints.push_back(j + t);
    }
    for (const auto& v : skin_points(tmpl, fk)) {
        gt.vertices.push_back(v + t);
    }
    const auto kps = layout_keypoints(tmpl, fk);
    for (std::size_t k = 0; k < kps.size(); ++k) {
        const Vec2<double> uv = project_point(kps[k], t, in, static_cast<int>(k));
        gt.keypoints2d.push_back({uv.u, uv.v, 1.0});
    }
    return gt;
}

inline BBox box_around(std::span<const KeypointObs> keypoints, double padding = 0.15) {
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (const auto& k : keypoints) {
        umin = std::min(umin, k.u);
        umax = std::max(umax, k.u);
        vmin = std::min(vmin, k.v);
        vmax = std::max(vmax, k.v);
    }
    return {0.5 * (umin + umax), 0.5 * (vmin + vmax), (umax - umin) * (1.0 + padding),
            (vmax - vmin) * (1.0 + padding)};
}

inline SceneObservation generate_scene(const SkeletonTemplate& tmpl, const SceneSpec& spec) {
    spec.validate();
    const Intrinsics& in = spec.intrinsics;
    const Vec3d n = spec.plane.normal;
    // Placement is centered where the optical axis meets the plane.
    if (!(n.z < -1e-9 && spec.plane.offset / n.z > 0.0)) {
        throw ConfigError("generate_scene: optical axis does not hit the plane in front of the camera");
    }
    const Vec3d center{0.0, 0.0, spec.plane.offset / n.z};
    Vec3d e1 = Vec3d{1.0, 0.0, 0.0} - n * n.x;
    e1 = e1 / norm(e1);
    const Vec3d e2 = cross(n, e1);

    SceneObservation scene;
    scene.intrinsics = in;
    scene.plane = spec.plane;
    const Pose base = standing_pose();
    for (int i = 0; i < spec.count; ++i) {
        std::mt19937_64 rng = person_stream(spec.seed, static_cast<std::size_t>(i));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        bool placed = false;
        Pose pose;
        Shape shape;
        Vec3d t;
        for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
            const double a = (unit(rng) - 0.5) * spec.extent;
            const double b = (unit(rng) - 0.5) * spec.extent;
            const double yaw = (unit(rng) - 0.5) * (2.0 * std::numbers::pi / 3.0);
            pose = base;
            pose.rotations[0] = upright_root_rotation(n, yaw);
            for (int j = 1; j < kJointCount; ++j) {
                for (int c = 0; c < 3; ++c) {
                    pose.rotations[static_cast<std::size_t>(j)][c] += spec.sigma_pose * gauss(rng);
                }
            }
            for (auto& beta : shape.coefficients) {
                beta = spec.sigma_shape * gauss(rng);
            }
            const Vec3d ground = center + e1 * a + e2 * b;
            const auto fk = forward_kinematics(tmpl, pose, shape);
            t = ground - ankle_midpoint(tmpl, fk.joints);

            placed = true;
            for (const auto& v : skin_points(tmpl, fk)) {
                if (!(v.z + t.z > 0.5)) {
                    placed = false;
                }
            }
            if (!placed) {
                continue;
            }
            for (const auto& k : layout_keypoints(tmpl, fk)) {
                const Vec2<double> uv = project_point(k, t, in);
                if (uv.u < 0.0 || uv.u >= in.width || uv.v < 0.0 || uv.v >= in.height) {
                    placed = false;
                }
            }
        }
        if (!placed) {
            throw ConfigError("generate_scene: could not place person " + std::to_string(i) + " inside the image after " +
                              std::to_string(kPlacementAttempts) + " attempts");
        }

        PersonObservation person;
        char id[16];
        std::snprintf(id, sizeof(id), "p%03d", i);
        person.id = id;
        person.layout = tmpl.roles.layout;
        GroundTruthBundle gt = ground_truth_for(tmpl, pose, shape, t, in);
        for (const auto& k : gt.keypoints2d) {
            person.keypoints.push_back(
                {k.u + spec.sigma_kp * gauss(rng), k.v + spec.sigma_kp * gauss(rng), 1.0});
        }
        person.box = box_around(person.keypoints);
        person.score = 0.5 + 0.5 * unit(rng);
        person.ground_truth = std::move(gt);
        scene.persons.push_back(std::move(person));
    }
    return scene;
}

// Exact estimates from a generated scene's ground truth.
inline std::vector<PersonEstimate> ground_truth_estimates(const SceneObservation& scene) {
    std::vector<PersonEstimate> out;
    for (const auto& p : scene.persons) {
        if (!p.ground_truth) {
            throw ConfigError("ground_truth_estimates: person '" + p.id + "' has no ground truth");
        }
        PersonEstimate e;
        e.id = p.id;
        e.params.pose = p.ground_truth->pose;
        e.params.shape = p.ground_truth->shape;
        e.params.cam = cam_from_translation(p.ground_truth->translation, p.box, scene.intrinsics);
        e.translation = translation_from_cam(e.params.cam, p.box, scene.intrinsics);
        out.push_back(std::move(e));
    }
    return out;
}

// Jitters depth along the crop camera (f_c changes, t_x and t_y stay), pose
// and shape.
inline std::vector<PersonEstimate> perturb_estimates(std::span<const PersonEstimate> estimates,
                                                     const SceneObservation& scene, const PerturbSpec& spec) {
    spec.validate();
    if (estimates.size() != scene.persons.size()) {
        throw ConfigError("perturb_estimates: estimate and person counts differ");
    }
    std::vector<PersonEstimate> out;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        std::mt19937_64 rng = person_stream(spec.seed, i);
        std::normal_distribution<double> gauss(0.0, 1.0);
        PersonEstimate e = estimates[i];
        const BBox& box = scene.persons[i].box;
        const Intrinsics& in = scene.intrinsics;

        double tz = e.translation.z + spec.sigma_depth * gauss(rng);
        if (tz <= kMinPerturbedDepth) {
            tz = kMinPerturbedDepth;
            e.flags.depth_clamped = true;
        }
        if (spec.sigma_depth > 0.0 || e.flags.depth_clamped) {
            e.params.cam.scale = 2.0 * in.focal / (box.size() * tz);
        }
        for (auto& r : e.params.pose.rotations) {
            for (int c = 0; c < 3; ++c) {
                r[c] += spec.sigma_pose * gauss(rng);
            }
        }
        for (auto& b : e.params.shape.coefficients) {
            b += spec.sigma_shape * gauss(rng);
        }
        e.translation = translation_from_cam(e.params.cam, box, in);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace crowdfit
