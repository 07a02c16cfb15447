#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdfit/body_model.hpp"
#include "crowdfit/camera.hpp"
#include "crowdfit/errors.hpp"
#include "crowdfit/scene.hpp"

namespace crowdfit {

// lambda1..lambda4 weight the supervised objective, lambda5..lambda8 the
// crowd-stage objective.
struct LossWeights {
    double reproj = 5.0;       // lambda1
    double smpl = 5.0;         // lambda2
    double joint = 1.0;        // lambda3
    double verts = 0.1;        // lambda4
    double crowd = 0.001;      // lambda5
    double keyp = 5.0;         // lambda6
    double init_shape = 0.001; // lambda7
    double init_pose = 5.0;    // lambda8

    void validate() const {
        for (double w : {reproj, smpl, joint, verts, crowd, keyp, init_shape, init_pose}) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw ConfigError("loss weights must be finite and non-negative");
            }
        }
    }

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

enum class KeypNormalization { box_size, raw_pixels };

inline constexpr double kConfidenceFloor = 1e-8;
// Variance smoothing for the crowd standard deviation.
inline constexpr double kStdSmoothing = 1e-12;

// Confidence-weighted mean of squared 2D residuals, each divided by the box
// size d unless raw pixels are requested. Zero-confidence keypoints are
// skipped entirely (never projected).
template <typename T>
T reproj_loss(std::span<const Vec3<T>> keypoints3d, const Vec3<T>& t, const Intrinsics& in, const BBox& box,
              std::span<const KeypointObs> obs, KeypNormalization norm = KeypNormalization::box_size) {
    if (keypoints3d.size() != obs.size()) {
        throw ConfigError("reproj_loss: " + std::to_string(keypoints3d.size()) + " model keypoints vs " +
                          std::to_string(obs.size()) + " observed");
    }
    const double d = box.size();
    if (norm == KeypNormalization::box_size && !(d > 0.0)) {
        throw DomainError("reproj_loss: box size must be positive");
    }
    const double scale = norm == KeypNormalization::box_size ? 1.0 / d : 1.0;
    T sum = T(0.0);
    double weight_sum = 0.0;
    for (std::size_t j = 0; j < obs.size(); ++j) {
        const double w = std::clamp(obs[j].confidence, 0.0, 1.0);
        if (w <= 0.0) {
            continue;
        }
        const Vec2<T> p = project_point(keypoints3d[j], t, in, static_cast<int>(j));
        const T du = (p.u - T(obs[j].u)) * T(scale);
        const T dv = (p.v - T(obs[j].v)) * T(scale);
        sum = sum + T(w) * (du * du + dv * dv);
        weight_sum += w;
    }
    if (weight_sum <= 0.0) {
        return T(0.0);
    }
    return sum / T(std::max(weight_sum, kConfidenceFloor));
}

template <typename T>
struct SupervisedTerms {
    T smpl{};
    T joint{};
    T verts{};
};

// Mean squared error over [beta, theta], root-relative joints and
// root-relative vertices.
template <typename T>
SupervisedTerms<T> supervised_param_losses(const PoseParams<T>& pose, const ShapeParams<T>& shape,
                                           std::span<const Vec3<T>> joints, std::span<const Vec3<T>> verts,
                                           const GroundTruthBundle& gt) {
    if (joints.size() != gt.joints.size() || verts.size() != gt.vertices.size() || joints.empty()) {
        throw ConfigError("supervised_param_losses: prediction has " + std::to_string(joints.size()) +
                          " joints / " + std::to_string(verts.size()) + " vertices, ground truth has " +
                          std::to_string(gt.joints.size()) + " / " + std::to_string(gt.vertices.size()));
    }
    SupervisedTerms<T> out;
    T acc = T(0.0);
    for (int s = 0; s < kShapeCount; ++s) {
        const T e = shape.coefficients[static_cast<std::size_t>(s)] - T(gt.shape.coefficients[static_cast<std::size_t>(s)]);
        acc = acc + e * e;
    }
    for (int j = 0; j < kJointCount; ++j) {
        const Vec3<T> e = pose.rotations[static_cast<std::size_t>(j)] -
                          Vec3<T>::from(gt.pose.rotations[static_cast<std::size_t>(j)]);
        acc = acc + squared_norm(e);
    }
    out.smpl = acc / T(static_cast<double>(kShapeCount + kPoseDim));

    const Vec3<T> root = joints[0];
    const Vec3d gt_root = gt.joints[0];
    acc = T(0.0);
    for (std::size_t j = 0; j < joints.size(); ++j) {
        acc = acc + squared_norm((joints[j] - root) - Vec3<T>::from(gt.joints[j] - gt_root));
    }
    out.joint = acc / T(3.0 * static_cast<double>(joints.size()));

    acc = T(0.0);
    for (std::size_t v = 0; v < verts.size(); ++v) {
        acc = acc + squared_norm((verts[v] - root) - Vec3<T>::from(gt.vertices[v] - gt_root));
    }
    out.verts = verts.empty() ? T(0.0) : acc / T(3.0 * static_cast<double>(verts.size()));
    return out;
}

template <typename T>
T supervised_total(const SupervisedTerms<T>& terms, const T& reproj, const LossWeights& w) {
    return T(w.reproj) * reproj + T(w.smpl) * terms.smpl + T(w.joint) * terms.joint + T(w.verts) * terms.verts;
}

template <typename T>
struct PlaneLandmarks {
    Vec3<T> top;
    Vec3<T> bottom;
};

template <typename T>
PlaneLandmarks<T> plane_landmarks(const SkeletonTemplate& tmpl, const std::array<Vec3<T>, kJointCount>& joints) {
    return {joints[static_cast<std::size_t>(tmpl.roles.head_top)], ankle_midpoint(tmpl, joints)};
}

// Mean of per-person unit head-to-ankle-midpoint directions. Not
// renormalized, so |l| <= 1 shrinks as people disagree.
template <typename T>
Vec3<T> estimate_plane_normal(std::span<const PlaneLandmarks<T>> people) {
    if (people.empty()) {
        throw ConfigError("estimate_plane_normal: need at least one person");
    }
    Vec3<T> sum{T(0.0), T(0.0), T(0.0)};
    for (std::size_t n = 0; n < people.size(); ++n) {
        const Vec3<T> v = people[n].top - people[n].bottom;
        const T len = norm(v);
        if (!(value_of(len) > 0.0)) {
            throw DegeneratePersonError("estimate_plane_normal: person " + std::to_string(n) +
                                            " has zero-length head-to-ankle vector",
                                        static_cast<int>(n));
        }
        sum += v / len;
    }
    return sum / T(static_cast<double>(people.size()));
}

template <typename T>
Vec3<T> estimate_plane_normal(const SkeletonTemplate& tmpl, std::span<const std::array<Vec3<T>, kJointCount>> joint_sets) {
    std::vector<PlaneLandmarks<T>> marks;
    marks.reserve(joint_sets.size());
    for (const auto& js : joint_sets) {
        marks.push_back(plane_landmarks(tmpl, js));
    }
    return estimate_plane_normal(std::span<const PlaneLandmarks<T>>(marks));
}

// Smoothed population standard deviation: var / sqrt(var + eps). Exactly
// zero at zero variance with a finite derivative there.
template <typename T>
T smoothed_std(std::span<const T> values) {
    using std::sqrt;
    const std::size_t n = values.size();
    if (n < 2) {
        return T(0.0);
    }
    T mean = T(0.0);
    for (const auto& v : values) {
        mean = mean + v;
    }
    mean = mean / T(static_cast<double>(n));
    T var = T(0.0);
    for (const auto& v : values) {
        const T e = v - mean;
        var = var + e * e;
    }
    var = var / T(static_cast<double>(n));
    if (value_of(var) == 0.0) {
        return var;
    }
    return var / sqrt(var + T(kStdSmoothing));
}

// Spread of the roots along l. Zero for fewer than two people.
template <typename T>
T crowd_loss(std::span<const Vec3<T>> roots, const Vec3<T>& l) {
    std::vector<T> heights;
    heights.reserve(roots.size());
    for (const auto& r : roots) {
        heights.push_back(dot(r, l));
    }
    return smoothed_std(std::span<const T>(heights));
}

// Everything the crowd terms need from one person at one parameter value.
template <typename T>
struct PersonGeometry {
    FkResult<T> fk;
    std::vector<Vec3<T>> keypoints;  // root-local, layout order
    Vec3<T> translation{};
    bool valid = false;  // f_c > 0 and every confident keypoint in front of the camera
};

template <typename T>
PersonGeometry<T> evaluate_person(const SkeletonTemplate& tmpl, const PersonParams<T>& p, const BBox& box,
                                  const Intrinsics& in, std::span<const KeypointObs> obs = {}) {
    PersonGeometry<T> g;
    g.fk = forward_kinematics(tmpl, p.pose, p.shape);
    g.keypoints = layout_keypoints(tmpl, g.fk);
    if (!(value_of(p.cam.scale) > 0.0) || !(box.size() > 0.0)) {
        return g;
    }
    g.translation = translation_from_cam(p.cam, box, in);
    g.valid = value_of(g.translation.z) > 0.0;
    for (std::size_t j = 0; j < obs.size() && j < g.keypoints.size() && g.valid; ++j) {
        if (obs[j].confidence > 0.0 && !(value_of(g.keypoints[j].z + g.translation.z) > 0.0)) {
            g.valid = false;
        }
    }
    return g;
}

// (1/N) sum of per-person reprojection terms against the detected poses.
// Persons whose geometry is invalid contribute zero and are reported through
// `masked` when provided.
template <typename T>
T keyp_loss(std::span<const PersonGeometry<T>> geometry, std::span<const PersonObservation> detections,
            const Intrinsics& in, KeypNormalization norm = KeypNormalization::box_size,
            std::vector<bool>* masked = nullptr) {
    if (geometry.size() != detections.size()) {
        throw ConfigError("keyp_loss: estimate and detection counts differ");
    }
    if (masked != nullptr) {
        masked->assign(geometry.size(), false);
    }
    if (geometry.empty()) {
        return T(0.0);
    }
    T sum = T(0.0);
    for (std::size_t n = 0; n < geometry.size(); ++n) {
        if (!geometry[n].valid) {
            if (masked != nullptr) {
                (*masked)[n] = true;
            }
            continue;
        }
        sum = sum + reproj_loss(std::span<const Vec3<T>>(geometry[n].keypoints), geometry[n].translation, in,
                                detections[n].box, std::span<const KeypointObs>(detections[n].keypoints), norm);
    }
    return sum / T(static_cast<double>(geometry.size()));
}

// Pull toward the stage-1 estimates. When `literal_crowd_factor` is given the
// shape term is additionally multiplied by it.
template <typename T>
T init_loss(std::span<const PersonParams<T>> current, std::span<const PersonParams<double>> init,
            const LossWeights& w, const std::optional<T>& literal_crowd_factor = std::nullopt) {
    if (current.size() != init.size()) {
        throw ConfigError("init_loss: estimate and init counts differ");
    }
    if (current.empty()) {
        return T(0.0);
    }
    T sum = T(0.0);
    for (std::size_t n = 0; n < current.size(); ++n) {
        T shape_sq = T(0.0);
        for (int s = 0; s < kShapeCount; ++s) {
            const auto us = static_cast<std::size_t>(s);
            const T e = current[n].shape.coefficients[us] - T(init[n].shape.coefficients[us]);
            shape_sq = shape_sq + e * e;
        }
        T pose_sq = T(0.0);
        for (int j = 0; j < kJointCount; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            pose_sq = pose_sq + squared_norm(current[n].pose.rotations[uj] - Vec3<T>::from(init[n].pose.rotations[uj]));
        }
        T shape_term = T(w.init_shape) * shape_sq;
        if (literal_crowd_factor) {
            shape_term = shape_term * *literal_crowd_factor;
        }
        sum = sum + shape_term + T(w.init_pose) * pose_sq;
    }
    return sum / T(static_cast<double>(current.size()));
}

template <typename T>
struct CrowdTerms {
    T crowd{};
    T keyp{};
    T init{};
};

// lambda5 * L_crowd + lambda6 * L_keyp + L_init.
template <typename T>
T crowd_total(const CrowdTerms<T>& terms, const LossWeights& w) {
    return T(w.crowd) * terms.crowd + T(w.keyp) * terms.keyp + terms.init;
}

}  // namespace crowdfit
