#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdfit/body_model.hpp"
#include "crowdfit/camera.hpp"
#include "crowdfit/errors.hpp"
#include "crowdfit/losses.hpp"
#include "crowdfit/scene.hpp"

namespace crowdfit {

// Per-keypoint OKS constants k_i for the 17-point COCO layout (k = 2 * sigma).
inline constexpr std::array<double, 17> kCocoOksConstants = {
    0.052, 0.050, 0.050, 0.070, 0.070, 0.158, 0.158, 0.144, 0.144,
    0.124, 0.124, 0.214, 0.214, 0.174, 0.174, 0.178, 0.178};
inline constexpr double kUniformOksConstant = 0.08;

inline std::vector<double> oks_constants(const std::string& layout, std::size_t count) {
    if (layout == "coco17" && count == kCocoOksConstants.size()) {
        return {kCocoOksConstants.begin(), kCocoOksConstants.end()};
    }
    return std::vector<double>(count, kUniformOksConstant);
}

// Mean over visible keypoints (confidence > 0) of exp(-d^2 / (2 s^2 k^2)),
// with s^2 the object area. Empty when nothing is visible.
inline std::optional<double> oks(std::span<const Vec2<double>> pred, std::span<const KeypointObs> gt, double area,
                                 std::span<const double> k) {
    if (pred.size() != gt.size() || k.size() != gt.size()) {
        throw ConfigError("oks: prediction, ground truth and constants must have equal length");
    }
    if (!(area > 0.0)) {
        throw DomainError("oks: area must be positive");
    }
    double sum = 0.0;
    int visible = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!(gt[i].confidence > 0.0)) {
            continue;
        }
        const double du = pred[i].u - gt[i].u;
        const double dv = pred[i].v - gt[i].v;
        const double d2 = du * du + dv * dv;
        sum += std::exp(-d2 / (2.0 * area * k[i] * k[i]));
        ++visible;
    }
    if (visible == 0) {
        return std::nullopt;
    }
    return sum / visible;
}

// Mean Euclidean joint error in millimeters.
inline double mpjpe(std::span<const Vec3d> pred, std::span<const Vec3d> gt) {
    if (pred.size() != gt.size() || pred.empty()) {
        throw ConfigError("mpjpe: joint counts differ or are empty");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        sum += norm(pred[i] - gt[i]);
    }
    return 1000.0 * sum / static_cast<double>(pred.size());
}

struct AlignedError {
    double mm = 0.0;
    // Similarity alignment was impossible; only translation was removed.
    bool translation_only = false;
};

// MPJPE after the least-squares similarity transform taking pred onto gt.
inline AlignedError pa_mpjpe(std::span<const Vec3d> pred, std::span<const Vec3d> gt) {
    if (pred.size() != gt.size() || pred.empty()) {
        throw ConfigError("pa_mpjpe: joint counts differ or are empty");
    }
    const auto n = static_cast<Eigen::Index>(pred.size());
    Eigen::Matrix3Xd src(3, n);
    Eigen::Matrix3Xd dst(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = pred[static_cast<std::size_t>(i)];
        const auto& g = gt[static_cast<std::size_t>(i)];
        src.col(i) << p.x, p.y, p.z;
        dst.col(i) << g.x, g.y, g.z;
    }
    const Eigen::Vector3d src_mean = src.rowwise().mean();
    const Eigen::Vector3d dst_mean = dst.rowwise().mean();
    const double spread = (src.colwise() - src_mean).squaredNorm();

    AlignedError out;
    Eigen::Matrix3Xd aligned;
    if (spread < 1e-20 || n < 3) {
        out.translation_only = true;
        aligned = src.colwise() + (dst_mean - src_mean);
    } else {
        const Eigen::Matrix4d T = Eigen::umeyama(src, dst, true);
        aligned = (T.topLeftCorner<3, 3>() * src).colwise() + T.topRightCorner<3, 1>();
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        sum += (aligned.col(i) - dst.col(i)).norm();
    }
    out.mm = 1000.0 * sum / static_cast<double>(n);
    return out;
}

struct PlaneReport {
    double residual_std = 0.0;  // meters, along the unit normal
    Vec3d unit_normal;
    std::optional<double> angle_error_deg;
};

// Spread of roots along the unit-normalized head-to-ankle normal, and its
// angle to a reference plane when given.
inline PlaneReport plane_report(std::span<const Vec3d> roots, std::span<const PlaneLandmarks<double>> landmarks,
                                const std::optional<Plane>& reference = std::nullopt) {
    PlaneReport r;
    const Vec3d l = estimate_plane_normal(landmarks);
    const double len = norm(l);
    if (!(len > 0.0)) {
        throw DomainError("plane_report: estimated normal has zero length");
    }
    r.unit_normal = l / len;
    r.residual_std = crowd_loss(roots, r.unit_normal);
    if (reference) {
        const double c = std::clamp(std::abs(dot(r.unit_normal, reference->normal)), 0.0, 1.0);
        r.angle_error_deg = std::acos(c) * 180.0 / std::numbers::pi;
    }
    return r;
}

// World-frame geometry of a set of estimates.
struct WorldPeople {
    std::vector<Vec3d> roots;
    std::vector<PlaneLandmarks<double>> landmarks;
};

inline WorldPeople world_people(const SkeletonTemplate& tmpl, std::span<const PersonEstimate> estimates) {
    WorldPeople w;
    for (const auto& e : estimates) {
        const auto fk = forward_kinematics(tmpl, e.params.pose, e.params.shape);
        std::array<Vec3d, kJointCount> world{};
        for (std::size_t j = 0; j < world.size(); ++j) {
            world[j] = fk.joints[j] + e.translation;
        }
        w.roots.push_back(e.translation);
        w.landmarks.push_back(plane_landmarks(tmpl, world));
    }
    return w;
}

inline PlaneReport plane_report(const SkeletonTemplate& tmpl, std::span<const PersonEstimate> estimates,
                                const std::optional<Plane>& reference = std::nullopt) {
    const WorldPeople w = world_people(tmpl, estimates);
    return plane_report(w.roots, w.landmarks, reference);
}

// Projected layout keypoints of an estimate.
inline std::vector<Vec2<double>> reprojected_keypoints(const SkeletonTemplate& tmpl, const PersonEstimate& e,
                                                       const Intrinsics& in) {
    const auto fk = forward_kinematics(tmpl, e.params.pose, e.params.shape);
    const auto kps = layout_keypoints(tmpl, fk);
    return project(std::span<const Vec3d>(kps), e.translation, in);
}

struct DepthErrorStats {
    double mean_abs = 0.0;
    double rms = 0.0;
    double max_abs = 0.0;
};

struct EvalReport {
    std::vector<std::string> ids;
    std::vector<std::optional<double>> oks;
    std::optional<double> mean_oks;
    std::optional<double> mpjpe_mm;
    std::optional<double> pa_mpjpe_mm;
    std::optional<double> plane_residual_std;
    std::optional<double> normal_angle_deg;
    std::optional<DepthErrorStats> depth_error;
};

// Compares estimates to a scene. OKS targets the clean ground-truth 2D when
// present, otherwise the observed keypoints; 3D metrics need ground truth.
inline EvalReport evaluate(const SkeletonTemplate& tmpl, const SceneObservation& scene,
                           std::span<const PersonEstimate> estimates) {
    EvalReport report;
    double oks_sum = 0.0;
    int oks_count = 0;
    double mp_sum = 0.0;
    double pa_sum = 0.0;
    std::vector<double> depth_err;
    int matched_gt = 0;
    for (const auto& e : estimates) {
        const auto it = std::find_if(scene.persons.begin(), scene.persons.end(),
                                     [&](const PersonObservation& p) { return p.id == e.id; });
        if (it == scene.persons.end()) {
            throw ConfigError("evaluate: estimate '" + e.id + "' has no matching person in the scene");
        }
        report.ids.push_back(e.id);
        const auto pred2d = reprojected_keypoints(tmpl, e, scene.intrinsics);
        const std::vector<KeypointObs>& target =
            it->ground_truth && !it->ground_truth->keypoints2d.empty() ? it->ground_truth->keypoints2d : it->keypoints;
        const auto k = oks_constants(it->layout, target.size());
        const auto value = oks(std::span<const Vec2<double>>(pred2d), std::span<const KeypointObs>(target),
                               it->box.area(), std::span<const double>(k));
        report.oks.push_back(value);
        if (value) {
            oks_sum += *value;
            ++oks_count;
        }
        if (it->ground_truth && it->ground_truth->joints.size() == static_cast<std::size_t>(kJointCount)) {
            const auto fk = forward_kinematics(tmpl, e.params.pose, e.params.shape);
            std::vector<Vec3d> world;
            for (const auto& j : fk.joints) {
                world.push_back(j + e.translation);
            }
            mp_sum += mpjpe(std::span<const Vec3d>(world), std::span<const Vec3d>(it->ground_truth->joints));
            pa_sum += pa_mpjpe(std::span<const Vec3d>(world), std::span<const Vec3d>(it->ground_truth->joints)).mm;
            depth_err.push_back(std::abs(e.translation.z - it->ground_truth->translation.z));
            ++matched_gt;
        }
    }
    if (oks_count > 0) {
        report.mean_oks = oks_sum / oks_count;
    }
    if (matched_gt > 0) {
        report.mpjpe_mm = mp_sum / matched_gt;
        report.pa_mpjpe_mm = pa_sum / matched_gt;
        DepthErrorStats s;
        for (double d : depth_err) {
            s.mean_abs += d;
            s.rms += d * d;
            s.max_abs = std::max(s.max_abs, d);
        }
        s.mean_abs /= static_cast<double>(depth_err.size());
        s.rms = std::sqrt(s.rms / static_cast<double>(depth_err.size()));
        report.depth_error = s;
    }
    if (!estimates.empty()) {
        const PlaneReport pr = plane_report(tmpl, estimates, scene.plane);
        report.plane_residual_std = pr.residual_std;
        report.normal_angle_deg = pr.angle_error_deg;
    }
    return report;
}

}  // namespace crowdfit
