#pragma once

// Simplified articulated body: a 24-joint kinematic tree with SMPL's
// topology, a linear shape basis acting on the rest skeleton, and a set of
// rigidly attached surface points standing in for mesh vertices.
//
// Body frame follows the camera convention used throughout the library:
// +x is the person's left, +y points down (feet have larger y than head),
// and the person faces -z. With zero pose a body placed in front of the
// camera is upright and facing it.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "crowdfit/errors.hpp"
#include "crowdfit/geometry.hpp"

namespace crowdfit {

inline constexpr int kJointCount = 24;
inline constexpr int kShapeCount = 10;
inline constexpr int kPoseDim = 3 * kJointCount;
inline constexpr int kMinTemplatePoints = 30;

// Where an observed keypoint comes from on the body.
struct KeypointSource {
    enum class Kind { joint, point };
    Kind kind = Kind::joint;
    int index = 0;

    friend bool operator==(const KeypointSource&, const KeypointSource&) = default;
};

struct RoleMap {
    int root = 0;
    int head_top = 15;
    int left_ankle = 7;
    int right_ankle = 8;
    std::string layout = "coco17";
    std::vector<std::string> keypoint_names;
    std::vector<KeypointSource> keypoints;

    friend bool operator==(const RoleMap&, const RoleMap&) = default;
};

struct TemplatePoint {
    std::string name;
    Vec3d position;
    int joint = 0;

    friend bool operator==(const TemplatePoint&, const TemplatePoint&) = default;
};

struct SkeletonTemplate {
    std::string version = "crowdfit-body/1";
    std::vector<std::string> joint_names;
    std::vector<int> parents;
    std::vector<Vec3d> rest_joints;
    // Row (3 * joint + axis), column shape coefficient; row-major.
    std::vector<double> shape_basis;
    std::vector<TemplatePoint> template_points;
    RoleMap roles;

    int joint_count() const noexcept { return static_cast<int>(parents.size()); }
    int point_count() const noexcept { return static_cast<int>(template_points.size()); }
    int keypoint_count() const noexcept { return static_cast<int>(roles.keypoints.size()); }
    double basis(int row, int col) const {
        return shape_basis[static_cast<std::size_t>(row * kShapeCount + col)];
    }

    friend bool operator==(const SkeletonTemplate&, const SkeletonTemplate&) = default;
};

template <typename T>
struct PoseParams {
    std::array<Vec3<T>, kJointCount> rotations{};

    friend bool operator==(const PoseParams&, const PoseParams&) = default;
};

template <typename T>
struct ShapeParams {
    std::array<T, kShapeCount> coefficients{};

    friend bool operator==(const ShapeParams&, const ShapeParams&) = default;
};

using Pose = PoseParams<double>;
using Shape = ShapeParams<double>;

// Throws ConfigError describing the first violated invariant.
inline void validate(const SkeletonTemplate& t) {
    const int k = t.joint_count();
    if (k != kJointCount) {
        throw ConfigError("template: expected " + std::to_string(kJointCount) + " joints, got " +
                          std::to_string(k));
    }
    if (static_cast<int>(t.rest_joints.size()) != k) {
        throw ConfigError("template: rest_joints has " + std::to_string(t.rest_joints.size()) +
                          " entries, expected " + std::to_string(k));
    }
    if (!t.joint_names.empty() && static_cast<int>(t.joint_names.size()) != k) {
        throw ConfigError("template: joint_names length does not match joint count");
    }
    if (t.parents[0] != -1) {
        throw ConfigError("template: parents[0] must be -1 (root)");
    }
    for (int i = 1; i < k; ++i) {
        const int p = t.parents[static_cast<std::size_t>(i)];
        if (p < 0 || p >= i) {
            throw ConfigError("template: parents[" + std::to_string(i) + "] = " + std::to_string(p) +
                              " violates parent-before-child ordering");
        }
    }
    if (t.shape_basis.size() != static_cast<std::size_t>(3 * k * kShapeCount)) {
        throw ConfigError("template: shape_basis must be " + std::to_string(3 * k) + " x " +
                          std::to_string(kShapeCount) + ", got " +
                          std::to_string(t.shape_basis.size()) + " values");
    }
    if (t.point_count() < kMinTemplatePoints) {
        throw ConfigError("template: need at least " + std::to_string(kMinTemplatePoints) +
                          " template points, got " + std::to_string(t.point_count()));
    }
    for (int i = 0; i < t.point_count(); ++i) {
        const int j = t.template_points[static_cast<std::size_t>(i)].joint;
        if (j < 0 || j >= k) {
            throw ConfigError("template: point " + std::to_string(i) + " attached to joint " +
                              std::to_string(j) + " out of range");
        }
    }
    const auto check_joint = [&](int j, const char* role) {
        if (j < 0 || j >= k) {
            throw ConfigError(std::string("template: role '") + role + "' index " +
                              std::to_string(j) + " out of range");
        }
    };
    check_joint(t.roles.root, "root");
    check_joint(t.roles.head_top, "head_top");
    check_joint(t.roles.left_ankle, "left_ankle");
    check_joint(t.roles.right_ankle, "right_ankle");
    if (t.roles.root != 0) {
        throw ConfigError("template: root role must be joint 0");
    }
    if (t.roles.head_top == t.roles.left_ankle || t.roles.head_top == t.roles.right_ankle) {
        throw ConfigError("template: head_top must differ from both ankles");
    }
    if (!t.roles.keypoint_names.empty() && t.roles.keypoint_names.size() != t.roles.keypoints.size()) {
        throw ConfigError("template: keypoint_names length does not match keypoint map");
    }
    for (std::size_t i = 0; i < t.roles.keypoints.size(); ++i) {
        const auto& src = t.roles.keypoints[i];
        const int limit = src.kind == KeypointSource::Kind::joint ? k : t.point_count();
        if (src.index < 0 || src.index >= limit) {
            throw ConfigError("template: keypoint " + std::to_string(i) + " source index " +
                              std::to_string(src.index) + " out of range");
        }
    }
}

namespace detail {

// Lengths in meters, SMPL-like proportions for a ~1.7 m adult, written in a
// y-up / z-forward frame and flipped into the body frame by to_body().
inline Vec3d to_body(double x, double y, double z) { return {x, -y, -z}; }

}  // namespace detail

// The shipped reference template. data/body_template_v1.json is this
// template serialized.
inline SkeletonTemplate reference_template() {
    using detail::to_body;
    SkeletonTemplate t;
    t.joint_names = {"pelvis",     "left_hip",       "right_hip",      "spine1",      "left_knee",
                     "right_knee", "spine2",         "left_ankle",     "right_ankle", "spine3",
                     "left_foot",  "right_foot",     "neck",           "left_collar", "right_collar",
                     "head",       "left_shoulder",  "right_shoulder", "left_elbow",  "right_elbow",
                     "left_wrist", "right_wrist",    "left_hand",      "right_hand"};
    t.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
    t.rest_joints = {
        to_body(0.0, 0.0, 0.0),       to_body(0.06, -0.09, 0.0),    to_body(-0.06, -0.09, 0.0),
        to_body(0.0, 0.11, -0.02),    to_body(0.10, -0.47, 0.0),    to_body(-0.10, -0.47, 0.0),
        to_body(0.0, 0.24, 0.0),      to_body(0.09, -0.87, 0.0),    to_body(-0.09, -0.87, 0.0),
        to_body(0.0, 0.30, 0.02),     to_body(0.11, -0.93, 0.12),   to_body(-0.11, -0.93, 0.12),
        to_body(0.0, 0.52, -0.01),    to_body(0.08, 0.44, 0.0),     to_body(-0.08, 0.44, 0.0),
        to_body(0.0, 0.61, 0.0),      to_body(0.17, 0.46, -0.01),   to_body(-0.17, 0.46, -0.01),
        to_body(0.43, 0.44, -0.03),   to_body(-0.43, 0.44, -0.03),  to_body(0.68, 0.45, -0.01),
        to_body(-0.68, 0.45, -0.01),  to_body(0.76, 0.44, -0.02),   to_body(-0.76, 0.44, -0.02)};

    // Shape directions, meters per unit coefficient, in the y-up frame.
    std::vector<std::array<Vec3d, kJointCount>> dirs(kShapeCount);
    for (auto& d : dirs) {
        d.fill(Vec3d{});
    }
    const auto up = [&](int joint) {
        const Vec3d b = t.rest_joints[static_cast<std::size_t>(joint)];
        return Vec3d{b.x, -b.y, -b.z};
    };
    const auto side = [&](int joint) { return up(joint).x > 0.0 ? 1.0 : -1.0; };
    // 0: overall stature, 5% uniform scale about the pelvis.
    for (int j = 0; j < kJointCount; ++j) {
        dirs[0][j] = up(j) * 0.05;
    }
    // 1: leg length.
    for (int j : {4, 5}) dirs[1][j] = {0.0, -0.015, 0.0};
    for (int j : {7, 8, 10, 11}) dirs[1][j] = {0.0, -0.03, 0.0};
    // 2: torso length; everything above the pelvis moves up proportionally.
    for (int j : {3}) dirs[2][j] = {0.0, 0.005, 0.0};
    for (int j : {6}) dirs[2][j] = {0.0, 0.01, 0.0};
    for (int j : {9, 13, 14, 16, 17, 18, 19, 20, 21, 22, 23}) dirs[2][j] = {0.0, 0.015, 0.0};
    for (int j : {12, 15}) dirs[2][j] = {0.0, 0.02, 0.0};
    // 3: shoulder width.
    for (int j : {13, 14}) dirs[3][j] = {0.01 * side(j), 0.0, 0.0};
    for (int j : {16, 17, 18, 19, 20, 21, 22, 23}) dirs[3][j] = {0.02 * side(j), 0.0, 0.0};
    // 4: hip width.
    for (int j : {1, 2, 4, 5, 7, 8, 10, 11}) dirs[4][j] = {0.015 * side(j), 0.0, 0.0};
    // 5: arm length.
    for (int j : {18, 19}) dirs[5][j] = {0.02 * side(j), 0.0, 0.0};
    for (int j : {20, 21}) dirs[5][j] = {0.04 * side(j), 0.0, 0.0};
    for (int j : {22, 23}) dirs[5][j] = {0.045 * side(j), 0.0, 0.0};
    // 6: neck and head height.
    dirs[6][12] = {0.0, 0.005, 0.0};
    dirs[6][15] = {0.0, 0.015, 0.0};
    // 7: chest depth.
    for (int j : {6, 9}) dirs[7][j] = {0.0, 0.0, 0.01};
    for (int j : {12, 13, 14, 15, 16, 17}) dirs[7][j] = {0.0, 0.0, 0.005};
    // 8: knee offset.
    for (int j : {4, 5}) dirs[8][j] = {0.0, 0.0, 0.01};
    // 9: foot length.
    for (int j : {10, 11}) dirs[9][j] = {0.0, 0.0, 0.015};

    t.shape_basis.assign(static_cast<std::size_t>(3 * kJointCount * kShapeCount), 0.0);
    for (int s = 0; s < kShapeCount; ++s) {
        for (int j = 0; j < kJointCount; ++j) {
            const Vec3d& d = dirs[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)];
            const Vec3d b = to_body(d.x, d.y, d.z);
            for (int a = 0; a < 3; ++a) {
                t.shape_basis[static_cast<std::size_t>((3 * j + a) * kShapeCount + s)] = b[a] + 0.0;
            }
        }
    }

    // One point at every joint, one at every bone midpoint (attached to the
    // parent), then face markers and the top of the head.
    for (int j = 0; j < kJointCount; ++j) {
        t.template_points.push_back(
            {t.joint_names[static_cast<std::size_t>(j)], t.rest_joints[static_cast<std::size_t>(j)], j});
    }
    for (int j = 1; j < kJointCount; ++j) {
        const int p = t.parents[static_cast<std::size_t>(j)];
        const Vec3d mid = (t.rest_joints[static_cast<std::size_t>(j)] + t.rest_joints[static_cast<std::size_t>(p)]) * 0.5;
        t.template_points.push_back({t.joint_names[static_cast<std::size_t>(j)] + "_bone", mid, p});
    }
    const int first_face = static_cast<int>(t.template_points.size());
    t.template_points.push_back({"nose", to_body(0.0, 0.60, 0.10), 15});
    t.template_points.push_back({"left_eye", to_body(0.035, 0.64, 0.07), 15});
    t.template_points.push_back({"right_eye", to_body(-0.035, 0.64, 0.07), 15});
    t.template_points.push_back({"left_ear", to_body(0.075, 0.61, -0.03), 15});
    t.template_points.push_back({"right_ear", to_body(-0.075, 0.61, -0.03), 15});
    t.template_points.push_back({"head_top", to_body(0.0, 0.74, 0.0), 15});

    t.roles.root = 0;
    t.roles.head_top = 15;
    t.roles.left_ankle = 7;
    t.roles.right_ankle = 8;
    t.roles.layout = "coco17";
    t.roles.keypoint_names = {"nose",           "left_eye",       "right_eye",  "left_ear",
                              "right_ear",      "left_shoulder",  "right_shoulder", "left_elbow",
                              "right_elbow",    "left_wrist",     "right_wrist", "left_hip",
                              "right_hip",      "left_knee",      "right_knee", "left_ankle",
                              "right_ankle"};
    using K = KeypointSource::Kind;
    t.roles.keypoints = {{K::point, first_face},     {K::point, first_face + 1}, {K::point, first_face + 2},
                         {K::point, first_face + 3}, {K::point, first_face + 4}, {K::joint, 16},
                         {K::joint, 17},             {K::joint, 18},             {K::joint, 19},
                         {K::joint, 20},             {K::joint, 21},             {K::joint, 1},
                         {K::joint, 2},              {K::joint, 4},              {K::joint, 5},
                         {K::joint, 7},              {K::joint, 8}};
    validate(t);
    return t;
}

// J0 + B * beta.
template <typename T>
std::array<Vec3<T>, kJointCount> shaped_rest_joints(const SkeletonTemplate& tmpl, const ShapeParams<T>& shape) {
    if (tmpl.shape_basis.size() != static_cast<std::size_t>(3 * kJointCount * kShapeCount) ||
        tmpl.joint_count() != kJointCount) {
        throw ConfigError("shaped_rest_joints: shape basis does not match " +
                          std::to_string(kShapeCount) + " coefficients");
    }
    std::array<Vec3<T>, kJointCount> out{};
    for (int j = 0; j < kJointCount; ++j) {
        const Vec3d& rest = tmpl.rest_joints[static_cast<std::size_t>(j)];
        for (int a = 0; a < 3; ++a) {
            T acc = T(rest[a]);
            const int row = 3 * j + a;
            for (int s = 0; s < kShapeCount; ++s) {
                const double b = tmpl.basis(row, s);
                if (b != 0.0) {
                    acc = acc + T(b) * shape.coefficients[static_cast<std::size_t>(s)];
                }
            }
            out[static_cast<std::size_t>(j)][a] = acc;
        }
    }
    return out;
}

template <typename T>
struct FkResult {
    // Posed joint positions in the root-local frame (root at the origin).
    std::array<Vec3<T>, kJointCount> joints{};
    // Accumulated world rotation of each joint.
    std::array<Mat3<T>, kJointCount> rotations{};
};

template <typename T>
FkResult<T> forward_kinematics(const SkeletonTemplate& tmpl, const PoseParams<T>& pose, const ShapeParams<T>& shape) {
    const auto rest = shaped_rest_joints(tmpl, shape);
    FkResult<T> fk;
    fk.rotations[0] = rodrigues(pose.rotations[0]);
    fk.joints[0] = Vec3<T>{T(0), T(0), T(0)};
    for (int i = 1; i < kJointCount; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const auto p = static_cast<std::size_t>(tmpl.parents[ui]);
        fk.rotations[ui] = fk.rotations[p] * rodrigues(pose.rotations[ui]);
        fk.joints[ui] = fk.joints[p] + fk.rotations[p] * (rest[ui] - rest[p]);
    }
    return fk;
}

// Rigid skinning: each point follows its attached joint's transform.
template <typename T>
std::vector<Vec3<T>> skin_points(const SkeletonTemplate& tmpl, const FkResult<T>& fk) {
    std::vector<Vec3<T>> out;
    out.reserve(tmpl.template_points.size());
    for (std::size_t i = 0; i < tmpl.template_points.size(); ++i) {
        const auto& tp = tmpl.template_points[i];
        if (tp.joint < 0 || tp.joint >= kJointCount) {
            throw ConfigError("skin_points: point " + std::to_string(i) + " attached to joint " +
                              std::to_string(tp.joint) + " out of range");
        }
        const auto j = static_cast<std::size_t>(tp.joint);
        const Vec3d offset = tp.position - tmpl.rest_joints[j];
        out.push_back(fk.joints[j] + fk.rotations[j] * Vec3<T>::from(offset));
    }
    return out;
}

// Root-local 3D positions of the observation keypoints, in layout order.
// Only the template points a keypoint needs are skinned.
template <typename T>
std::vector<Vec3<T>> layout_keypoints(const SkeletonTemplate& tmpl, const FkResult<T>& fk) {
    std::vector<Vec3<T>> out;
    out.reserve(tmpl.roles.keypoints.size());
    for (const auto& src : tmpl.roles.keypoints) {
        if (src.kind == KeypointSource::Kind::joint) {
            out.push_back(fk.joints[static_cast<std::size_t>(src.index)]);
        } else {
            const auto& tp = tmpl.template_points[static_cast<std::size_t>(src.index)];
            const auto j = static_cast<std::size_t>(tp.joint);
            const Vec3d offset = tp.position - tmpl.rest_joints[j];
            out.push_back(fk.joints[j] + fk.rotations[j] * Vec3<T>::from(offset));
        }
    }
    return out;
}

// Wraps every joint's rotation angle into [0, 2*pi).
inline Pose canonicalize(const Pose& pose) {
    Pose out = pose;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (auto& r : out.rotations) {
        const double angle = norm(r);
        if (angle >= two_pi && std::isfinite(angle)) {
            const double wrapped = std::fmod(angle, two_pi);
            r = r * (wrapped / angle);
        }
    }
    return out;
}

template <typename T>
Vec3<T> ankle_midpoint(const SkeletonTemplate& tmpl, const std::array<Vec3<T>, kJointCount>& joints) {
    return (joints[static_cast<std::size_t>(tmpl.roles.left_ankle)] +
            joints[static_cast<std::size_t>(tmpl.roles.right_ankle)]) *
           T(0.5);
}

}  // namespace crowdfit
