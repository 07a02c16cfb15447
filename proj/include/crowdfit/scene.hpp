#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crowdfit/body_model.hpp"
#include "crowdfit/camera.hpp"

namespace crowdfit {

struct KeypointObs {
    double u = 0.0;
    double v = 0.0;
    double confidence = 0.0;

    friend bool operator==(const KeypointObs&, const KeypointObs&) = default;
};

// Supervision for one person. Joints and vertices are world (camera-frame)
// positions; losses compare them root-relative.
struct GroundTruthBundle {
    Pose pose;
    Shape shape;
    Vec3d translation;
    std::vector<Vec3d> joints;
    std::vector<Vec3d> vertices;
    std::vector<KeypointObs> keypoints2d;

    friend bool operator==(const GroundTruthBundle&, const GroundTruthBundle&) = default;
};

// Ground plane n . x = offset in camera coordinates, n unit length.
struct Plane {
    Vec3d normal;
    double offset = 0.0;

    friend bool operator==(const Plane&, const Plane&) = default;
};

struct PersonObservation {
    std::string id;
    BBox box;
    double score = 1.0;
    std::string layout = "coco17";
    std::vector<KeypointObs> keypoints;
    std::optional<GroundTruthBundle> ground_truth;

    friend bool operator==(const PersonObservation&, const PersonObservation&) = default;
};

struct SceneObservation {
    Intrinsics intrinsics;
    std::vector<PersonObservation> persons;
    std::optional<Plane> plane;

    friend bool operator==(const SceneObservation&, const SceneObservation&) = default;
};

// Free parameters of one person, in ParamVector order.
template <typename T>
struct PersonParams {
    PoseParams<T> pose;
    ShapeParams<T> shape;
    CamTriple<T> cam;

    friend bool operator==(const PersonParams&, const PersonParams&) = default;
};

struct EstimateFlags {
    bool low_confidence = false;
    bool degenerate = false;
    bool depth_masked = false;
    bool depth_clamped = false;

    friend bool operator==(const EstimateFlags&, const EstimateFlags&) = default;
};

struct PersonEstimate {
    std::string id;
    PersonParams<double> params;
    Vec3d translation;
    EstimateFlags flags;

    friend bool operator==(const PersonEstimate&, const PersonEstimate&) = default;
};

struct LossBreakdown {
    double crowd = 0.0;
    double keyp = 0.0;
    double init = 0.0;
    double total = 0.0;

    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

struct IterationRecord {
    int step = 0;
    double lr = 0.0;
    double objective = 0.0;

    friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct BatchLog {
    std::vector<std::string> person_ids;
    std::vector<IterationRecord> iterations;
    std::string error;

    friend bool operator==(const BatchLog&, const BatchLog&) = default;
};

struct SceneEstimate {
    std::vector<PersonEstimate> persons;
    // Stage-1 estimates the crowd stage started from.
    std::vector<PersonEstimate> initial;
    std::optional<Vec3d> normal;
    LossBreakdown loss;
    std::vector<BatchLog> log;
    std::vector<std::string> warnings;
    bool crowd_stage_run = false;

    friend bool operator==(const SceneEstimate&, const SceneEstimate&) = default;
};

inline int confident_keypoint_count(const PersonObservation& p) {
    int n = 0;
    for (const auto& k : p.keypoints) {
        if (k.confidence > 0.0) {
            ++n;
        }
    }
    return n;
}

}  // namespace crowdfit
