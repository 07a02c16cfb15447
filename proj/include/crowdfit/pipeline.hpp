#pragma once

// Two-stage reconstruction. Stage 1 fits every detected person on its own
// (2D reprojection plus a weak pose/shape prior); stage 2 refines all people
// jointly under the crowd ground-plane constraint, anchored to stage 1.
//
// Both stages optimize body parameters directly: [theta, beta, f_c, t_x, t_y]
// per person. The init anchor of the crowd objective is the only prior in
// stage 2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdfit/body_model.hpp"
#include "crowdfit/camera.hpp"
#include "crowdfit/diff.hpp"
#include "crowdfit/errors.hpp"
#include "crowdfit/losses.hpp"
#include "crowdfit/optim.hpp"
#include "crowdfit/scene.hpp"

namespace crowdfit {

struct InitFitConfig {
    int iters = 400;
    double lr = 0.02;
    double rho_pose = 0.001;
    double rho_shape = 0.01;
    double person_height = 1.7;  // meters, seeds t_Z
    int min_keypoints = 4;

    friend bool operator==(const InitFitConfig&, const InitFitConfig&) = default;
};

struct SupervisedFitConfig {
    int iters = 500;
    double lr = 0.01;

    friend bool operator==(const SupervisedFitConfig&, const SupervisedFitConfig&) = default;
};

struct PipelineConfig {
    LossWeights weights;
    InitFitConfig init;
    SupervisedFitConfig supervised;
    AdamWConfig crowd;  // lr_max 1e-5, 260 steps
    int batch_size = 50;
    double threshold = 0.23;
    bool crowd_enabled = true;
    KeypNormalization keyp_norm = KeypNormalization::box_size;
    // Treat l as a constant each step instead of differentiating through it.
    bool detach_normal = false;
    // Compute l (and the crowd spread) over the current batch only.
    bool per_batch_normal = false;
    // When > 0, recompute l every N steps and hold it constant in between.
    int freeze_normal_every = 0;
    // Multiply the init shape term by L_crowd as printed in the original objective.
    bool literal_init_crowd = false;
    std::uint64_t seed = 0;

    void validate() const {
        weights.validate();
        crowd.validate();
        if (batch_size < 1) {
            throw ConfigError("batch_size must be at least 1");
        }
        if (!(threshold >= 0.0 && threshold <= 1.0)) {
            throw ConfigError("threshold must lie in [0, 1]");
        }
        if (init.iters < 0 || supervised.iters < 0 || freeze_normal_every < 0) {
            throw ConfigError("iteration counts must be non-negative");
        }
    }

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

inline SceneObservation filter_detections(const SceneObservation& scene, double threshold = 0.23) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError("filter_detections: threshold must lie in [0, 1]");
    }
    SceneObservation out;
    out.intrinsics = scene.intrinsics;
    out.plane = scene.plane;
    for (const auto& p : scene.persons) {
        if (p.score >= threshold) {
            out.persons.push_back(p);
        }
    }
    return out;
}

// Root-local geometry of a person under double parameters.
inline PersonGeometry<double> person_geometry(const SkeletonTemplate& tmpl, const PersonParams<double>& p,
                                              const BBox& box, const Intrinsics& in) {
    return evaluate_person(tmpl, p, box, in);
}

inline PersonEstimate make_estimate(const std::string& id, const PersonParams<double>& p, const BBox& box,
                                    const Intrinsics& in) {
    PersonEstimate e;
    e.id = id;
    e.params = p;
    e.params.pose = canonicalize(p.pose);
    if (p.cam.scale > 0.0 && box.size() > 0.0) {
        e.translation = translation_from_cam(p.cam, box, in);
    }
    return e;
}

// Rest pose placed by similar triangles: t_Z = f * height / d, root on the
// ray through the box center.
inline PersonParams<double> rest_pose_prior(const PersonObservation& person, const Intrinsics& in,
                                            const InitFitConfig& cfg) {
    const double d = person.box.size();
    if (!(d > 0.0)) {
        throw DomainError("person '" + person.id + "': box size must be positive");
    }
    const double tz = in.focal * cfg.person_height / d;
    const Vec3d t{person.box.offset_x(in) * tz / in.focal, person.box.offset_y(in) * tz / in.focal, tz};
    PersonParams<double> p;
    p.cam = cam_from_translation(t, person.box, in);
    return p;
}

// Stage 1: lambda1 * L_reproj + rho_pose * |theta_{1:}|^2 + rho_shape * |beta|^2.
inline PersonEstimate init_fit(const SkeletonTemplate& tmpl, const PersonObservation& person, const Intrinsics& in,
                               const PipelineConfig& cfg) {
    if (static_cast<int>(person.keypoints.size()) != tmpl.keypoint_count()) {
        throw ConfigError("person '" + person.id + "': " + std::to_string(person.keypoints.size()) +
                          " keypoints, layout '" + tmpl.roles.layout + "' expects " +
                          std::to_string(tmpl.keypoint_count()));
    }
    const PersonParams<double> start = rest_pose_prior(person, in, cfg.init);
    if (confident_keypoint_count(person) < cfg.init.min_keypoints) {
        PersonEstimate e = make_estimate(person.id, start, person.box, in);
        e.flags.low_confidence = true;
        return e;
    }

    const auto objective = [&](auto x) {
        using T = typename decltype(x)::value_type;
        const PersonParams<T> p = unpack_person(x, 0);
        const PersonGeometry<T> g = evaluate_person(tmpl, p, person.box, in);
        if (!(value_of(p.cam.scale) > 0.0)) {
            throw EvaluationError("init_fit: person '" + person.id + "' f_c became non-positive");
        }
        const T reproj = reproj_loss(std::span<const Vec3<T>>(g.keypoints), g.translation, in, person.box,
                                     std::span<const KeypointObs>(person.keypoints), cfg.keyp_norm);
        T reg = T(0.0);
        for (int j = 1; j < kJointCount; ++j) {
            reg = reg + T(cfg.init.rho_pose) * squared_norm(p.pose.rotations[static_cast<std::size_t>(j)]);
        }
        for (const auto& b : p.shape.coefficients) {
            reg = reg + T(cfg.init.rho_shape) * b * b;
        }
        return T(cfg.weights.reproj) * reproj + reg;
    };

    std::vector<double> x0(kParamsPerPerson);
    pack_person(start, x0);
    AdamWConfig opt = cfg.crowd;
    opt.lr_max = cfg.init.lr;
    opt.lr_min = 0.0;
    opt.total_steps = cfg.init.iters;
    const MinimizeResult r = minimize([&](std::span<const double> x) { return gradient(objective, x); }, x0, opt);
    if (!r.error.empty() && r.trajectory.empty()) {
        throw EvaluationError("init_fit: person '" + person.id + "': " + r.error);
    }
    for (double v : r.x) {
        if (!std::isfinite(v)) {
            throw EvaluationError("init_fit: person '" + person.id + "' diverged to non-finite parameters");
        }
    }
    PersonEstimate e = make_estimate(person.id, unpack_person(std::span<const double>(r.x), 0), person.box, in);
    e.flags.depth_masked = !r.error.empty();
    return e;
}

// Supervised objective lambda1 L_reproj + lambda2 L_smpl + lambda3 L_joint +
// lambda4 L_verts against a ground-truth bundle, from `start`.
inline PersonEstimate supervised_fit(const SkeletonTemplate& tmpl, const PersonObservation& person,
                                     const PersonParams<double>& start, const Intrinsics& in,
                                     const PipelineConfig& cfg) {
    if (!person.ground_truth) {
        throw ConfigError("supervised_fit: person '" + person.id + "' has no ground truth");
    }
    const GroundTruthBundle& gt = *person.ground_truth;
    const std::vector<KeypointObs>& target2d = gt.keypoints2d.empty() ? person.keypoints : gt.keypoints2d;

    const auto objective = [&](auto x) {
        using T = typename decltype(x)::value_type;
        const PersonParams<T> p = unpack_person(x, 0);
        const PersonGeometry<T> g = evaluate_person(tmpl, p, person.box, in);
        if (!(value_of(p.cam.scale) > 0.0)) {
            throw EvaluationError("supervised_fit: person '" + person.id + "' f_c became non-positive");
        }
        const std::vector<Vec3<T>> verts = skin_points(tmpl, g.fk);
        const T reproj = reproj_loss(std::span<const Vec3<T>>(g.keypoints), g.translation, in, person.box,
                                     std::span<const KeypointObs>(target2d), cfg.keyp_norm);
        const auto terms = supervised_param_losses(p.pose, p.shape, std::span<const Vec3<T>>(g.fk.joints),
                                                   std::span<const Vec3<T>>(verts), gt);
        return supervised_total(terms, reproj, cfg.weights);
    };

    std::vector<double> x0(kParamsPerPerson);
    pack_person(start, x0);
    AdamWConfig opt = cfg.crowd;
    opt.lr_max = cfg.supervised.lr;
    opt.lr_min = 0.0;
    opt.total_steps = cfg.supervised.iters;
    const MinimizeResult r = minimize([&](std::span<const double> x) { return gradient(objective, x); }, x0, opt);
    if (!r.error.empty() && r.trajectory.empty()) {
        throw EvaluationError("supervised_fit: person '" + person.id + "': " + r.error);
    }
    return make_estimate(person.id, unpack_person(std::span<const double>(r.x), 0), person.box, in);
}

// The crowd-stage objective for one batch of people. Parameters of people
// outside the batch are frozen at their current values but still shape the
// ground-plane normal and the root spread unless per_batch is set.
class CrowdObjective {
public:
    struct Options {
        LossWeights weights;
        KeypNormalization keyp_norm = KeypNormalization::box_size;
        bool per_batch = false;
        bool literal_init_crowd = false;
    };

    CrowdObjective(const SkeletonTemplate& tmpl, const SceneObservation& scene,
                   std::vector<PersonParams<double>> current, std::vector<PersonParams<double>> init,
                   std::vector<int> batch, std::vector<bool> eligible, Options options)
        : tmpl_(&tmpl),
          scene_(&scene),
          current_(std::move(current)),
          init_(std::move(init)),
          batch_(std::move(batch)),
          eligible_(std::move(eligible)),
          options_(options) {
        const std::size_t n = scene.persons.size();
        if (current_.size() != n || init_.size() != n || eligible_.size() != n) {
            throw ConfigError("CrowdObjective: per-person inputs do not match the scene");
        }
        in_batch_.assign(n, false);
        for (int b : batch_) {
            if (b < 0 || static_cast<std::size_t>(b) >= n) {
                throw ConfigError("CrowdObjective: batch index out of range");
            }
            in_batch_[static_cast<std::size_t>(b)] = true;
            batch_obs_.push_back(scene.persons[static_cast<std::size_t>(b)]);
            batch_obs_.back().ground_truth.reset();
        }
        for (std::size_t p = 0; p < n; ++p) {
            if (in_batch_[p] || !eligible_[p] || options_.per_batch) {
                continue;
            }
            const auto g = person_geometry(tmpl, current_[p], scene.persons[p].box, scene.intrinsics);
            fixed_marks_.push_back(plane_landmarks(tmpl, g.fk.joints));
            if (g.valid) {
                fixed_roots_.push_back(g.translation);
            }
        }
    }

    const std::vector<int>& batch() const noexcept { return batch_; }

    // Holds l constant at `normal` instead of estimating it from x.
    void set_fixed_normal(std::optional<Vec3d> normal) { fixed_normal_ = normal; }

    std::vector<double> initial_point() const {
        std::vector<double> x(batch_.size() * kParamsPerPerson);
        for (std::size_t k = 0; k < batch_.size(); ++k) {
            pack_person(current_[static_cast<std::size_t>(batch_[k])],
                        std::span<double>(x).subspan(k * kParamsPerPerson, kParamsPerPerson));
        }
        return x;
    }

    template <typename T>
    CrowdTerms<T> terms(std::span<const T> x, std::vector<bool>* masked = nullptr,
                        std::optional<Vec3d>* normal_out = nullptr) const {
        if (x.size() != batch_.size() * kParamsPerPerson) {
            throw ConfigError("CrowdObjective: parameter vector length does not match the batch");
        }
        const Intrinsics& in = scene_->intrinsics;
        std::vector<PersonParams<T>> params;
        std::vector<PersonGeometry<T>> geometry;
        std::vector<PersonParams<double>> anchors;
        params.reserve(batch_.size());
        geometry.reserve(batch_.size());
        for (std::size_t k = 0; k < batch_.size(); ++k) {
            const auto& obs = scene_->persons[static_cast<std::size_t>(batch_[k])];
            params.push_back(unpack_person(x, k));
            geometry.push_back(evaluate_person(*tmpl_, params.back(), obs.box, in,
                                               std::span<const KeypointObs>(obs.keypoints)));
            anchors.push_back(init_[static_cast<std::size_t>(batch_[k])]);
        }

        std::vector<PlaneLandmarks<T>> marks;
        std::vector<Vec3<T>> roots;
        for (const auto& m : fixed_marks_) {
            marks.push_back({Vec3<T>::from(m.top), Vec3<T>::from(m.bottom)});
        }
        for (const auto& r : fixed_roots_) {
            roots.push_back(Vec3<T>::from(r));
        }
        for (std::size_t k = 0; k < batch_.size(); ++k) {
            if (!eligible_[static_cast<std::size_t>(batch_[k])]) {
                continue;
            }
            marks.push_back(plane_landmarks(*tmpl_, geometry[k].fk.joints));
            if (geometry[k].valid) {
                roots.push_back(geometry[k].translation);
            }
        }

        CrowdTerms<T> out;
        if (!marks.empty()) {
            Vec3<T> l;
            if (fixed_normal_) {
                l = Vec3<T>::from(*fixed_normal_);
            } else {
                try {
                    l = estimate_plane_normal(std::span<const PlaneLandmarks<T>>(marks));
                } catch (const DegeneratePersonError& e) {
                    throw EvaluationError(std::string("crowd objective: ") + e.what());
                }
            }
            if (normal_out != nullptr) {
                *normal_out = value_of(l);
            }
            out.crowd = crowd_loss(std::span<const Vec3<T>>(roots), l);
        } else {
            out.crowd = T(0.0);
        }

        out.keyp = keyp_loss(std::span<const PersonGeometry<T>>(geometry),
                             std::span<const PersonObservation>(batch_obs_), in, options_.keyp_norm, masked);
        std::optional<T> factor;
        if (options_.literal_init_crowd) {
            factor = out.crowd;
        }
        out.init = init_loss(std::span<const PersonParams<T>>(params), std::span<const PersonParams<double>>(anchors),
                             options_.weights, factor);
        return out;
    }

    template <typename T>
    T operator()(std::span<const T> x) const {
        return crowd_total(terms(x), options_.weights);
    }

private:
    const SkeletonTemplate* tmpl_;
    const SceneObservation* scene_;
    std::vector<PersonParams<double>> current_;
    std::vector<PersonParams<double>> init_;
    std::vector<int> batch_;
    std::vector<bool> eligible_;
    std::vector<bool> in_batch_;
    std::vector<PersonObservation> batch_obs_;  // batch order
    Options options_;
    std::vector<PlaneLandmarks<double>> fixed_marks_;
    std::vector<Vec3d> fixed_roots_;
    std::optional<Vec3d> fixed_normal_;
};

inline std::vector<bool> crowd_eligibility(const SceneObservation& scene, std::span<const PersonEstimate> inits,
                                           int min_keypoints) {
    std::vector<bool> eligible(scene.persons.size(), false);
    for (std::size_t n = 0; n < scene.persons.size(); ++n) {
        eligible[n] = confident_keypoint_count(scene.persons[n]) >= min_keypoints && !inits[n].flags.low_confidence &&
                      !inits[n].flags.degenerate;
    }
    return eligible;
}

// Evaluates the crowd objective with every person free, at `estimates`.
inline CrowdTerms<double> crowd_terms_at(const SkeletonTemplate& tmpl, const SceneObservation& scene,
                                         std::span<const PersonEstimate> estimates,
                                         std::span<const PersonEstimate> inits, const PipelineConfig& cfg,
                                         std::optional<Vec3d>* normal_out = nullptr) {
    std::vector<PersonParams<double>> cur;
    std::vector<PersonParams<double>> ini;
    std::vector<int> all;
    for (std::size_t n = 0; n < estimates.size(); ++n) {
        cur.push_back(estimates[n].params);
        ini.push_back(inits[n].params);
        all.push_back(static_cast<int>(n));
    }
    CrowdObjective::Options opts{cfg.weights, cfg.keyp_norm, false, cfg.literal_init_crowd};
    CrowdObjective obj(tmpl, scene, cur, ini, all, crowd_eligibility(scene, inits, cfg.init.min_keypoints), opts);
    const auto x = obj.initial_point();
    return obj.terms(std::span<const double>(x), nullptr, normal_out);
}

// Stage 2. Batches of `batch_size` people, in person-id order, each run for
// the configured number of AdamW steps on the crowd objective.
inline SceneEstimate crowd_refine(const SkeletonTemplate& tmpl, const SceneObservation& scene,
                                  std::span<const PersonEstimate> inits, const PipelineConfig& cfg) {
    cfg.validate();
    const std::size_t n = scene.persons.size();
    if (inits.size() != n) {
        throw ConfigError("crowd_refine: " + std::to_string(inits.size()) + " inits for " + std::to_string(n) +
                          " persons");
    }
    SceneEstimate out;
    out.initial.assign(inits.begin(), inits.end());
    out.crowd_stage_run = true;
    if (n == 0) {
        out.warnings.push_back("crowd_refine: empty scene");
        return out;
    }

    std::vector<PersonParams<double>> current;
    std::vector<PersonParams<double>> init;
    for (const auto& e : inits) {
        current.push_back(e.params);
        init.push_back(e.params);
    }
    std::vector<bool> eligible = crowd_eligibility(scene, inits, cfg.init.min_keypoints);
    std::vector<EstimateFlags> flags;
    for (const auto& e : inits) {
        flags.push_back(e.flags);
    }
    // A person whose head and ankles coincide cannot define a direction.
    for (std::size_t p = 0; p < n; ++p) {
        if (!eligible[p]) {
            continue;
        }
        const auto g = person_geometry(tmpl, current[p], scene.persons[p].box, scene.intrinsics);
        const auto m = plane_landmarks(tmpl, g.fk.joints);
        if (!(norm(m.top - m.bottom) > 0.0)) {
            eligible[p] = false;
            flags[p].degenerate = true;
            out.warnings.push_back("person '" + scene.persons[p].id + "' has a degenerate head-to-ankle vector");
        }
    }

    std::vector<int> order(n);
    for (std::size_t p = 0; p < n; ++p) {
        order[p] = static_cast<int>(p);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return scene.persons[static_cast<std::size_t>(a)].id < scene.persons[static_cast<std::size_t>(b)].id;
    });

    const CrowdObjective::Options opts{cfg.weights, cfg.keyp_norm, cfg.per_batch_normal, cfg.literal_init_crowd};
    const bool hold_normal = cfg.detach_normal || cfg.freeze_normal_every > 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
        std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                               order.begin() + static_cast<std::ptrdiff_t>(stop));
        CrowdObjective objective(tmpl, scene, current, init, batch, eligible, opts);

        BatchLog log;
        for (int b : batch) {
            log.person_ids.push_back(scene.persons[static_cast<std::size_t>(b)].id);
        }
        int step = 0;
        std::vector<bool> masked;
        const GradientFn grad_fn = [&](std::span<const double> x) {
            if (hold_normal) {
                const int every = cfg.freeze_normal_every > 0 ? cfg.freeze_normal_every : 1;
                if (step % every == 0) {
                    objective.set_fixed_normal(std::nullopt);
                    std::optional<Vec3d> l;
                    objective.terms(x, nullptr, &l);
                    objective.set_fixed_normal(l);
                }
            }
            ++step;
            GradReport report = gradient(
                [&](auto v) {
                    using T = typename decltype(v)::value_type;
                    const CrowdTerms<T> terms = objective.terms(v, &masked);
                    return crowd_total(terms, cfg.weights);
                },
                x);
            for (std::size_t k = 0; k < batch.size(); ++k) {
                if (k < masked.size() && masked[k]) {
                    flags[static_cast<std::size_t>(batch[k])].depth_masked = true;
                }
            }
            return report;
        };
        const std::vector<double> x0 = objective.initial_point();
        const MinimizeResult r = minimize(grad_fn, x0, cfg.crowd);
        log.iterations = r.trajectory;
        log.error = r.error;
        if (!r.error.empty()) {
            out.warnings.push_back("batch starting at person '" + log.person_ids.front() + "': " + r.error);
        }
        for (std::size_t k = 0; k < batch.size(); ++k) {
            current[static_cast<std::size_t>(batch[k])] = unpack_person(std::span<const double>(r.x), k);
        }
        out.log.push_back(std::move(log));
    }

    for (std::size_t p = 0; p < n; ++p) {
        const auto& obs = scene.persons[p];
        if (!(current[p].cam.scale > 0.0)) {
            // No valid translation; fall back to the stage-1 estimate.
            current[p] = init[p];
            flags[p].depth_masked = true;
        }
        PersonEstimate e = make_estimate(obs.id, current[p], obs.box, scene.intrinsics);
        e.flags = flags[p];
        out.persons.push_back(std::move(e));
    }

    std::optional<Vec3d> normal;
    const CrowdTerms<double> terms = crowd_terms_at(tmpl, scene, out.persons, out.initial, cfg, &normal);
    out.normal = normal;
    out.loss = {terms.crowd, terms.keyp, terms.init, crowd_total(terms, cfg.weights)};
    return out;
}

// filter -> stage 1 per person -> stage 2.
inline SceneEstimate reconstruct(const SkeletonTemplate& tmpl, const SceneObservation& scene_in,
                                 const PipelineConfig& cfg) {
    cfg.validate();
    const SceneObservation filtered = filter_detections(scene_in, cfg.threshold);
    SceneObservation accepted;
    accepted.intrinsics = filtered.intrinsics;
    accepted.plane = filtered.plane;
    std::vector<PersonEstimate> inits;
    std::vector<std::string> warnings;
    for (const auto& person : filtered.persons) {
        try {
            inits.push_back(init_fit(tmpl, person, filtered.intrinsics, cfg));
            accepted.persons.push_back(person);
        } catch (const std::exception& e) {
            warnings.push_back(std::string("stage 1 failed: ") + e.what());
        }
    }

    SceneEstimate out;
    if (accepted.persons.empty()) {
        out.warnings = warnings;
        out.warnings.push_back("no persons reconstructed (" + std::to_string(filtered.persons.size()) +
                               " passed the detection threshold)");
        return out;
    }
    if (cfg.crowd_enabled) {
        out = crowd_refine(tmpl, accepted, inits, cfg);
    } else {
        out.initial = inits;
        out.persons = inits;
        std::optional<Vec3d> normal;
        const CrowdTerms<double> terms = crowd_terms_at(tmpl, accepted, out.persons, out.initial, cfg, &normal);
        out.normal = normal;
        out.loss = {terms.crowd, terms.keyp, terms.init, crowd_total(terms, cfg.weights)};
    }
    out.warnings.insert(out.warnings.begin(), warnings.begin(), warnings.end());
    return out;
}

}  // namespace crowdfit
