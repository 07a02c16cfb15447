#pragma once

// Every loss of the library as a function of a full-scene ParamVector, for
// finite-difference checks.

#include <functional>
#include <string>
#include <vector>

#include "crowdfit/diff.hpp"
#include "crowdfit/losses.hpp"
#include "crowdfit/pipeline.hpp"
#include "crowdfit/synth.hpp"

namespace testing_support {

using namespace crowdfit;

struct LossFixture {
    SkeletonTemplate tmpl = reference_template();
    SceneObservation scene;
    std::vector<PersonParams<double>> anchors;
    PipelineConfig cfg;
};

inline LossFixture loss_fixture(std::uint64_t seed = 31) {
    LossFixture f;
    SceneSpec spec;
    spec.plane = camera_ground_plane(0.4, 5.0);
    spec.intrinsics = Intrinsics::uncalibrated(3000, 2000);
    spec.count = 3;
    spec.sigma_pose = 0.1;
    spec.sigma_shape = 0.5;
    spec.sigma_kp = 1.5;
    spec.extent = 5.0;
    spec.seed = seed;
    f.scene = generate_scene(f.tmpl, spec);
    for (const auto& e : ground_truth_estimates(f.scene)) {
        f.anchors.push_back(e.params);
    }
    return f;
}

// A random point near the ground truth: pose, shape and depth jitter.
inline std::vector<double> random_point(const LossFixture& f, std::uint64_t seed) {
    const auto gt = ground_truth_estimates(f.scene);
    const auto est = perturb_estimates(gt, f.scene, PerturbSpec{0.4, 0.15, 0.4, seed});
    std::vector<PersonParams<double>> p;
    for (const auto& e : est) {
        p.push_back(e.params);
    }
    return pack(std::span<const PersonParams<double>>(p));
}

struct NamedLoss {
    std::string name;
    // Generic over double and ad::Var through the two instantiations below.
    std::function<double(std::span<const double>)> value;
    std::function<ad::Var(std::span<const ad::Var>)> traced;
};

namespace loss_detail {

template <typename T>
std::vector<PersonGeometry<T>> geometry(const LossFixture& f, std::span<const T> x) {
    std::vector<PersonGeometry<T>> g;
    for (std::size_t n = 0; n < f.scene.persons.size(); ++n) {
        const auto& obs = f.scene.persons[n];
        g.push_back(evaluate_person(f.tmpl, unpack_person(x, n), obs.box, f.scene.intrinsics));
    }
    return g;
}

template <typename T>
SupervisedTerms<T> supervised(const LossFixture& f, std::span<const T> x, std::size_t n, const PersonGeometry<T>& g) {
    const auto p = unpack_person(x, n);
    const auto verts = skin_points(f.tmpl, g.fk);
    return supervised_param_losses(p.pose, p.shape, std::span<const Vec3<T>>(g.fk.joints),
                                   std::span<const Vec3<T>>(verts), *f.scene.persons[n].ground_truth);
}

template <typename T>
T reproj(const LossFixture& f, const PersonGeometry<T>& g, std::size_t n) {
    const auto& obs = f.scene.persons[n];
    return reproj_loss(std::span<const Vec3<T>>(g.keypoints), g.translation, f.scene.intrinsics, obs.box,
                       std::span<const KeypointObs>(obs.keypoints));
}

template <typename T>
T evaluate(const LossFixture& f, const std::string& name, std::span<const T> x) {
    const auto g = geometry(f, x);
    const std::size_t n_people = g.size();
    if (name == "crowd") {
        std::vector<PlaneLandmarks<T>> marks;
        std::vector<Vec3<T>> roots;
        for (const auto& pg : g) {
            std::array<Vec3<T>, kJointCount> world{};
            for (std::size_t j = 0; j < world.size(); ++j) {
                world[j] = pg.fk.joints[j] + pg.translation;
            }
            marks.push_back(plane_landmarks(f.tmpl, world));
            roots.push_back(pg.translation);
        }
        const Vec3<T> l = estimate_plane_normal(std::span<const PlaneLandmarks<T>>(marks));
        return crowd_loss(std::span<const Vec3<T>>(roots), l);
    }
    if (name == "keyp") {
        return keyp_loss(std::span<const PersonGeometry<T>>(g), std::span<const PersonObservation>(f.scene.persons),
                         f.scene.intrinsics);
    }
    if (name == "init") {
        std::vector<PersonParams<T>> p;
        for (std::size_t n = 0; n < n_people; ++n) {
            p.push_back(unpack_person(x, n));
        }
        return init_loss(std::span<const PersonParams<T>>(p), std::span<const PersonParams<double>>(f.anchors),
                         f.cfg.weights);
    }
    if (name == "crowd_total") {
        std::vector<int> all;
        for (std::size_t n = 0; n < n_people; ++n) {
            all.push_back(static_cast<int>(n));
        }
        const CrowdObjective obj(f.tmpl, f.scene, f.anchors, f.anchors, all, std::vector<bool>(n_people, true),
                                 {f.cfg.weights, f.cfg.keyp_norm, false, false});
        return obj(x);
    }
    T total = T(0.0);
    for (std::size_t n = 0; n < n_people; ++n) {
        if (name == "reproj") {
            total = total + reproj(f, g[n], n);
            continue;
        }
        const auto terms = supervised(f, x, n, g[n]);
        if (name == "smpl") {
            total = total + terms.smpl;
        } else if (name == "joint") {
            total = total + terms.joint;
        } else if (name == "verts") {
            total = total + terms.verts;
        } else {
            total = total + supervised_total(terms, reproj(f, g[n], n), f.cfg.weights);
        }
    }
    return total;
}

}  // namespace loss_detail

inline std::vector<std::string> loss_names() {
    return {"supervised_total", "reproj", "smpl", "joint", "verts", "crowd", "keyp", "init", "crowd_total"};
}

// Worst relative error between reverse-mode and central differences for one
// loss at one point.
inline GradientCheck check_loss(const LossFixture& f, const std::string& name, std::span<const double> x) {
    return check_gradient([&](auto v) {
        using T = typename decltype(v)::value_type;
        return loss_detail::evaluate<T>(f, name, v);
    }, x);
}

}  // namespace testing_support
