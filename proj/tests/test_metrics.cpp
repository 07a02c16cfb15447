#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

#include "crowdfit/metrics.hpp"
#include "crowdfit/synth.hpp"
#include "test_support.hpp"

using namespace crowdfit;
using namespace testing_support;

namespace {

std::vector<KeypointObs> visible(const std::vector<Vec2<double>>& pts) {
    std::vector<KeypointObs> out;
    for (const auto& p : pts) {
        out.push_back({p.u, p.v, 1.0});
    }
    return out;
}

std::vector<Vec3d> random_cloud(std::mt19937_64& rng, int n) {
    std::vector<Vec3d> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(random_vec(rng, -0.8, 0.8));
    }
    return out;
}

Vec3d apply(const Eigen::Matrix3d& r, double s, const Vec3d& t, const Vec3d& p) {
    const Eigen::Vector3d q = s * (r * Eigen::Vector3d(p.x, p.y, p.z));
    return Vec3d{q.x(), q.y(), q.z()} + t;
}

}  // namespace

TEST(Oks, PerfectPredictionIsOne) {
    const std::vector<Vec2<double>> pred = {{10, 20}, {30, 40}, {55, 5}};
    const auto gt = visible(pred);
    const std::vector<double> k(3, 0.1);
    EXPECT_DOUBLE_EQ(*oks(pred, gt, 100.0, k), 1.0);
}

TEST(Oks, FarPredictionIsZero) {
    const std::vector<Vec2<double>> pred = {{1e6, 1e6}};
    const std::vector<KeypointObs> gt = {{0, 0, 1}};
    const std::vector<double> k = {0.1};
    EXPECT_LT(*oks(pred, gt, 100.0, k), 1e-300);
}

TEST(Oks, ExactExponent) {
    // d^2 = 2 s^2 k^2 gives exp(-1).
    const double area = 400.0;
    const double k = 0.07;
    const double d = std::sqrt(2.0 * area * k * k);
    const std::vector<Vec2<double>> pred = {{d * 0.6, d * 0.8}};
    const std::vector<KeypointObs> gt = {{0, 0, 1}};
    const std::vector<double> ks = {k};
    EXPECT_NEAR(*oks(pred, gt, area, ks), std::exp(-1.0), 1e-14);
}

TEST(Oks, InvisibleKeypointsIgnored) {
    const std::vector<Vec2<double>> pred = {{0, 0}, {500, 500}};
    const std::vector<KeypointObs> gt = {{0, 0, 1}, {0, 0, 0}};
    const std::vector<double> k = {0.1, 0.1};
    EXPECT_DOUBLE_EQ(*oks(pred, gt, 100.0, k), 1.0);
    const std::vector<KeypointObs> none = {{0, 0, 0}, {0, 0, 0}};
    EXPECT_FALSE(oks(pred, none, 100.0, k).has_value());
    EXPECT_THROW(oks(pred, gt, 0.0, k), DomainError);
    EXPECT_THROW(oks(pred, gt, 1.0, std::vector<double>{0.1}), ConfigError);
}

TEST(Oks, TranslationInvariant) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 20.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Vec2<double>> pred;
        std::vector<KeypointObs> gt;
        for (int i = 0; i < 17; ++i) {
            const double u = g(rng) + 500, v = g(rng) + 400;
            gt.push_back({u, v, 1.0});
            pred.push_back({u + g(rng) * 0.2, v + g(rng) * 0.2});
        }
        const auto k = oks_constants("coco17", 17);
        const double base = *oks(pred, gt, 5000.0, k);
        const double du = g(rng) * 10, dv = g(rng) * 10;
        for (auto& p : pred) {
            p.u += du;
            p.v += dv;
        }
        for (auto& q : gt) {
            q.u += du;
            q.v += dv;
        }
        EXPECT_NEAR(*oks(pred, gt, 5000.0, k), base, 1e-12);
    }
}

TEST(Oks, Constants) {
    EXPECT_EQ(oks_constants("coco17", 17).size(), 17U);
    EXPECT_DOUBLE_EQ(oks_constants("coco17", 17)[0], 0.052);
    EXPECT_DOUBLE_EQ(oks_constants("custom", 5)[4], kUniformOksConstant);
}

TEST(Mpjpe, IdenticalIsZeroAndUnitsAreMillimeters) {
    const std::vector<Vec3d> a = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    EXPECT_EQ(mpjpe(a, a), 0.0);
    EXPECT_LT(pa_mpjpe(a, a).mm, 1e-9);
    auto b = a;
    for (auto& p : b) {
        p.z += 0.01;
    }
    EXPECT_NEAR(mpjpe(b, a), 10.0, 1e-12);
    EXPECT_NEAR(pa_mpjpe(b, a).mm, 0.0, 1e-9);
    EXPECT_THROW(mpjpe({}, {}), ConfigError);
    EXPECT_THROW(pa_mpjpe(a, std::vector<Vec3d>(2)), ConfigError);
}

TEST(PaMpjpe, RemovesRotation) {
    std::mt19937_64 rng(5);
    const auto gt = random_cloud(rng, 24);
    const Eigen::Matrix3d r = Eigen::AngleAxisd(30.0 * EIGEN_PI / 180.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
    std::vector<Vec3d> pred;
    for (const auto& p : gt) {
        pred.push_back(apply(r, 1.0, {0, 0, 0}, p));
    }
    EXPECT_GT(mpjpe(pred, gt), 10.0);
    EXPECT_LT(pa_mpjpe(pred, gt).mm, 1e-9);
}

TEST(PaMpjpe, RemovesRandomSimilarity) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const auto gt = random_cloud(rng, 24);
        const Vec3d axis = random_unit(rng);
        const Eigen::Matrix3d r =
            Eigen::AngleAxisd(std::uniform_real_distribution<double>(-3.0, 3.0)(rng),
                              Eigen::Vector3d(axis.x, axis.y, axis.z))
                .toRotationMatrix();
        const double s = scale(rng);
        const Vec3d t = random_vec(rng, -5, 5);
        std::vector<Vec3d> pred;
        for (const auto& p : gt) {
            pred.push_back(apply(r, s, t, p));
        }
        const auto aligned = pa_mpjpe(pred, gt);
        EXPECT_FALSE(aligned.translation_only);
        EXPECT_LT(aligned.mm, 1e-9) << trial;
    }
}

TEST(PaMpjpe, NeverExceedsMpjpe) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 0.05);
    for (int trial = 0; trial < 100; ++trial) {
        const auto gt = random_cloud(rng, 24);
        std::vector<Vec3d> pred;
        for (const auto& p : gt) {
            pred.push_back(p + Vec3d{g(rng), g(rng), g(rng)});
        }
        // Small slack: the similarity minimizes squared, not mean, error.
        EXPECT_LE(pa_mpjpe(pred, gt).mm, mpjpe(pred, gt) * 1.05 + 1e-9) << trial;
    }
}

TEST(PaMpjpe, DegenerateFallsBackToTranslation) {
    const std::vector<Vec3d> pred(5, Vec3d{1, 2, 3});
    const std::vector<Vec3d> gt = {{0, 0, 0}, {0.1, 0, 0}, {0, 0.1, 0}, {0, 0, 0.1}, {0.1, 0.1, 0.1}};
    const auto r = pa_mpjpe(pred, gt);
    EXPECT_TRUE(r.translation_only);
    EXPECT_TRUE(std::isfinite(r.mm));
    const std::vector<Vec3d> two = {{0, 0, 0}, {1, 0, 0}};
    EXPECT_TRUE(pa_mpjpe(two, two).translation_only);
    EXPECT_EQ(pa_mpjpe(two, two).mm, 0.0);
}

TEST(PlaneReport, NoiselessCrowd) {
    const auto tmpl = reference_template();
    const auto scene = generate_scene(tmpl, crowd_spec(25, 0.0, 0.0, 21));
    const auto gt = ground_truth_estimates(scene);
    const auto r = plane_report(tmpl, gt, scene.plane);
    EXPECT_LT(r.residual_std, 1e-9);
    EXPECT_NEAR(*r.angle_error_deg, 0.0, 1e-6);
    EXPECT_NEAR(norm(r.unit_normal), 1.0, 1e-12);
}

TEST(PlaneReport, InvariantToInPlaneMotion) {
    const auto tmpl = reference_template();
    const auto scene = generate_scene(tmpl, crowd_spec(25, 0.05, 0.3, 22));
    const auto gt = ground_truth_estimates(scene);
    const auto base = plane_report(tmpl, gt, scene.plane);
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        auto moved = gt;
        const Vec3d dir = random_unit(rng);
        const Vec3d in_plane = dir - base.unit_normal * dot(dir, base.unit_normal);
        for (auto& e : moved) {
            e.translation = e.translation + in_plane * std::uniform_real_distribution<double>(-3, 3)(rng);
        }
        const auto r = plane_report(tmpl, moved, scene.plane);
        EXPECT_NEAR(r.residual_std, base.residual_std, 1e-9);
        EXPECT_NEAR(*r.angle_error_deg, *base.angle_error_deg, 1e-9);
    }
}

TEST(Evaluate, GroundTruthScoresPerfectly) {
    const auto tmpl = reference_template();
    const auto scene = generate_scene(tmpl, crowd_spec(10, 0.05, 0.3, 23, 8.0, 2.0));
    const auto gt = ground_truth_estimates(scene);
    const auto r = evaluate(tmpl, scene, gt);
    EXPECT_NEAR(*r.mean_oks, 1.0, 1e-9);
    EXPECT_NEAR(*r.mpjpe_mm, 0.0, 1e-6);
    EXPECT_NEAR(*r.pa_mpjpe_mm, 0.0, 1e-6);
    EXPECT_NEAR(r.depth_error->max_abs, 0.0, 1e-9);
    EXPECT_EQ(r.ids.size(), 10U);

    auto stray = gt;
    stray[0].id = "nobody";
    EXPECT_THROW(evaluate(tmpl, scene, stray), ConfigError);
}
