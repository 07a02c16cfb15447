#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "crowdfit/io.hpp"
#include "crowdfit/metrics.hpp"
#include "crowdfit/synth.hpp"
#include "test_support.hpp"

using namespace crowdfit;
using namespace testing_support;

namespace {

const SkeletonTemplate& tmpl() {
    static const SkeletonTemplate t = reference_template();
    return t;
}

}  // namespace

TEST(Synth, SameSeedSameBytes) {
    const auto spec = crowd_spec(12, 0.05, 0.3, 99, 8.0, 1.5);
    const auto a = generate_scene(tmpl(), spec);
    const auto b = generate_scene(tmpl(), spec);
    EXPECT_EQ(dump(scene_to_json(a)), dump(scene_to_json(b)));
    auto other = spec;
    other.seed = 100;
    EXPECT_NE(dump(scene_to_json(generate_scene(tmpl(), other))), dump(scene_to_json(a)));
}

TEST(Synth, NoiselessKeypointsEqualProjection) {
    const auto scene = generate_scene(tmpl(), crowd_spec(10, 0.1, 0.5, 4));
    for (const auto& p : scene.persons) {
        const auto& gt = *p.ground_truth;
        const auto fk = forward_kinematics(tmpl(), gt.pose, gt.shape);
        const auto kps = layout_keypoints(tmpl(), fk);
        ASSERT_EQ(kps.size(), p.keypoints.size());
        for (std::size_t k = 0; k < kps.size(); ++k) {
            // Pinhole oracle written out.
            const Vec3d c = kps[k] + gt.translation;
            const double u = scene.intrinsics.focal * c.x / c.z + scene.intrinsics.cx;
            const double v = scene.intrinsics.focal * c.y / c.z + scene.intrinsics.cy;
            EXPECT_NEAR(p.keypoints[k].u, u, 1e-9);
            EXPECT_NEAR(p.keypoints[k].v, v, 1e-9);
            EXPECT_EQ(p.keypoints[k], gt.keypoints2d[k]);
        }
    }
}

TEST(Synth, AnklesOnThePlane) {
    const auto spec = crowd_spec(30, 0.1, 0.5, 5, 10.0);
    const auto scene = generate_scene(tmpl(), spec);
    for (const auto& p : scene.persons) {
        const auto& j = p.ground_truth->joints;
        const Vec3d mid = (j[7] + j[8]) * 0.5;
        EXPECT_NEAR(dot(spec.plane.normal, mid), spec.plane.offset, 1e-9) << p.id;
    }
}

TEST(Synth, NoiselessCrowdHasFlatRoots) {
    const auto scene = generate_scene(tmpl(), crowd_spec(40, 0.0, 0.0, 6, 10.0));
    const auto gt = ground_truth_estimates(scene);
    const auto report = plane_report(tmpl(), gt, scene.plane);
    EXPECT_LT(report.residual_std, 1e-9);
    EXPECT_LT(*report.angle_error_deg, 1e-6);
}

TEST(Synth, AddingAPersonKeepsEarlierDraws) {
    const auto five = generate_scene(tmpl(), crowd_spec(5, 0.05, 0.3, 8, 8.0, 2.0));
    const auto six = generate_scene(tmpl(), crowd_spec(6, 0.05, 0.3, 8, 8.0, 2.0));
    ASSERT_EQ(six.persons.size(), 6U);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(five.persons[i], six.persons[i]) << i;
    }
}

TEST(Synth, PeopleInsideImageAndInFront) {
    const auto scene = generate_scene(tmpl(), acceptance_spec());
    ASSERT_EQ(scene.persons.size(), 50U);
    for (const auto& p : scene.persons) {
        for (const auto& k : p.keypoints) {
            EXPECT_GE(k.u, 0.0);
            EXPECT_LT(k.u, scene.intrinsics.width);
            EXPECT_GE(k.v, 0.0);
            EXPECT_LT(k.v, scene.intrinsics.height);
        }
        for (const auto& v : p.ground_truth->vertices) {
            EXPECT_GT(v.z, 0.5);
        }
        EXPECT_GE(p.score, 0.5);
        EXPECT_LE(p.score, 1.0);
    }
}

TEST(Synth, GroundTruthEstimatesReproduceTranslation) {
    const auto scene = generate_scene(tmpl(), crowd_spec(8, 0.05, 0.3, 9));
    const auto gt = ground_truth_estimates(scene);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        EXPECT_LT(max_abs_diff(gt[i].translation, scene.persons[i].ground_truth->translation), 1e-9);
    }
}

TEST(Perturb, ZeroNoiseIsIdentity) {
    const auto scene = generate_scene(tmpl(), crowd_spec(8, 0.05, 0.3, 10));
    const auto gt = ground_truth_estimates(scene);
    const auto same = perturb_estimates(gt, scene, PerturbSpec{0.0, 0.0, 0.0, 3});
    ASSERT_EQ(same.size(), gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) {
        EXPECT_EQ(same[i].params, gt[i].params);
        EXPECT_LT(max_abs_diff(same[i].translation, gt[i].translation), 1e-12);
        EXPECT_FALSE(same[i].flags.depth_clamped);
    }
}

TEST(Perturb, DepthSpreadMatchesSigma) {
    const auto scene = generate_scene(tmpl(), acceptance_spec());
    const auto gt = ground_truth_estimates(scene);
    const auto noisy = perturb_estimates(gt, scene, PerturbSpec{0.5, 0.0, 0.0, 11});
    double mean = 0.0;
    std::vector<double> dz;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        dz.push_back(noisy[i].translation.z - gt[i].translation.z);
        mean += dz.back();
        // Only the crop scale moves.
        EXPECT_EQ(noisy[i].params.cam.tx, gt[i].params.cam.tx);
        EXPECT_EQ(noisy[i].params.cam.ty, gt[i].params.cam.ty);
        EXPECT_EQ(noisy[i].params.pose, gt[i].params.pose);
    }
    mean /= static_cast<double>(dz.size());
    double var = 0.0;
    for (double d : dz) {
        var += (d - mean) * (d - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(dz.size()));
    EXPECT_GE(sd, 0.35);
    EXPECT_LE(sd, 0.65);

    const auto report = evaluate(tmpl(), scene, noisy);
    EXPECT_GE(*report.mean_oks, 0.5);
}

TEST(Perturb, ClampsDepthAndFlags) {
    const auto scene = generate_scene(tmpl(), crowd_spec(20, 0.05, 0.3, 12));
    const auto gt = ground_truth_estimates(scene);
    const auto noisy = perturb_estimates(gt, scene, PerturbSpec{100.0, 0.0, 0.0, 2});
    int clamped = 0;
    for (const auto& e : noisy) {
        if (e.flags.depth_clamped) {
            ++clamped;
            EXPECT_NEAR(e.translation.z, kMinPerturbedDepth, 1e-12);
        } else {
            EXPECT_GT(e.translation.z, kMinPerturbedDepth);
        }
        EXPECT_GT(e.params.cam.scale, 0.0);
    }
    EXPECT_GT(clamped, 0);
}

TEST(Perturb, Deterministic) {
    const auto scene = generate_scene(tmpl(), crowd_spec(8, 0.05, 0.3, 13));
    const auto gt = ground_truth_estimates(scene);
    const PerturbSpec p{0.3, 0.1, 0.2, 77};
    EXPECT_EQ(perturb_estimates(gt, scene, p), perturb_estimates(gt, scene, p));
}

TEST(Synth, InvalidSpecsRejected) {
    auto s = crowd_spec(5, 0.0, 0.0, 1);
    s.count = 0;
    EXPECT_THROW(generate_scene(tmpl(), s), ConfigError);
    s = crowd_spec(5, -0.1, 0.0, 1);
    EXPECT_THROW(generate_scene(tmpl(), s), ConfigError);
    s = crowd_spec(5, 0.0, 0.0, 1);
    s.plane.normal = {0.0, 2.0, 0.0};
    EXPECT_THROW(generate_scene(tmpl(), s), ConfigError);
    s = crowd_spec(5, 0.0, 0.0, 1);
    s.extent = 0.0;
    EXPECT_THROW(generate_scene(tmpl(), s), ConfigError);
    // Camera looking away from the ground.
    s = crowd_spec(5, 0.0, 0.0, 1);
    s.plane = {{0.0, 1.0, 0.0}, 3.0};
    EXPECT_THROW(generate_scene(tmpl(), s), ConfigError);
    // A crowd that cannot fit in the frame.
    s = crowd_spec(5, 0.0, 0.0, 1, 400.0);
    EXPECT_THROW(generate_scene(tmpl(), s), ConfigError);
    EXPECT_THROW(perturb_estimates({}, generate_scene(tmpl(), crowd_spec(2, 0, 0, 1)), PerturbSpec{}), ConfigError);
    EXPECT_THROW((PerturbSpec{-1.0, 0.0, 0.0, 0}.validate()), ConfigError);
}

TEST(Synth, PlaneFromPitchAndHeight) {
    const double pitch = 25.0 * std::numbers::pi / 180.0;
    const Plane p = camera_ground_plane(pitch, 6.0);
    EXPECT_NEAR(norm(p.normal), 1.0, 1e-15);
    // The camera center sits 6 m above the ground: signed distance from origin.
    EXPECT_NEAR(dot(p.normal, Vec3d{0, 0, 0}) - p.offset, 6.0, 1e-12);
    // Straight down (+y) hits the ground at 6 / cos(pitch) along y.
    const double y = p.offset / p.normal.y;
    EXPECT_NEAR(y, 6.0 / std::cos(pitch), 1e-12);
}
