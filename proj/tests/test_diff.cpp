#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "crowdfit/diff.hpp"
#include "loss_objectives.hpp"
#include "test_support.hpp"

using namespace crowdfit;
using namespace testing_support;

TEST(Gradient, Quadratic) {
    const std::vector<double> x = {3.0, -1.0};
    const auto g = gradient([](auto v) {
        using T = typename decltype(v)::value_type;
        T s = T(0.0);
        for (const auto& e : v) {
            s = s + e * e;
        }
        return s;
    }, std::span<const double>(x));
    EXPECT_DOUBLE_EQ(g.gradient[0], 6.0);
    EXPECT_DOUBLE_EQ(g.gradient[1], -2.0);
    EXPECT_DOUBLE_EQ(g.value, 10.0);
    EXPECT_DOUBLE_EQ(g.max_abs, 6.0);
    EXPECT_EQ(g.evaluations, 1);
}

TEST(Gradient, ConstantObjectiveHasZeroGradient) {
    const std::vector<double> x = {1.0, 2.0, 3.0};
    const auto g = gradient([](auto) { return ad::Var(4.0); }, std::span<const double>(x));
    for (double d : g.gradient) {
        EXPECT_EQ(d, 0.0);
    }
    EXPECT_DOUBLE_EQ(g.value, 4.0);
}

TEST(Gradient, NonFiniteNamesPersonAndSlot) {
    std::vector<double> x(2 * kParamsPerPerson, 1.0);
    const std::size_t bad = kParamsPerPerson + kCamOffset;
    x[bad] = 0.0;
    try {
        gradient([&](auto v) { return sqrt(v[bad]) + v[0]; }, std::span<const double>(x));
        FAIL() << "expected an evaluation error";
    } catch (const EvaluationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("person 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("slot 82"), std::string::npos) << msg;
    }
    const std::vector<double> y = {std::numeric_limits<double>::infinity()};
    EXPECT_THROW(gradient([](auto v) { return v[0] * 2.0; }, std::span<const double>(y)), EvaluationError);
}

TEST(Gradient, DoesNotMutateInput) {
    const auto f = loss_fixture();
    const auto x = random_point(f, 5);
    const auto copy = x;
    gradient([&](auto v) { return loss_detail::evaluate<ad::Var>(f, "crowd_total", v); }, std::span<const double>(x));
    EXPECT_EQ(x, copy);
}

TEST(Gradient, Linearity) {
    const auto f = loss_fixture();
    const auto x = random_point(f, 6);
    const auto obj = [&](const std::string& name) {
        return [&f, name](auto v) { return loss_detail::evaluate<ad::Var>(f, name, v); };
    };
    const auto gk = gradient(obj("keyp"), std::span<const double>(x));
    const auto gi = gradient(obj("init"), std::span<const double>(x));
    const auto gs = gradient([&](auto v) {
        return 2.5 * loss_detail::evaluate<ad::Var>(f, "keyp", v) - 0.75 * loss_detail::evaluate<ad::Var>(f, "init", v);
    }, std::span<const double>(x));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double expect = 2.5 * gk.gradient[i] - 0.75 * gi.gradient[i];
        EXPECT_NEAR(gs.gradient[i], expect, 1e-9 * std::max(1.0, std::abs(expect)));
    }
}

TEST(ParamVector, PackUnpackRoundTrip) {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<PersonParams<double>> people(static_cast<std::size_t>(1 + trial % 5));
        for (auto& p : people) {
            p.pose = random_pose(rng, 1.0);
            p.shape = random_shape(rng, 1.0);
            p.cam = {std::abs(g(rng)) + 0.1, g(rng), g(rng)};
        }
        const auto x = pack(std::span<const PersonParams<double>>(people));
        ASSERT_EQ(x.size(), people.size() * 85);
        EXPECT_EQ(x[kCamOffset], people[0].cam.scale);
        EXPECT_EQ(x[kShapeOffset + 3], people[0].shape.coefficients[3]);
        EXPECT_EQ(x[5], people[0].pose.rotations[1].z);
        EXPECT_TRUE(unpack(x) == people);
    }
    EXPECT_THROW(unpack(std::vector<double>(84)), ConfigError);
}

TEST(CheckGradient, QuadraticIsExactToRoundoff) {
    const std::vector<double> x = {0.3, -2.0, 5.0, 11.0};
    const auto c = check_gradient([](auto v) {
        using T = typename decltype(v)::value_type;
        T s = T(0.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
            s = s + T(static_cast<double>(i + 1)) * v[i] * v[i];
        }
        return s;
    }, std::span<const double>(x), 0.25);
    // Central differences are exact on quadratics for any step.
    EXPECT_LT(c.max_relative_error, 1e-9);
    EXPECT_THROW(check_gradient([](auto v) { return v[0]; }, std::span<const double>(x), 0.0), ConfigError);
}

TEST(CheckGradient, ReprojOnOnePerson) {
    const auto f = loss_fixture();
    const auto x = random_point(f, 7);
    const std::vector<double> first(x.begin(), x.begin() + kParamsPerPerson);
    const auto& obs = f.scene.persons[0];
    const auto c = check_gradient([&](auto v) {
        using T = typename decltype(v)::value_type;
        const auto g = evaluate_person(f.tmpl, unpack_person(v, 0), obs.box, f.scene.intrinsics);
        return reproj_loss(std::span<const Vec3<T>>(g.keypoints), g.translation, f.scene.intrinsics, obs.box,
                           std::span<const KeypointObs>(obs.keypoints));
    }, std::span<const double>(first));
    EXPECT_LT(c.max_relative_error, 1e-4) << "worst index " << c.worst_index;
}

TEST(CheckGradient, CrowdLossThroughTheEstimatedNormal) {
    const auto f = loss_fixture();
    const auto x = random_point(f, 8);
    const auto c = check_loss(f, "crowd", x);
    EXPECT_LT(c.max_relative_error, 1e-4) << "worst index " << c.worst_index;
}

class EveryLoss : public ::testing::TestWithParam<std::string> {};

TEST_P(EveryLoss, MatchesCentralDifferences) {
    const auto f = loss_fixture();
    for (std::uint64_t seed = 100; seed < 103; ++seed) {
        const auto x = random_point(f, seed);
        const auto c = check_loss(f, GetParam(), x);
        EXPECT_LT(c.max_relative_error, 1e-4)
            << "seed " << seed << " index " << c.worst_index << " analytic " << c.analytic << " numeric "
            << c.numeric;
    }
}

INSTANTIATE_TEST_SUITE_P(Losses, EveryLoss, ::testing::ValuesIn(loss_names()),
                         [](const auto& info) { return info.param; });
