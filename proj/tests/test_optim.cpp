#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "crowdfit/optim.hpp"

using namespace crowdfit;

namespace {

GradReport quadratic(std::span<const double> x) {
    GradReport g;
    g.gradient.assign(x.begin(), x.end());
    for (double v : x) {
        g.value += 0.5 * v * v;
    }
    return g;
}

}  // namespace

TEST(AdamW, ZeroGradientLeavesParamsUnchanged) {
    AdamWConfig cfg;
    AdamWState s(3);
    std::vector<double> x = {1.0, -2.0, 3.0};
    const std::vector<double> g(3, 0.0);
    for (int i = 0; i < 5; ++i) {
        adamw_step(s, x, g, 0.1, cfg);
    }
    EXPECT_EQ(x, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(AdamW, FirstStepIsSignedLearningRate) {
    AdamWConfig cfg;
    AdamWState s(2);
    std::vector<double> x = {0.0, 0.0};
    const std::vector<double> g = {3.0, -0.02};
    adamw_step(s, x, g, 0.1, cfg);
    // m_hat = g and v_hat = g^2 after bias correction.
    EXPECT_NEAR(x[0], -0.1 * 3.0 / (3.0 + 1e-8), 1e-12);
    EXPECT_NEAR(x[1], 0.1 * 0.02 / (0.02 + 1e-8), 1e-12);
    std::vector<double> y = {0.0};
    AdamWState s1(1);
    adamw_step(s1, y, std::vector<double>{1.0}, 0.1, cfg);
    EXPECT_NEAR(y[0], -0.1 / (1.0 + 1e-8), 1e-12);
}

TEST(AdamW, DecoupledWeightDecay) {
    AdamWConfig cfg;
    cfg.weight_decay = 0.1;
    AdamWState s(1);
    std::vector<double> x = {1.0};
    adamw_step(s, x, std::vector<double>{0.0}, 0.1, cfg);
    EXPECT_NEAR(x[0], 0.99, 1e-15);
}

TEST(AdamW, StepIsBoundedByLearningRate) {
    AdamWConfig cfg;
    AdamWState s(4);
    std::vector<double> x = {0.0, 0.0, 0.0, 0.0};
    const double lr = 1e-3;
    for (int t = 0; t < 200; ++t) {
        const double k = static_cast<double>(t);
        const std::vector<double> g = {std::sin(k) * 1e6, 1e-9 * (t % 3 - 1), 50.0 * std::cos(3 * k), 1.0};
        const auto before = x;
        adamw_step(s, x, g, lr, cfg);
        for (std::size_t i = 0; i < x.size(); ++i) {
            EXPECT_LE(std::abs(x[i] - before[i]), 10.0 * lr) << "step " << t << " index " << i;
        }
    }
}

TEST(AdamW, RefusesNonFiniteGradientWithoutMutation) {
    AdamWConfig cfg;
    AdamWState s(2);
    std::vector<double> x = {1.0, 2.0};
    adamw_step(s, x, std::vector<double>{0.5, 0.5}, 0.1, cfg);
    const auto x_before = x;
    const auto m_before = s.m;
    const auto v_before = s.v;
    const long step_before = s.step;
    for (double bad : {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity()}) {
        EXPECT_THROW(adamw_step(s, x, std::vector<double>{0.1, bad}, 0.1, cfg), EvaluationError);
        EXPECT_EQ(x, x_before);
        EXPECT_EQ(s.m, m_before);
        EXPECT_EQ(s.v, v_before);
        EXPECT_EQ(s.step, step_before);
    }
    EXPECT_THROW(adamw_step(s, x, std::vector<double>{0.1}, 0.1, cfg), ConfigError);
}

TEST(Cosine, EndpointsAndMidpoint) {
    AdamWConfig cfg;
    cfg.lr_max = 1e-5;
    cfg.lr_min = 0.0;
    cfg.total_steps = 260;
    EXPECT_DOUBLE_EQ(cosine_lr(cfg, 0), 1e-5);
    EXPECT_NEAR(cosine_lr(cfg, 130), 5e-6, 1e-18);
    EXPECT_DOUBLE_EQ(cosine_lr(cfg, 260), 0.0);
    EXPECT_DOUBLE_EQ(cosine_lr(cfg, 1000), 0.0);
    cfg.lr_min = 1e-6;
    EXPECT_NEAR(cosine_lr(cfg, 130), 5.5e-6, 1e-18);
    EXPECT_THROW(cosine_lr(cfg, -1), ConfigError);
}

TEST(Cosine, MonotoneNonIncreasing) {
    AdamWConfig cfg;
    cfg.lr_max = 0.3;
    cfg.lr_min = 0.01;
    cfg.total_steps = 97;
    double prev = cosine_lr(cfg, 0);
    for (int t = 1; t <= cfg.total_steps; ++t) {
        const double lr = cosine_lr(cfg, t);
        EXPECT_LE(lr, prev) << t;
        EXPECT_GE(lr, cfg.lr_min);
        prev = lr;
    }
    // Oracle: the half-cosine written out.
    for (int t = 0; t < cfg.total_steps; ++t) {
        const double expect = 0.01 + 0.5 * 0.29 * (1.0 + std::cos(std::numbers::pi * t / 97.0));
        EXPECT_NEAR(cosine_lr(cfg, t), expect, 1e-15);
    }
}

TEST(Minimize, ConvergesOnQuadratic) {
    AdamWConfig cfg;
    cfg.lr_max = 0.5;
    cfg.total_steps = 260;
    const std::vector<double> x0 = {10.0, 10.0};
    const auto r = minimize(quadratic, x0, cfg);
    EXPECT_TRUE(r.error.empty());
    EXPECT_LT(std::hypot(r.x[0], r.x[1]), 1e-3);
    ASSERT_EQ(r.trajectory.size(), 261U);
    EXPECT_EQ(r.trajectory.front().step, 0);
    EXPECT_DOUBLE_EQ(r.trajectory.front().objective, 100.0);
    EXPECT_DOUBLE_EQ(r.trajectory.back().lr, 0.0);
    EXPECT_LE(r.trajectory.back().objective, r.trajectory.front().objective);
}

TEST(Minimize, ZeroStepsReturnsStart) {
    AdamWConfig cfg;
    cfg.total_steps = 0;
    const std::vector<double> x0 = {1.5, -7.0};
    const auto r = minimize(quadratic, x0, cfg);
    EXPECT_EQ(r.x, x0);
    ASSERT_EQ(r.trajectory.size(), 1U);
}

TEST(Minimize, EvaluationErrorReturnsBestIterate) {
    AdamWConfig cfg;
    cfg.lr_max = 0.5;
    cfg.total_steps = 50;
    int calls = 0;
    const auto r = minimize([&](std::span<const double> x) {
        if (++calls == 6) {
            throw EvaluationError("bad region");
        }
        return quadratic(x);
    }, std::vector<double>{4.0}, cfg);
    EXPECT_EQ(r.error, "bad region");
    EXPECT_EQ(r.trajectory.size(), 5U);
    EXPECT_EQ(r.x, r.best_x);
    double best = r.trajectory.front().objective;
    for (const auto& rec : r.trajectory) {
        best = std::min(best, rec.objective);
    }
    EXPECT_DOUBLE_EQ(r.best_objective, best);
    EXPECT_DOUBLE_EQ(0.5 * r.x[0] * r.x[0], best);
}

TEST(Minimize, Deterministic) {
    AdamWConfig cfg;
    cfg.lr_max = 0.05;
    cfg.total_steps = 120;
    const std::vector<double> x0 = {0.3, -1.2, 4.4};
    const auto a = minimize(quadratic, x0, cfg);
    const auto b = minimize(quadratic, x0, cfg);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.trajectory, b.trajectory);
}

TEST(Minimize, CallbackSeesEveryStep) {
    AdamWConfig cfg;
    cfg.lr_max = 0.1;
    cfg.total_steps = 10;
    std::vector<int> steps;
    minimize(quadratic, std::vector<double>{1.0}, cfg, [&](int t, double, double) { steps.push_back(t); });
    ASSERT_EQ(steps.size(), 11U);
    EXPECT_EQ(steps.back(), 10);
}

TEST(AdamWConfig, Validation) {
    AdamWConfig cfg;
    cfg.beta1 = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.epsilon = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.total_steps = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.lr_max = -1e-3;
    EXPECT_THROW(cfg.validate(), ConfigError);
}
