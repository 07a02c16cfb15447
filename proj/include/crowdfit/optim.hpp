#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "crowdfit/diff.hpp"
#include "crowdfit/errors.hpp"

namespace crowdfit {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    double lr_max = 1e-5;
    double lr_min = 0.0;
    int total_steps = 260;

    void validate() const {
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw ConfigError("adamw: betas must lie in [0, 1)");
        }
        if (!(epsilon > 0.0)) {
            throw ConfigError("adamw: epsilon must be positive");
        }
        if (total_steps < 0) {
            throw ConfigError("adamw: total_steps must be non-negative");
        }
        if (!(lr_max >= 0.0) || !(lr_min >= 0.0) || !(weight_decay >= 0.0)) {
            throw ConfigError("adamw: learning rates and weight decay must be non-negative");
        }
    }

    friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;

    explicit AdamWState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One decoupled-weight-decay Adam update. A non-finite gradient leaves both
// params and state untouched and throws.
inline void adamw_step(AdamWState& state, std::span<double> params, std::span<const double> grad, double lr,
                       const AdamWConfig& cfg) {
    if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ConfigError("adamw_step: parameter, gradient and state lengths differ");
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            throw EvaluationError("adamw_step: non-finite gradient at index " + std::to_string(i) +
                                  "; step refused");
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) + cfg.weight_decay * params[i]);
    }
}

// Half-cosine decay from lr_max at t = 0 to lr_min at t = T; clamps past T.
inline double cosine_lr(const AdamWConfig& cfg, int t) {
    if (t < 0) {
        throw ConfigError("cosine_lr: step must be non-negative");
    }
    if (t >= cfg.total_steps) {
        return cfg.lr_min;
    }
    const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(cfg.total_steps);
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(phase));
}

struct MinimizeResult {
    std::vector<double> x;
    std::vector<double> best_x;
    double best_objective = 0.0;
    // One record per evaluated iterate: steps 0..T, the last carrying lr 0.
    std::vector<IterationRecord> trajectory;
    // Set when an evaluation failed; x then holds the best iterate so far.
    std::string error;
};

using GradientFn = std::function<GradReport(std::span<const double>)>;
using StepCallback = std::function<void(int step, double lr, double objective)>;

// T steps of gradient -> AdamW with the cosine schedule.
inline MinimizeResult minimize(const GradientFn& grad_fn, std::span<const double> x0, const AdamWConfig& cfg,
                               const StepCallback& callback = {}) {
    cfg.validate();
    MinimizeResult result;
    result.x.assign(x0.begin(), x0.end());
    result.best_x = result.x;
    AdamWState state(result.x.size());
    bool have_best = false;
    for (int t = 0; t <= cfg.total_steps; ++t) {
        GradReport g;
        try {
            g = grad_fn(result.x);
        } catch (const std::exception& e) {
            result.error = e.what();
            result.x = result.best_x;
            return result;
        }
        const double lr = t < cfg.total_steps ? cosine_lr(cfg, t) : 0.0;
        result.trajectory.push_back({t, lr, g.value});
        if (callback) {
            callback(t, lr, g.value);
        }
        if (!have_best || g.value < result.best_objective) {
            result.best_objective = g.value;
            result.best_x = result.x;
            have_best = true;
        }
        if (t == cfg.total_steps) {
            break;
        }
        try {
            adamw_step(state, result.x, g.gradient, lr, cfg);
        } catch (const std::exception& e) {
            result.error = e.what();
            result.x = result.best_x;
            return result;
        }
    }
    return result;
}

}  // namespace crowdfit
