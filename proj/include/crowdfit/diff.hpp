#pragma once

// Exact gradients of scene objectives over the flattened per-person
// parameters, plus a central-difference checker.
//
// Objectives are generic callables usable as both
//   double  f(std::span<const double>)
//   ad::Var f(std::span<const ad::Var>)
// so the same templated model code is differentiated and finite-differenced.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdfit/ad.hpp"
#include "crowdfit/errors.hpp"
#include "crowdfit/scene.hpp"

namespace crowdfit {

// Per-person layout: [theta (72), beta (10), f_c, t_x, t_y].
inline constexpr int kParamsPerPerson = kPoseDim + kShapeCount + 3;
inline constexpr int kPoseOffset = 0;
inline constexpr int kShapeOffset = kPoseDim;
inline constexpr int kCamOffset = kPoseDim + kShapeCount;

template <typename T>
PersonParams<T> unpack_person(std::span<const T> x, std::size_t person) {
    const std::size_t base = person * kParamsPerPerson;
    if (x.size() < base + kParamsPerPerson) {
        throw ConfigError("unpack_person: parameter vector too short for person " + std::to_string(person));
    }
    PersonParams<T> p;
    for (int j = 0; j < kJointCount; ++j) {
        const std::size_t o = base + kPoseOffset + static_cast<std::size_t>(3 * j);
        p.pose.rotations[static_cast<std::size_t>(j)] = {x[o], x[o + 1], x[o + 2]};
    }
    for (int s = 0; s < kShapeCount; ++s) {
        p.shape.coefficients[static_cast<std::size_t>(s)] = x[base + kShapeOffset + static_cast<std::size_t>(s)];
    }
    p.cam = {x[base + kCamOffset], x[base + kCamOffset + 1], x[base + kCamOffset + 2]};
    return p;
}

inline void pack_person(const PersonParams<double>& p, std::span<double> out) {
    if (out.size() < static_cast<std::size_t>(kParamsPerPerson)) {
        throw ConfigError("pack_person: output span too short");
    }
    for (int j = 0; j < kJointCount; ++j) {
        const auto& r = p.pose.rotations[static_cast<std::size_t>(j)];
        const auto o = static_cast<std::size_t>(kPoseOffset + 3 * j);
        out[o] = r.x;
        out[o + 1] = r.y;
        out[o + 2] = r.z;
    }
    for (int s = 0; s < kShapeCount; ++s) {
        out[static_cast<std::size_t>(kShapeOffset + s)] = p.shape.coefficients[static_cast<std::size_t>(s)];
    }
    out[kCamOffset] = p.cam.scale;
    out[kCamOffset + 1] = p.cam.tx;
    out[kCamOffset + 2] = p.cam.ty;
}

inline std::vector<double> pack(std::span<const PersonParams<double>> persons) {
    std::vector<double> x(persons.size() * kParamsPerPerson);
    for (std::size_t n = 0; n < persons.size(); ++n) {
        pack_person(persons[n], std::span<double>(x).subspan(n * kParamsPerPerson, kParamsPerPerson));
    }
    return x;
}

inline std::vector<PersonParams<double>> unpack(std::span<const double> x) {
    if (x.size() % kParamsPerPerson != 0) {
        throw ConfigError("unpack: length " + std::to_string(x.size()) + " is not a multiple of " +
                          std::to_string(kParamsPerPerson));
    }
    std::vector<PersonParams<double>> out;
    for (std::size_t n = 0; n < x.size() / kParamsPerPerson; ++n) {
        out.push_back(unpack_person(x, n));
    }
    return out;
}

struct GradReport {
    std::vector<double> gradient;
    double value = 0.0;
    double max_abs = 0.0;
    int evaluations = 0;
};

template <typename Objective>
GradReport gradient(Objective&& objective, std::span<const double> x) {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    std::vector<ad::Var> vars;
    vars.reserve(x.size());
    for (double v : x) {
        vars.push_back(ad::Var::variable(v));
    }
    const ad::Var out = objective(std::span<const ad::Var>(vars));

    GradReport report;
    report.value = out.value();
    report.evaluations = 1;
    if (!std::isfinite(report.value)) {
        throw EvaluationError("gradient: objective is non-finite");
    }
    report.gradient.assign(x.size(), 0.0);
    if (!out.is_constant()) {
        const auto adj = tape.adjoints(out.index());
        for (std::size_t i = 0; i < x.size(); ++i) {
            report.gradient[i] = adj[static_cast<std::size_t>(vars[i].index())];
        }
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double g = report.gradient[i];
        if (!std::isfinite(g)) {
            throw EvaluationError("gradient: non-finite derivative at parameter " + std::to_string(i) +
                                  " (person " + std::to_string(i / kParamsPerPerson) + ", slot " +
                                  std::to_string(i % kParamsPerPerson) + ")");
        }
        report.max_abs = std::max(report.max_abs, std::abs(g));
    }
    return report;
}

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central differences against the reverse-mode gradient. Without an explicit
// step, coordinate i uses h_i = 1e-5 * max(1, |x_i|). The relative error of a
// component is taken against max(|analytic|, |numeric|, 1e-6 * max_j |g_j|, 1e-8)
// so components at difference-noise level do not dominate.
template <typename Objective>
GradientCheck check_gradient(Objective&& objective, std::span<const double> x, std::optional<double> step = std::nullopt) {
    if (step && !(*step > 0.0)) {
        throw ConfigError("check_gradient: step must be positive");
    }
    const GradReport g = gradient(objective, x);
    std::vector<double> probe(x.begin(), x.end());
    GradientCheck check;
    const double floor = std::max(1e-8, 1e-6 * g.max_abs);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = step ? *step : 1e-5 * std::max(1.0, std::abs(x[i]));
        probe[i] = x[i] + h;
        const double fp = objective(std::span<const double>(probe));
        probe[i] = x[i] - h;
        const double fm = objective(std::span<const double>(probe));
        probe[i] = x[i];
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = g.gradient[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
        if (i == 0 || rel > check.max_relative_error) {
            check.max_relative_error = rel;
            check.worst_index = i;
            check.analytic = a;
            check.numeric = numeric;
        }
    }
    return check;
}

}  // namespace crowdfit
