#pragma once

// Scalar reverse-mode automatic differentiation.
//
// A Var is a value plus an index into the thread's active Tape. Arithmetic
// between Vars records one node per operation (at most two parents), and
// Tape::adjoints() sweeps the nodes backwards. Vars with index -1 are
// constants and never touch the tape, so templated model code can be
// instantiated with either double or Var.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace crowdfit::ad {

class Tape {
public:
    struct Node {
        std::int32_t lhs;
        std::int32_t rhs;
        double d_lhs;
        double d_rhs;
    };

    std::int32_t push(std::int32_t lhs, double d_lhs, std::int32_t rhs, double d_rhs) {
        nodes_.push_back(Node{lhs, rhs, d_lhs, d_rhs});
        return static_cast<std::int32_t>(nodes_.size() - 1);
    }

    std::int32_t leaf() { return push(-1, 0.0, -1, 0.0); }

    std::size_t size() const noexcept { return nodes_.size(); }
    void clear() noexcept { nodes_.clear(); }
    void reserve(std::size_t n) { nodes_.reserve(n); }

    // d(output)/d(node) for every node on the tape.
    std::vector<double> adjoints(std::int32_t output) const {
        std::vector<double> adj(nodes_.size(), 0.0);
        if (output < 0) {
            return adj;
        }
        adj[static_cast<std::size_t>(output)] = 1.0;
        for (std::int32_t i = output; i >= 0; --i) {
            const double a = adj[static_cast<std::size_t>(i)];
            if (a == 0.0) {
                continue;
            }
            const Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.lhs >= 0) {
                adj[static_cast<std::size_t>(n.lhs)] += a * n.d_lhs;
            }
            if (n.rhs >= 0) {
                adj[static_cast<std::size_t>(n.rhs)] += a * n.d_rhs;
            }
        }
        return adj;
    }

private:
    std::vector<Node> nodes_;
};

namespace detail {
inline thread_local Tape* active_tape = nullptr;
}

inline Tape& active_tape() {
    if (detail::active_tape == nullptr) {
        throw std::logic_error("ad: no active tape on this thread");
    }
    return *detail::active_tape;
}

// Installs a tape as the thread's recording target for its lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape) : previous_(detail::active_tape) {
        detail::active_tape = &tape;
    }
    ~TapeScope() { detail::active_tape = previous_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

class Var {
public:
    Var() = default;
    Var(double value) : value_(value) {}  // NOLINT: implicit constant lift

    static Var variable(double value) { return Var(value, active_tape().leaf()); }

    double value() const noexcept { return value_; }
    std::int32_t index() const noexcept { return index_; }
    bool is_constant() const noexcept { return index_ < 0; }

    Var& operator+=(const Var& o) { return *this = *this + o; }
    Var& operator-=(const Var& o) { return *this = *this - o; }
    Var& operator*=(const Var& o) { return *this = *this * o; }
    Var& operator/=(const Var& o) { return *this = *this / o; }

    // Result of an op with local partials w.r.t. one or two operands.
    static Var unary(double value, const Var& a, double da) {
        if (a.is_constant()) {
            return Var(value);
        }
        return Var(value, active_tape().push(a.index_, da, -1, 0.0));
    }
    static Var binary(double value, const Var& a, double da, const Var& b, double db) {
        if (a.is_constant() && b.is_constant()) {
            return Var(value);
        }
        if (a.is_constant()) {
            return unary(value, b, db);
        }
        if (b.is_constant()) {
            return unary(value, a, da);
        }
        return Var(value, active_tape().push(a.index_, da, b.index_, db));
    }

    friend Var operator+(const Var& a, const Var& b) {
        return binary(a.value_ + b.value_, a, 1.0, b, 1.0);
    }
    friend Var operator-(const Var& a, const Var& b) {
        return binary(a.value_ - b.value_, a, 1.0, b, -1.0);
    }
    friend Var operator*(const Var& a, const Var& b) {
        return binary(a.value_ * b.value_, a, b.value_, b, a.value_);
    }
    friend Var operator/(const Var& a, const Var& b) {
        const double inv = 1.0 / b.value_;
        return binary(a.value_ * inv, a, inv, b, -a.value_ * inv * inv);
    }
    friend Var operator-(const Var& a) { return unary(-a.value_, a, -1.0); }
    friend Var operator+(const Var& a) { return a; }

private:
    Var(double value, std::int32_t index) : value_(value), index_(index) {}

    double value_ = 0.0;
    std::int32_t index_ = -1;
};

inline Var sqrt(const Var& a) {
    const double s = std::sqrt(a.value());
    return Var::unary(s, a, 0.5 / s);
}
inline Var sin(const Var& a) { return Var::unary(std::sin(a.value()), a, std::cos(a.value())); }
inline Var cos(const Var& a) { return Var::unary(std::cos(a.value()), a, -std::sin(a.value())); }
inline Var exp(const Var& a) {
    const double e = std::exp(a.value());
    return Var::unary(e, a, e);
}
inline Var log(const Var& a) { return Var::unary(std::log(a.value()), a, 1.0 / a.value()); }
inline Var abs(const Var& a) {
    return Var::unary(std::abs(a.value()), a, a.value() < 0.0 ? -1.0 : 1.0);
}

inline double value_of(double x) noexcept { return x; }
inline double value_of(const Var& x) noexcept { return x.value(); }

}  // namespace crowdfit::ad

namespace crowdfit {
using ad::value_of;
}
