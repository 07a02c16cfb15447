#include <gtest/gtest.h>

#include <cmath>

#include "crowdfit/ad.hpp"

using crowdfit::ad::Tape;
using crowdfit::ad::TapeScope;
using crowdfit::ad::Var;

namespace {

// d f / d x at x0 for a unary expression, via the tape.
template <typename F>
double derivative(F f, double x0) {
    Tape tape;
    TapeScope scope(tape);
    const Var x = Var::variable(x0);
    const Var y = f(x);
    return tape.adjoints(y.index())[static_cast<std::size_t>(x.index())];
}

}  // namespace

TEST(Ad, ElementaryDerivativesMatchCalculus) {
    const double x = 0.7;
    EXPECT_NEAR(derivative([](Var v) { return v * v * v; }, x), 3 * x * x, 1e-15);
    EXPECT_NEAR(derivative([](Var v) { return sqrt(v); }, x), 0.5 / std::sqrt(x), 1e-15);
    EXPECT_NEAR(derivative([](Var v) { return sin(v); }, x), std::cos(x), 1e-15);
    EXPECT_NEAR(derivative([](Var v) { return cos(v); }, x), -std::sin(x), 1e-15);
    EXPECT_NEAR(derivative([](Var v) { return exp(v); }, x), std::exp(x), 1e-15);
    EXPECT_NEAR(derivative([](Var v) { return log(v); }, x), 1.0 / x, 1e-15);
    EXPECT_NEAR(derivative([](Var v) { return abs(-v); }, x), 1.0, 1e-15);
    EXPECT_NEAR(derivative([](Var v) { return 1.0 / v; }, x), -1.0 / (x * x), 1e-14);
    EXPECT_NEAR(derivative([](Var v) { return -v + 2.0 - v; }, x), -2.0, 1e-15);
}

TEST(Ad, ProductRuleWithTwoVariables) {
    Tape tape;
    TapeScope scope(tape);
    const Var a = Var::variable(2.0);
    const Var b = Var::variable(5.0);
    const Var y = a * b + a / b;
    const auto adj = tape.adjoints(y.index());
    EXPECT_DOUBLE_EQ(adj[static_cast<std::size_t>(a.index())], 5.0 + 1.0 / 5.0);
    EXPECT_DOUBLE_EQ(adj[static_cast<std::size_t>(b.index())], 2.0 - 2.0 / 25.0);
}

TEST(Ad, ConstantsStayOffTheTape) {
    Tape tape;
    TapeScope scope(tape);
    const Var c = Var(3.0) * Var(4.0) + 1.0;
    EXPECT_TRUE(c.is_constant());
    EXPECT_EQ(tape.size(), 0u);
    EXPECT_DOUBLE_EQ(c.value(), 13.0);
}

TEST(Ad, VariableWithoutTapeThrows) { EXPECT_THROW(Var::variable(1.0), std::logic_error); }

TEST(Ad, NestedScopesRestoreThePreviousTape) {
    Tape outer;
    TapeScope a(outer);
    {
        Tape inner;
        TapeScope b(inner);
        Var::variable(1.0);
        EXPECT_EQ(inner.size(), 1u);
    }
    Var::variable(1.0);
    EXPECT_EQ(outer.size(), 1u);
}
