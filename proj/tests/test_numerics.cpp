#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "halfspace/numerics.hpp"

using namespace halfspace;
using namespace halfspace::numerics;

TEST(GaussLegendre, TenPointRuleIntegratesDegree19Exactly) {
    const auto& gl = gauss_legendre_10();
    double wsum = 0.0;
    for (double w : gl.weights)
        wsum += w;
    EXPECT_NEAR(wsum, 2.0, 1e-14);
    for (int p = 0; p <= 19; ++p) {
        double acc = 0.0;
        for (std::size_t k = 0; k < gl.nodes.size(); ++k)
            acc += gl.weights[k] * std::pow(gl.nodes[k], p);
        const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
        EXPECT_NEAR(acc, exact, 1e-14) << "degree " << p;
    }
}

TEST(Integrate, SmoothIntegrands) {
    const auto r = integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi);
    EXPECT_NEAR(r.value, 2.0, 1e-12);
    const auto g = integrate([](double x) { return std::exp(-x * x / 2); }, -10.0, 10.0);
    EXPECT_NEAR(g.value, std::sqrt(2 * std::numbers::pi), 1e-12);
}

TEST(Integrate, LogarithmicSpacingOnLongRange) {
    const auto r = integrate([](double x) { return 1.0 / (x * x); }, 1.0, 1e6, {}, Spacing::logarithmic);
    EXPECT_NEAR(r.value, 1.0 - 1e-6, 1e-12);
}

TEST(Integrate, VectorValued) {
    const auto r = integrate([](double x) { return std::array<double, 2>{std::cos(x), x}; }, 0.0, 1.0);
    EXPECT_NEAR(r.value[0], std::sin(1.0), 1e-13);
    EXPECT_NEAR(r.value[1], 0.5, 1e-13);
}

TEST(Integrate, NonConvergenceIsExplicit) {
    PanelRule rule;
    rule.max_panels = 8;
    EXPECT_THROW(integrate([](double x) { return std::sin(1.0 / (x + 1e-9)); }, 0.0, 1.0, rule), NumericalFailure);
}

TEST(Integrate, NonFiniteIntegrandThrows) {
    EXPECT_THROW(integrate([](double) { return std::numeric_limits<double>::quiet_NaN(); }, 0.0, 1.0), NumericalFailure);
}

TEST(FindRoot, Brent) {
    EXPECT_NEAR(find_root([](double x) { return x * x - 2.0; }, 0.0, 2.0, 1e-14), std::sqrt(2.0), 1e-13);
    EXPECT_NEAR(find_root([](double x) { return std::cos(x) - x; }, 0.0, 1.0, 1e-14), 0.7390851332151607, 1e-13);
    EXPECT_THROW(find_root([](double x) { return x * x + 1.0; }, -1.0, 1.0), NumericalFailure);
}

TEST(BracketUpper, ExpandsUntilSignChange) {
    const double hi = bracket_upper([](double x) { return 100.0 - x; }, 0.0, 1.0);
    EXPECT_GE(hi, 100.0);
    EXPECT_LT(hi, 200.0);
}
