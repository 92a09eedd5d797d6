#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "gsurf/density_oracles.hpp"
#include "gsurf/quadrature.hpp"
#include "gsurf/special.hpp"

namespace gsurf {
namespace {

using std::numbers::pi;

// 50-digit mpmath references.
TEST(Erfc, MatchesArbitraryPrecisionReference) {
    const std::pair<double, double> ref[] = {
        {-3.0, 1.9999779095030014146},
        {-2.0, 1.9953222650189527342},
        {-1.5, 1.9661051464753107271},
        {-1.0, 1.8427007929497148693},
        {-0.7071067811865476, 1.6826894921370859303},
        {-0.5, 1.5204998778130465377},
        {-0.25, 1.276326390168236933},
        {-0.1, 1.1124629160182848984},
        {-0.01, 1.0112834155558496172},
        {0.0, 1.0},
        {0.01, 0.98871658444415038285},
        {0.1, 0.8875370839817151016},
        {0.25, 0.72367360983176306701},
        {0.5, 0.47950012218695346232},
        {0.7071067811865476, 0.31731050786291406975},
        {1.0, 0.15729920705028513066},
        {1.5, 0.033894853524689272933},
        {2.0, 0.0046777349810472658379},
        {3.0, 0.000022090496998585441373},
        {5.0, 1.5374597944280348502e-12},
    };
    for (const auto& [x, v] : ref) EXPECT_NEAR(erfc(x) / v, 1.0, 1e-14) << x;
}

TEST(MinDensity, ValuesAtZero) {
    EXPECT_NEAR(min_density(ProcessSpec::brownian(), 0.0), 0.7978845608, 1e-10);
    EXPECT_EQ(min_density(ProcessSpec::bridge(), 0.0), 0.0);
    EXPECT_NEAR(min_density(ProcessSpec::ou(1.0), 0.0), 0.446413, 1e-6);
    EXPECT_NEAR(min_density(ProcessSpec::ou(1.0), 0.0), 2.0 / std::sqrt(pi) / std::sqrt(std::exp(2.0) - 1.0), 1e-15);
}

TEST(MinDensity, Errors) {
    EXPECT_THROW(min_density(ProcessSpec::brownian(), 0.1), DomainError);
    EXPECT_THROW(min_density(ProcessSpec::geometric(0.0, 1.0), -1.0), UnsupportedError);
    EXPECT_THROW(survival(ProcessSpec::geometric(0.0, 1.0), -1.0), UnsupportedError);
    EXPECT_THROW(min_joint_density(ProcessSpec::brownian(), -1.0, 0.0), DomainError);
    EXPECT_THROW(min_joint_density(ProcessSpec::brownian(), -1.0, 1.0), DomainError);
    EXPECT_THROW(min_joint_density(ProcessSpec::brownian(), 1.0, 0.5), DomainError);
    EXPECT_THROW(min_joint_density(ProcessSpec::ou(1.0), -1.0, 0.5), UnsupportedError);
    EXPECT_THROW(limit_constants(ProcessSpec::brownian()), UnsupportedError);
}

TEST(MinDensity, NormalizedOverNegativeHalfLine) {
    for (const auto& p : {ProcessSpec::brownian(), ProcessSpec::bridge(), ProcessSpec::distorted(1.0, 1.0),
                          ProcessSpec::distorted(0.5, 2.0), ProcessSpec::ou(0.5), ProcessSpec::ou(1.0),
                          ProcessSpec::ou(2.0)}) {
        const double lo = 1.5 * density_floor(p);
        const double mass = integrate([&](double r) { return min_density(p, r); }, lo, 0.0).value;
        EXPECT_NEAR(mass, 1.0, 1e-6) << p.name();
        for (int k = 0; k <= 40; ++k) EXPECT_GE(min_density(p, lo * k / 40.0), 0.0);
    }
}

TEST(JointDensity, BrownianExample) {
    EXPECT_NEAR(min_joint_density(ProcessSpec::brownian(), -1.0, 0.5), std::exp(-1.0) / (pi * 0.25), 1e-15);
    EXPECT_NEAR(min_joint_density(ProcessSpec::brownian(), -1.0, 0.5), 0.468399, 1e-6);
}

// The s-integrand is singular like s^{-3/2} e^{-r^2/2s}; the substitution
// s = (1 - cos th)/2 keeps both endpoints smooth.
double marginal(const ProcessSpec& p, double r) {
    return integrate(
               [&](double th) {
                   const double s = 0.5 * (1.0 - std::cos(th));
                   if (s <= 0.0 || s >= 1.0) return 0.0;
                   return min_joint_density(p, r, s) * 0.5 * std::sin(th);
               },
               0.0, pi)
        .value;
}

TEST(JointDensity, MarginalizesToMinDensity) {
    for (double r : {-0.5, -1.0, -2.0}) EXPECT_NEAR(marginal(ProcessSpec::brownian(), r), min_density(ProcessSpec::brownian(), r), 1e-8);
    for (const auto& p : {ProcessSpec::bridge(), ProcessSpec::distorted(1.0, 1.0), ProcessSpec::distorted(0.5, 2.0)})
        for (double r : {-0.1, -0.7, -1.5}) EXPECT_NEAR(marginal(p, r), min_density(p, r), 1e-6) << p.name() << " " << r;
}

TEST(JointDensity, BrownianArgminMarginalIsArcsine) {
    const double s = 0.5;
    const double v = integrate([&](double r) { return min_joint_density(ProcessSpec::brownian(), r, s); }, -40.0, 0.0).value;
    EXPECT_NEAR(v, 1.0 / (pi * std::sqrt(s * (1 - s))), 1e-8);
    EXPECT_NEAR(v, 0.636620, 1e-6);
}

TEST(Survival, TotalMassAndLimits) {
    const auto bm = ProcessSpec::brownian();
    EXPECT_NEAR(survival(bm, -50.0), 1.0, 1e-9);
    EXPECT_EQ(survival(bm, 0.0), 0.0);
    EXPECT_NEAR(survival(bm, -1.0) + min_cdf(bm, -1.0), 1.0, 1e-12);
    EXPECT_NEAR(survival(bm, -1e-4) / 1e-4, 2.0 / std::sqrt(2.0 * pi), 1e-6);
    EXPECT_NEAR(survival(ProcessSpec::bridge(), -1e-4) / 1e-8, 2.0, 1e-6);
    // closed form 2 Phi(|r|) - 1 for Brownian motion, used only as a check
    for (double r : {-0.3, -1.0, -2.5}) EXPECT_NEAR(survival(bm, r), 2.0 * normal_cdf(-r) - 1.0, 1e-12);
}

TEST(LimitConstants, UnitDriftAndVolatility) {
    const auto lc = limit_constants(ProcessSpec::distorted(1.0, 1.0));
    EXPECT_NEAR(erfc(1.0 / std::numbers::sqrt2), 0.317311, 1e-6);
    EXPECT_NEAR(lc.C, -2.166630, 1e-6);
}

TEST(LimitConstants, SurvivalSlopeAtZero) {
    for (const auto& p : {ProcessSpec::distorted(1.0, 1.0), ProcessSpec::distorted(0.5, 2.0)}) {
        const double r = -1e-6;
        EXPECT_NEAR(survival(p, r) / r, limit_constants(p).C, 1e-5) << p.name();
    }
}

TEST(LimitConstants, TiltedArgminWeightIsRatioLimit) {
    for (const auto& p : {ProcessSpec::distorted(1.0, 1.0), ProcessSpec::distorted(0.5, 2.0)}) {
        const auto lc = limit_constants(p);
        const double r = -1e-4;
        EXPECT_NEAR(min_joint_density(p, r, 0.5) / survival(p, r), lc.tilde_pi(0.5), 1e-4) << p.name();
        for (int k = 1; k < 50; ++k) EXPECT_GT(lc.tilde_pi(k / 50.0), 0.0);
    }
    EXPECT_THROW(limit_constants(ProcessSpec::distorted(1.0, 1.0)).tilde_pi(0.0), DomainError);
}

TEST(Quadrature, ChebyshevRuleIntegratesPolynomials) {
    const auto rule = chebyshev_rule(33);
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        const double s = rule.nodes[k], w = rule.weights[k];
        EXPECT_GT(s, 0.0);
        EXPECT_LT(s, 1.0);
        m0 += w;
        m1 += w * s;
        m2 += w * s * s;
    }
    EXPECT_NEAR(m0, 1.0, 1e-3);
    EXPECT_NEAR(m1, 0.5, 1e-3);
    EXPECT_NEAR(m2, 1.0 / 3.0, 1e-3);
    EXPECT_THROW(chebyshev_rule(0), ParameterError);
}

TEST(Quadrature, ShortIntervalsConverge) {
    const auto v = integrate([](double x) { return std::exp(x); }, 0.0, 1e-5);
    EXPECT_NEAR(v.value, std::expm1(1e-5), 1e-18);
    EXPECT_THROW(integrate([](double) { return 1.0; }, 0.0, INFINITY), ParameterError);
}

}  // namespace
}  // namespace gsurf
