#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "gsurf/conditioned_laws.hpp"
#include "gsurf/density_oracles.hpp"
#include "gsurf/functionals.hpp"
#include "gsurf/surface_measure.hpp"

namespace gsurf {
namespace {

TEST(Meander, NonnegativeFromZero) {
    const TimeGrid grid(300);
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto m = sample_meander(grid, derive_tag(5, streams::kMeander, i));
        ASSERT_EQ(m.values.front(), 0.0);
        for (double v : m.values) ASSERT_GE(v, 0.0);
        ASSERT_EQ(m.driving.size(), 300u);
        EXPECT_NEAR(m.values.back(), m.values.front() + std::accumulate(m.driving.begin(), m.driving.end(), 0.0), 1e-12);
    }
}

TEST(Meander, EndpointIsRayleigh) {
    const CylindricalFunctional fs[] = {functionals::point(1.0)};
    const auto m = sampler_means(LawTag::meander, fs, TimeGrid(200), 7, 100000)[0];
    EXPECT_LT(std::abs(m.mean - std::sqrt(std::numbers::pi / 2.0)), 3.0 * m.se);
    EXPECT_NEAR(std::sqrt(std::numbers::pi / 2.0), 1.25331, 1e-5);
}

TEST(Bessel3Bridge, EndpointsAndMidpointSecondMoment) {
    const TimeGrid grid(200);
    std::vector<double> sq(100000);
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const auto p = sample_bessel3_bridge(grid, derive_tag(9, streams::kBessel, i));
        ASSERT_EQ(p.values.front(), 0.0);
        ASSERT_EQ(p.values.back(), 0.0);
        sq[i] = p.values[100] * p.values[100];
    }
    const auto m = mean_se(sq);
    EXPECT_LT(std::abs(m.mean - 0.75), 3.0 * m.se);
}

TEST(Samplers, Reproducible) {
    const TimeGrid grid(100);
    EXPECT_EQ(sample_meander(grid, 77).values, sample_meander(grid, 77).values);
    EXPECT_NE(sample_meander(grid, 77).values, sample_meander(grid, 78).values);
    const CylindricalFunctional fs[] = {functionals::one()};
    EXPECT_THROW(sampler_means(LawTag::nu_r, fs, grid, 1, 10), UnsupportedError);
    EXPECT_THROW(sampler_means(LawTag::girsanov, fs, grid, 1, 10), UnsupportedError);
}

TEST(ConditionedMean, ConstantAndAcceptance) {
    const auto bm = ProcessSpec::brownian();
    const auto e = conditioned_mean(functionals::one(), bm, -0.5, 100000, TimeGrid(500), 3);
    EXPECT_EQ(e.mean.mean, 1.0);
    EXPECT_EQ(e.attempts, 100000);
    EXPECT_GT(e.accepted, 0);
    EXPECT_LT(std::abs(e.acceptance.mean - survival(bm, -0.5)), 3.0 * e.acceptance.se);
    const auto br = conditioned_mean(functionals::one(), ProcessSpec::bridge(), -0.3, 100000, TimeGrid(500), 3);
    EXPECT_LT(std::abs(br.acceptance.mean - survival(ProcessSpec::bridge(), -0.3)), 3.0 * br.acceptance.se);
}

TEST(ConditionedMean, Errors) {
    const auto bm = ProcessSpec::brownian();
    EXPECT_THROW(conditioned_mean(functionals::one(), bm, 0.0, 100, TimeGrid(50), 1), PreconditionError);
    EXPECT_THROW(conditioned_mean(functionals::one(), bm, -0.5, 0, TimeGrid(50), 1), ParameterError);
    EXPECT_THROW(conditioned_mean(functionals::one(), bm, -0.5, 1000001, TimeGrid(50), 1), ParameterError);
    EXPECT_THROW(conditioned_mean(functionals::one(), bm, -1e-7, 1000, TimeGrid(50), 1), InfeasibleConditioningError);
}

// E[B(1) | g >= r] moves toward the meander endpoint mean as r -> 0-.
TEST(ConditionedMean, ApproachesMeanderAsLevelRises) {
    const CylindricalFunctional fs[] = {functionals::point(1.0)};
    const double rs[] = {-0.4, -0.2, -0.1, -0.05};
    const auto est = conditioned_means(fs, ProcessSpec::brownian(), rs, 400000, TimeGrid(200), 13);
    const double target = std::sqrt(std::numbers::pi / 2.0);
    for (std::size_t k = 1; k < 4; ++k)
        EXPECT_LT(std::abs(est[k][0].mean.mean - target), std::abs(est[k - 1][0].mean.mean - target)) << rs[k];
}

TEST(WeightedRatio, EqualWeightsReduceToMean) {
    const std::vector<double> y{1.0, 4.0, 2.0, 7.0, -1.0};
    const std::vector<double> w(5, 3.0);
    const auto r = weighted_ratio(w, y);
    const auto m = mean_se(y);
    EXPECT_NEAR(r.mean, m.mean, 1e-15);
    EXPECT_NEAR(r.se, m.se, 1e-15);
}

TEST(Girsanov, TiltMomentAndSelfNormalization) {
    const TimeGrid grid(100);
    const auto m = tilt_moment(1.0, 1.0, 200000, grid, 17);
    EXPECT_LT(std::abs(m.mean - 1.0), 3.0 * m.se);
    EXPECT_EQ(girsanov_reweight(functionals::one(), 1.0, 1.0, 1000, grid, 17).mean, 1.0);
    EXPECT_THROW(check_tilt(1.0, 0.0), ParameterError);
    EXPECT_THROW(check_tilt(25.0, 1.0), NumericError);
}

// Reweighted Brownian paths against direct simulation of b t + sigma B.
TEST(Girsanov, ReproducesDistortedProcess) {
    const TimeGrid grid(100);
    const double b = 1.0, sigma = 1.0;
    auto fs = functionals::standard_suite();
    fs.push_back(functionals::point(1.0));
    const ProcessSpec spec = ProcessSpec::distorted(b, sigma);
    for (const auto& phi : fs) {
        const auto rw = girsanov_reweight(phi, b, sigma, 200000, grid, 19);
        const CylindricalFunctional one[] = {phi};
        const auto direct = sample_levels(spec, grid, 23, streams::kPrimary, 200000, one);
        const auto d = mean_se(direct.phi.column(0));
        EXPECT_LT(z_score(rw, d), 3.0) << phi.name;
    }
    const auto x1 = girsanov_reweight(functionals::point(1.0), b, sigma, 200000, grid, 29);
    EXPECT_LT(std::abs(x1.mean - b), 3.0 * x1.se);
}

}  // namespace
}  // namespace gsurf
