#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gsurf/path_engine.hpp"
#include "gsurf/rng.hpp"
#include "gsurf/special.hpp"
#include "gsurf/stats.hpp"

namespace gsurf {
namespace {

PathSample from_values(std::vector<double> v) {
    PathSample p;
    p.grid = TimeGrid(static_cast<int>(v.size()) - 1);
    p.values = std::move(v);
    p.driving.assign(p.grid.steps(), 0.0);
    return p;
}

TEST(TimeGrid, RejectsTooFewSteps) {
    EXPECT_THROW(TimeGrid(1), GridError);
    EXPECT_NO_THROW(TimeGrid(2));
    const TimeGrid g(4);
    EXPECT_EQ(g.t(0), 0.0);
    EXPECT_EQ(g.t(4), 1.0);
}

TEST(ProcessSpec, RejectsInvalidParameters) {
    EXPECT_THROW(ProcessSpec::distorted(1.0, 0.0), ParameterError);
    EXPECT_THROW(ProcessSpec::geometric(1.0, -1.0), ParameterError);
    EXPECT_THROW(ProcessSpec::ou(0.0), ParameterError);
    EXPECT_THROW(parse_process_kind("levy"), ParameterError);
}

TEST(BuildValues, ZeroNoiseBrownianIsZero) {
    std::vector<double> drv(10, 0.0), v(11);
    build_values(ProcessSpec::brownian(), drv, v);
    for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(BuildValues, ZeroNoiseDistortedIsPureDrift) {
    const int n = 10;
    std::vector<double> drv(n, 0.0);
    auto p = from_values(std::vector<double>(n + 1));
    build_values(ProcessSpec::distorted(1.0, 1.0), drv, p.values);
    for (int i = 0; i <= n; ++i) EXPECT_NEAR(p.values[i], p.grid.t(i), 1e-15);
    const auto rec = extremum(ProcessSpec::distorted(1.0, 1.0), p, ExtremumKind::max, false);
    EXPECT_NEAR(rec.value, 1.0, 1e-15);
    EXPECT_EQ(rec.tau, 1.0);
}

TEST(Simulate, StartValuesAndEndpoints) {
    const TimeGrid grid(500);
    for (std::uint64_t i = 0; i < 50; ++i) {
        const auto tag = derive_tag(3, 1, i);
        EXPECT_EQ(simulate(ProcessSpec::brownian(), grid, tag).values[0], 0.0);
        const auto br = simulate(ProcessSpec::bridge(), grid, tag);
        EXPECT_EQ(br.values.front(), 0.0);
        EXPECT_EQ(br.values.back(), 0.0);
        const auto geo = simulate(ProcessSpec::geometric(0.3, 1.5), grid, tag);
        EXPECT_EQ(geo.values[0], 1.0);
        for (double v : geo.values) ASSERT_GT(v, 0.0);
        EXPECT_EQ(simulate(ProcessSpec::ou(1.0), grid, tag).values[0], 0.0);
    }
}

TEST(Simulate, BitReproducible) {
    const TimeGrid grid(2000);
    const auto a = simulate(ProcessSpec::distorted(0.5, 2.0), grid, derive_tag(11, 1, 42));
    const auto b = simulate(ProcessSpec::distorted(0.5, 2.0), grid, derive_tag(11, 1, 42));
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.driving, b.driving);
}

TEST(Simulate, DrivingIncrementsHaveGridVariance) {
    const TimeGrid grid(2000);
    const auto p = simulate(ProcessSpec::brownian(), grid, derive_tag(5, 1, 0));
    std::vector<double> sq;
    for (double d : p.driving) sq.push_back(d * d * grid.steps());
    const auto m = mean_se(sq);
    EXPECT_LT(std::abs(m.mean - 1.0), 4.0 * m.se);
}

// Variance of X(1) for OU started at 0 is (1 - e^{-2a})/(2a); at a = 1 this
// is 0.432332. Checked against the exact recursion and by Monte Carlo of the
// stochastic integral by a left-point sum on the same noise.
TEST(Simulate, OuTransitionVariance) {
    const double target = -std::expm1(-2.0) / 2.0;
    EXPECT_NEAR(target, 0.432332, 1e-6);
    const TimeGrid grid(50);
    const int n = 100000;
    std::vector<double> end(n), euler(n);
    for (int i = 0; i < n; ++i) {
        const auto p = simulate(ProcessSpec::ou(1.0), grid, derive_tag(17, 1, i));
        end[i] = p.values.back() * p.values.back();
        // integral of e^{-(1-s)} dB(s), left-point rule on the same noise
        double s = 0.0;
        for (int j = 0; j < grid.steps(); ++j) s += std::exp(-(1.0 - grid.t(j))) * p.driving[j];
        euler[i] = s * s;
    }
    const auto m = mean_se(end);
    EXPECT_LT(std::abs(m.mean - target), 3.0 * m.se);
    // The left-point sum has variance sum_j e^{-2(1-t_j)}/n, which tends to
    // the target as n grows.
    double discrete = 0.0;
    for (int j = 0; j < grid.steps(); ++j) discrete += std::exp(-2.0 * (1.0 - grid.t(j))) / grid.steps();
    EXPECT_NEAR(discrete, target, 2.0 / grid.steps());
    const auto e = mean_se(euler);
    EXPECT_LT(std::abs(e.mean - discrete), 3.0 * e.se);
}

TEST(Extremum, UniqueGridMaximum) {
    const auto p = from_values({0.0, 1.0, 0.5});
    const auto rec = extremum(ProcessSpec::brownian(), p, ExtremumKind::max, false);
    EXPECT_EQ(rec.value, 1.0);
    EXPECT_EQ(rec.tau, 0.5);
    EXPECT_EQ(rec.tie_count, 1);
    EXPECT_FALSE(rec.refined);
}

TEST(Extremum, FullTieUsesFirstIndex) {
    const auto p = from_values(std::vector<double>(9, 0.0));
    const auto rec = extremum(ProcessSpec::brownian(), p, ExtremumKind::min, false);
    EXPECT_EQ(rec.value, 0.0);
    EXPECT_EQ(rec.grid_index, 0);
    EXPECT_EQ(rec.tie_count, 9);
}

TEST(Extremum, OuRefinementUnsupported) {
    const auto p = simulate(ProcessSpec::ou(1.0), TimeGrid(100), 1);
    EXPECT_THROW(extremum(ProcessSpec::ou(1.0), p, ExtremumKind::min, true), UnsupportedError);
    EXPECT_NO_THROW(extremum(ProcessSpec::ou(1.0), p, ExtremumKind::min, false));
}

TEST(Extremum, NonFinitePathRejected) {
    auto p = from_values({0.0, std::nan(""), 1.0});
    EXPECT_THROW(extremum(ProcessSpec::brownian(), p, ExtremumKind::min, false), NumericError);
}

TEST(Extremum, RefinedMinimumNeverAboveGridMinimum) {
    const TimeGrid grid(200);
    for (const auto& spec : {ProcessSpec::brownian(), ProcessSpec::bridge(), ProcessSpec::distorted(1.0, 0.7),
                             ProcessSpec::geometric(0.2, 0.5)}) {
        for (std::uint64_t i = 0; i < 300; ++i) {
            const auto p = simulate(spec, grid, derive_tag(2, 1, i));
            const auto coarse = extremum(spec, p, ExtremumKind::min, false);
            const auto fine = extremum(spec, p, ExtremumKind::min, true);
            ASSERT_LE(fine.value, coarse.value);
            ASSERT_GE(fine.tau, 0.0);
            ASSERT_LE(fine.tau, 1.0);
            const auto fmax = extremum(spec, p, ExtremumKind::max, true);
            ASSERT_GE(fmax.value, extremum(spec, p, ExtremumKind::max, false).value);
        }
    }
}

// Reflection principle: -min of Brownian motion on [0,1] is |N(0,1)|.
TEST(Extremum, RefinedBrownianMinimumMatchesReflectionLaw) {
    const TimeGrid grid(2000);
    const ProcessSpec bm = ProcessSpec::brownian();
    std::vector<double> m(100000);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto p = simulate(bm, grid, derive_tag(2024, 1, i));
        m[i] = -extremum(bm, p, ExtremumKind::min, true).value;
    }
    const double D = ks_statistic(m, [](double x) { return x <= 0.0 ? 0.0 : 2.0 * normal_cdf(x) - 1.0; });
    EXPECT_LE(D, 0.01);
}

TEST(Extremum, NoGridTiesOnBrownianPaths) {
    const TimeGrid grid(2000);
    int ties = 0;
    for (std::uint64_t i = 0; i < 100000; ++i) {
        const auto p = simulate(ProcessSpec::brownian(), grid, derive_tag(9, 1, i));
        ties += grid_extremum(p.values, ExtremumKind::min).tie_count > 1;
    }
    EXPECT_EQ(ties, 0);
}

TEST(RunningExtremum, Examples) {
    const std::vector<double> v{0.0, -1.0, 2.0};
    EXPECT_EQ(running_extremum(v, ExtremumKind::max), (std::vector<double>{0.0, 0.0, 2.0}));
    EXPECT_EQ(running_extremum(v, ExtremumKind::min), (std::vector<double>{0.0, -1.0, -1.0}));
    const std::vector<double> inc{0.0, 0.5, 0.7, 3.0};
    EXPECT_EQ(running_extremum(inc, ExtremumKind::max), inc);
}

TEST(FiniteDifference, ZeroDirectionGivesZero) {
    const auto p = simulate(ProcessSpec::brownian(), TimeGrid(100), 3);
    const PathFunctional g = [](std::span<const double> v) { return grid_extremum(v, ExtremumKind::min).value; };
    const std::vector<double> z(101, 0.0);
    EXPECT_EQ(finite_diff_directional(g, p, z, 1e-6), 0.0);
    EXPECT_THROW(finite_diff_directional(g, p, z, 0.0), ParameterError);
}

TEST(FiniteDifference, MinimumDerivativeIsDirectionAtArgmin) {
    const TimeGrid grid(2000);
    const PathFunctional g = [](std::span<const double> v) { return grid_extremum(v, ExtremumKind::min).value; };
    std::vector<double> z(grid.steps() + 1);
    for (int i = 0; i <= grid.steps(); ++i) z[i] = grid.t(i);
    const double delta = 1e-6;
    int checked = 0;
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto p = simulate(ProcessSpec::brownian(), grid, derive_tag(31, 1, i));
        const auto rec = grid_extremum(p.values, ExtremumKind::min);
        double second = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= grid.steps(); ++k)
            if (k != rec.grid_index) second = std::min(second, p.values[k]);
        if (rec.tie_count != 1 || second - rec.value < 10.0 * delta) continue;
        ++checked;
        EXPECT_NEAR(finite_diff_directional(g, p, z, delta), rec.tau, 1e-6);
    }
    EXPECT_GT(checked, 150);
}

}  // namespace
}  // namespace gsurf
