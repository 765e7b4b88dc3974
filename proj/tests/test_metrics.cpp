#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hydroneuro/metrics.hpp"
#include "hydroneuro/rng.hpp"
#include "hydroneuro/stats.hpp"

using namespace hydroneuro;

namespace {

ModelConfig base_config(double eps) {
    ModelConfig c;
    c.epsilon = eps;
    c.alpha = 0.5;
    c.a = {KernelShape::cosine, 1.0, 0.2, 0.5, true};
    c.b = {KernelShape::gaussian, 1.0, 0.25, 0.5, true};
    c.rate = {RateShape::linear, 1.5, 2.0, 4.0, 1.0, 2.0, 0.2};
    c.psi0 = {InitialShape::mixture, 1.0, 0.5, 0.05, 0.3, 0.2};
    return c;
}

// Uniform density on [lo, lo + 1] on a single square.
DensityField uniform_field(double lo) {
    DensityField f;
    f.ell = 1.0;
    f.centers = {{0.5, 0.5}};
    DensityProfile p;
    p.u = {lo, lo + 1.0};
    p.rho = {1.0, 1.0};
    f.profiles = {p};
    return f;
}

EmpiricalMeasure random_measure(Rng& r, std::size_t n) {
    EmpiricalMeasure mu;
    for (std::size_t k = 0; k < n; ++k) {
        mu.u.push_back(2.0 * r.uniform());
        mu.r.push_back({r.uniform(), r.uniform()});
        mu.weight.push_back(1.0 / static_cast<double>(n));
    }
    return mu;
}

}  // namespace

TEST(Stats, KolmogorovTail) {
    // frozen: kolmogorov_q_{0.5,1.0,1.5}
    EXPECT_NEAR(kolmogorov_q(0.5), 0.9639452436648751, 1e-12);
    EXPECT_NEAR(kolmogorov_q(1.0), 0.26999967167735456, 1e-12);
    EXPECT_NEAR(kolmogorov_q(1.5), 0.022217962616525127, 1e-12);
    EXPECT_EQ(kolmogorov_q(0.0), 1.0);
}

TEST(Stats, TwoSampleKs) {
    // frozen: ks_two_sample_statistic, ks_two_sample_stephens_p
    const auto r = ks_two_sample({0.1, 0.4, 0.35, 0.8, 0.95, 0.2, 0.55}, {0.3, 0.45, 0.6, 0.7, 0.9, 1.1, 1.3, 0.05});
    EXPECT_NEAR(r.statistic, 0.3392857142857143, 1e-14);
    EXPECT_NEAR(r.p_value, 0.6851465785529923, 1e-10);
}

TEST(Stats, PoissonQuantiles) {
    // frozen: poisson_q999_mean_10, poisson_q999_mean_360, poisson_q99_mean_360
    EXPECT_EQ(poisson_quantile(10.0, 0.999), 21.0);
    EXPECT_EQ(poisson_quantile(360.0, 0.999), 420.0);
    EXPECT_EQ(poisson_quantile(360.0, 0.99), 405.0);
}

TEST(Stats, SlopeAndSummaries) {
    // frozen: loglog_slope_example
    const std::vector<double> x = {1, 2, 4, 8};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::pow(v, 0.7));
    EXPECT_NEAR(*loglog_slope(x, y), 0.7, 1e-12);
    EXPECT_FALSE(loglog_slope({1, 2}, {1, 2}).has_value());
    const auto ms = mean_stderr({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(ms.mean, 2.5);
    EXPECT_NEAR(ms.stderr_, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
    EXPECT_DOUBLE_EQ(quantile({3, 1, 2, 4, 5}, 0.5), 3.0);
}

TEST(BlLibrary, BoundedLipschitzNorms) {
    const auto& lib = bl_library();
    ASSERT_EQ(lib.size(), 32u);
    Rng r(7);
    for (int k = 0; k < 2000; ++k) {
        const double u1 = 3.0 * r.uniform(), u2 = 3.0 * r.uniform();
        const Point p1{r.uniform(), r.uniform()}, p2{r.uniform(), r.uniform()};
        for (const auto& t : lib) {
            EXPECT_LE(std::abs(t(u1, p1)), 1.0 + 1e-12);
            const double d = std::abs(u1 - u2) + distance(p1, p2, true);
            EXPECT_LE(std::abs(t(u1, p1) - t(u2, p2)), d + 1e-12);
        }
    }
}

TEST(BlDistance, PseudometricOnSampledTriples) {
    Rng r(3);
    for (int k = 0; k < 1000; ++k) {
        const auto a = random_measure(r, 5), b = random_measure(r, 5), c = random_measure(r, 5);
        EXPECT_EQ(bl_distance(a, a), 0.0);
        EXPECT_DOUBLE_EQ(bl_distance(a, b), bl_distance(b, a));
        EXPECT_LE(bl_distance(a, c), bl_distance(a, b) + bl_distance(b, c) + 1e-12);
    }
}

TEST(BlDistance, ShiftedDensityIsDetected) {
    // frozen: bl_shift_linear_gap
    const auto a = uniform_field(0.0), b = uniform_field(0.1);
    const auto pa = bl_pairings(a), pb = bl_pairings(b);
    EXPECT_NEAR(std::abs(pa[7 * 4] - pb[7 * 4]), 0.05, 1e-12);
    EXPECT_GE(bl_distance(a, b), 0.05 - 1e-12);
    EXPECT_EQ(bl_distance(a, a), 0.0);
}

TEST(BlDistance, IidSampleFromDensity) {
    const auto f = uniform_field(0.0);
    Rng r(11);
    EmpiricalMeasure mu;
    const std::size_t n = 10000;
    for (std::size_t k = 0; k < n; ++k) {
        mu.u.push_back(r.uniform());
        mu.r.push_back({r.uniform(), r.uniform()});
        mu.weight.push_back(1.0 / n);
    }
    EXPECT_LE(bl_distance(mu, f), 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Histogram, MassesAndEdges) {
    const auto e = uniform_edges(0.0, 1.0, 4);
    ASSERT_EQ(e.size(), 5u);
    EXPECT_DOUBLE_EQ(e[2], 0.5);
    const auto h = histogram_masses({0.1, 0.3, 0.6, 0.6, 2.0}, e);
    EXPECT_EQ(h, (std::vector<double>{0.2, 0.2, 0.4, 0.2}));
    double total = 0.0;
    for (double x : h) total += x;
    EXPECT_NEAR(total, 1.0, 1e-15);
    const auto b = bin_masses(uniform_field(0.0).profiles[0], e);
    for (double x : b) EXPECT_NEAR(x, 0.25, 1e-14);
}

TEST(Oracle, ZeroRateIsDeterministicFlow) {
    ModelConfig c = base_config(0.25);
    c.rate.gain = 0.0;
    c.psi0 = {InitialShape::narrow, 1.0, 0.5, 0.01, 0.5, 0.0};
    const ModelSpec spec = build_model(c);
    ScalarPath path;
    path.times = {0.0, 1.0};
    path.ubar = {0.4, 0.3};
    path.p = {0.0, 0.0};
    path.q = {0.0, 0.0};
    const CharacteristicFlow T(1.0, 0.5, path);
    const auto res = one_particle_oracle(spec, path, 1.0, {0.5, 0.5}, 200, {0.5, 1.0}, 4, 1);
    ASSERT_EQ(res.samples.size(), 2u);
    for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_EQ(res.resets[j], 0u);
        // one inverse-CDF grid cell of slack on either side of the image of [0.49, 0.51]
        for (double u : res.samples[j]) {
            EXPECT_GE(u, T(0.0, res.times[j], 0.49) - 3e-4);
            EXPECT_LE(u, T(0.0, res.times[j], 0.51) + 3e-4);
        }
    }
}

TEST(Oracle, ResetsGrowWithRate) {
    ScalarPath path;
    path.times = {0.0, 1.0};
    path.ubar = {0.4, 0.4};
    path.p = {0.3, 0.3};
    path.q = {0.0, 0.0};
    std::vector<std::size_t> resets;
    for (double gain : {0.5, 1.5}) {
        ModelConfig c = base_config(0.25);
        c.rate.gain = gain;
        const ModelSpec spec = build_model(c);
        const auto res = one_particle_oracle(spec, path, 1.0, {0.3, 0.6}, 2000, {1.0}, 5, 1);
        resets.push_back(res.resets[0]);
    }
    EXPECT_LT(resets[0], resets[1]);
}

TEST(Oracle, ReproducibleAcrossThreadCounts) {
    const ModelSpec spec = build_model(base_config(0.25));
    ScalarPath path;
    path.times = {0.0, 1.0};
    path.ubar = {0.4, 0.4};
    path.p = {0.3, 0.3};
    path.q = {0.0, 0.0};
    const auto a = one_particle_oracle(spec, path, 1.0, {0.3, 0.6}, 100, {0.5}, 6, 1);
    const auto b = one_particle_oracle(spec, path, 1.0, {0.3, 0.6}, 100, {0.5}, 6, 3);
    EXPECT_EQ(a.samples, b.samples);
}

TEST(Convergence, SingleEpsilonHasNoSlope) {
    ConvergenceOptions opt;
    opt.epsilons = {0.25};
    opt.replicas = 3;
    opt.horizon = 0.5;
    opt.deltas = {1.0 / 8};
    const auto rep = convergence_study(base_config(0.25), opt);
    ASSERT_EQ(rep.times.size(), 5u);
    EXPECT_EQ(rep.cells.size(), 5u);
    for (const auto& s : rep.slope) EXPECT_FALSE(s.has_value());
    EXPECT_GE(rep.cell(0.25, 0.5).stderr_, 0.0);
}

TEST(Convergence, OrderIndependent) {
    ConvergenceOptions opt;
    opt.replicas = 4;
    opt.horizon = 0.5;
    opt.deltas = {1.0 / 8};
    opt.ell = 0.5;
    opt.epsilons = {0.5, 0.25, 0.125};
    const auto a = convergence_study(base_config(0.25), opt);
    opt.epsilons = {0.125, 0.5, 0.25};
    const auto b = convergence_study(base_config(0.25), opt);
    ASSERT_EQ(a.cells.size(), b.cells.size());
    for (std::size_t k = 0; k < a.cells.size(); ++k) {
        EXPECT_EQ(a.cells[k].epsilon, b.cells[k].epsilon);
        EXPECT_EQ(a.cells[k].mean, b.cells[k].mean);
        EXPECT_EQ(a.cells[k].stderr_, b.cells[k].stderr_);
    }
    ASSERT_TRUE(a.slope.back().has_value());
    EXPECT_EQ(*a.slope.back(), *b.slope.back());
}

TEST(Convergence, OversizedMeshIsSkipped) {
    ConvergenceOptions opt;
    opt.replicas = 1;
    opt.horizon = 0.25;
    opt.dyadic_level = 0;
    opt.deltas = {1.0 / 8};
    opt.epsilons = {0.25, 1.0 / 80};
    const auto rep = convergence_study(base_config(0.25), opt);
    EXPECT_TRUE(rep.cell(1.0 / 80, 0.25).skipped);
    EXPECT_FALSE(rep.cell(0.25, 0.25).skipped);
}

TEST(Convergence, TransportOnlyControl) {
    // φ ≡ 0, a ≡ 0 and a nearly switched-off gap coupling: each site follows
    // u e^{-αt}, so the distance at T is sampling error of the same kind as at 0
    ModelConfig c = base_config(0.1);
    c.alpha = 0.05;
    c.rate.gain = 0.0;
    c.a = {KernelShape::constant, 0.0, 0.2, 0.5, true};
    c.b = {KernelShape::constant, 1e-3, 0.2, 0.5, true};
    c.psi0.spatial_amplitude = 0.0;
    ConvergenceOptions opt;
    opt.epsilons = {0.1};
    opt.replicas = 30;
    opt.horizon = 1.0;
    opt.dyadic_level = 0;
    opt.deltas = {1.0 / 32};
    const auto rep = convergence_study(c, opt);
    const auto& c0 = rep.cell(0.1, 0.0);
    const auto& c1 = rep.cell(0.1, 1.0);
    EXPECT_NEAR(c1.mean, c0.mean, 2.0 * std::hypot(c0.stderr_, c1.stderr_));
}

TEST(Audit, ZeroRateTriviallyPasses) {
    ModelConfig c = base_config(0.2);
    c.rate.gain = 0.0;
    const ModelSpec spec = build_model(c);
    std::vector<SimulationResult> runs;
    SimulationOptions opt;
    opt.window = 0.25;
    for (std::uint64_t k = 0; k < 5; ++k) runs.push_back(simulate(spec, sample_initial_state(spec, k), 1.0, k, opt));
    const auto rep = bound_audit(runs, spec, 1.0, 0.25);
    EXPECT_EQ(rep.path_bound_holds, 5u);
    EXPECT_EQ(rep.total_over_fraction, 0.0);
    EXPECT_EQ(rep.window_over_fraction, 0.0);
    for (auto n : rep.spike_counts) EXPECT_EQ(n, 0u);
}

TEST(Audit, PathBoundViolationIsFatal) {
    const ModelSpec spec = build_model(base_config(0.2));
    SimulationResult fake;
    fake.initial_sup = 1.0;
    fake.sup_potential = 1.5;
    EXPECT_THROW(bound_audit({fake}, spec, 1.0, 0.25), std::logic_error);
}
