#include <gtest/gtest.h>

#include <cmath>

#include "hydroneuro/microsim.hpp"
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

// One isolated neuron with φ(u) = 2u and no gap coupling.
ModelSpec single_neuron() {
    ModelSpec s;
    s.mesh = build_mesh(1.0);
    const Kernel zero([](Point, Point) { return 0.0; }, 0.0, 0.0, true);
    s.a = zero;
    s.raw_b = zero;
    s.b = zero;
    s.lambda = {0.0};
    s.alpha = 0.5;
    s.phi = make_rate({RateShape::linear, 2.0, 2.0, 4.0, 1.0, 1.0, 0.0});
    s.psi0 = make_initial_density({InitialShape::uniform, 1.0, 0.5, 0.05, 0.5, 0.0});
    return s;
}

}  // namespace

TEST(Rng, DerivedSeedsAreDistinctAndStable) {
    EXPECT_EQ(derive_seed(7, StreamTag::dynamics, 3), derive_seed(7, StreamTag::dynamics, 3));
    EXPECT_NE(derive_seed(7, StreamTag::dynamics, 3), derive_seed(7, StreamTag::initial, 3));
    EXPECT_NE(derive_seed(7, StreamTag::dynamics, 3), derive_seed(7, StreamTag::dynamics, 4));
    EXPECT_NE(derive_seed(7, StreamTag::dynamics, 3), derive_seed(8, StreamTag::dynamics, 3));
}

TEST(Rng, UniformRange) {
    Rng r(1);
    for (int k = 0; k < 10000; ++k) {
        const double u = r.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        EXPECT_GT(r.uniform_open(), 0.0);
        EXPECT_LT(r.index(7), 7u);
    }
}

TEST(ExactFlow, FourSiteMatrixExponential) {
    // frozen: four_site_expm_dt0_5 (constant raw b = 1, α = 0.3, ε = 0.5)
    ModelConfig c = base_config(0.5);
    c.alpha = 0.3;
    c.b = {KernelShape::constant, 1.0, 0.2, 0.5, true};
    const ModelSpec spec = build_model(c);
    for (double l : spec.lambda) EXPECT_NEAR(l, 0.75, 1e-15);
    NetworkState s;
    s.potentials = {0.2, 0.9, 0.4, 0.7};
    const auto out = exact_flow(spec, s, 0.5);
    const std::vector<double> expected = {0.29067336516742615, 0.6561054089001374, 0.3950825205196294,
                                          0.5516962535479342};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.potentials[i], expected[i], 1e-13);
    EXPECT_DOUBLE_EQ(out.clock, 0.5);
}

TEST(Flow, FrozenAverageConvergesToExact) {
    ModelConfig c = base_config(0.5);
    c.alpha = 0.3;
    c.b = {KernelShape::constant, 1.0, 0.2, 0.5, true};
    const ModelSpec spec = build_model(c);
    NetworkState s;
    s.potentials = {0.2, 0.9, 0.4, 0.7};
    const auto ex = exact_flow(spec, s, 0.5);
    double prev = 1.0;
    for (double h : {1e-2, 1e-3, 1e-4}) {
        const auto ap = flow(spec, s, 0.5, h);
        double err = 0.0;
        for (std::size_t i = 0; i < 4; ++i) err = std::max(err, std::abs(ap.potentials[i] - ex.potentials[i]));
        EXPECT_LT(err, prev);
        EXPECT_LT(err, 5.0 * h);
        prev = err;
    }
}

TEST(Flow, SymmetricKernelConservesMeanWithoutLeak) {
    ModelConfig c = base_config(0.1);
    c.alpha = 0.0;
    c.b = {KernelShape::constant, 1.0, 0.2, 0.5, true};
    const ModelSpec spec = build_model(c);
    auto s = sample_initial_state(spec, 3);
    double before = 0.0;
    for (double u : s.potentials) before += u;
    const auto out = flow(spec, s, 1.0, 0.01);
    double after = 0.0;
    for (double u : out.potentials) after += u;
    EXPECT_NEAR(after, before, 1e-10);
}

TEST(Spike, ResetAndDeposit) {
    const ModelSpec spec = build_model(base_config(0.2));
    NetworkDynamics dyn(spec);
    auto s = sample_initial_state(spec, 1);
    dyn.refresh_averages(s);
    const auto before = s.potentials;
    dyn.spike(s, 6);
    ASSERT_EQ(s.event_log.size(), 1u);
    EXPECT_EQ(s.event_log[0].site, 6u);
    EXPECT_EQ(s.event_log[0].pre_potential, before[6]);
    EXPECT_EQ(s.potentials[6], 0.0);
    const double eps2 = 0.04;
    for (std::size_t j = 0; j < s.potentials.size(); ++j)
        if (j != 6)
            EXPECT_NEAR(s.potentials[j] - before[j], eps2 * spec.a(spec.mesh.site(6), spec.mesh.site(j)), 1e-15);
}

TEST(Spike, IncrementalAveragesStayConsistent) {
    const ModelSpec spec = build_model(base_config(0.1));
    NetworkDynamics dyn(spec);
    auto s = sample_initial_state(spec, 2);
    dyn.refresh_averages(s);
    Rng r(4);
    for (int k = 0; k < 500; ++k) {
        dyn.spike(s, r.index(dyn.size()));
        if (k % 50 == 0) dyn.flow(s, 0.01, 0.01);
    }
    auto fresh = s;
    dyn.refresh_averages(fresh);
    for (std::size_t i = 0; i < dyn.size(); ++i) EXPECT_NEAR(s.local_averages[i], fresh.local_averages[i], 1e-12);
}

TEST(Simulate, BitReproducible) {
    const ModelSpec spec = build_model(base_config(0.1));
    const auto s0 = sample_initial_state(spec, 5);
    const auto a = simulate(spec, s0, 1.0, 42);
    const auto b = simulate(spec, s0, 1.0, 42);
    ASSERT_EQ(a.state.event_log.size(), b.state.event_log.size());
    for (std::size_t k = 0; k < a.state.event_log.size(); ++k) {
        EXPECT_EQ(a.state.event_log[k].time, b.state.event_log[k].time);
        EXPECT_EQ(a.state.event_log[k].site, b.state.event_log[k].site);
    }
    EXPECT_EQ(a.state.potentials, b.state.potentials);
    EXPECT_DOUBLE_EQ(a.state.clock, 1.0);
}

TEST(Simulate, ZeroRateIsPureFlow) {
    ModelConfig c = base_config(0.2);
    c.rate.gain = 0.0;
    const ModelSpec spec = build_model(c);
    const auto s0 = sample_initial_state(spec, 5);
    const auto res = simulate(spec, s0, 1.0, 9);
    EXPECT_TRUE(res.state.event_log.empty());
    const auto ref = flow(spec, s0, 1.0, NetworkDynamics(spec).default_substep());
    for (std::size_t i = 0; i < ref.potentials.size(); ++i)
        EXPECT_NEAR(res.state.potentials[i], ref.potentials[i], 1e-12);
}

TEST(Simulate, PathBoundAndOrderedLog) {
    const ModelSpec spec = build_model(base_config(0.1));
    NetworkDynamics dyn(spec);
    const double eps2 = 0.01;
    for (std::uint64_t k = 0; k < 20; ++k) {
        const auto s0 = sample_initial_state(spec, derive_seed(1, StreamTag::initial, k));
        const auto res = simulate(dyn, s0, 1.0, derive_seed(1, StreamTag::dynamics, k));
        const double n = static_cast<double>(res.state.event_log.size());
        EXPECT_LE(res.sup_potential, res.initial_sup + spec.a_star() * eps2 * n + 1e-12);
        EXPECT_LE(res.state.event_log.size(), res.proposals);
        for (std::size_t e = 1; e < res.state.event_log.size(); ++e)
            EXPECT_LE(res.state.event_log[e - 1].time, res.state.event_log[e].time);
        for (double u : res.state.potentials) EXPECT_GE(u, 0.0);
    }
}

TEST(Simulate, ProposalCountIsPoisson) {
    // frozen: poisson_q999_mean_360 = 420; N φ* T = 100 · 3 · 1.2 = 360
    ModelConfig c = base_config(0.1);
    c.rate.spatial_amplitude = 0.0;
    const ModelSpec spec = build_model(c);
    NetworkDynamics dyn(spec);
    ASSERT_NEAR(spec.phi.sup_bound(), 3.0, 1e-12);
    std::vector<double> counts;
    for (std::uint64_t k = 0; k < 50; ++k) {
        const auto s0 = sample_initial_state(spec, k);
        const auto res = simulate(dyn, s0, 1.2, 1000 + k);
        counts.push_back(static_cast<double>(res.proposals));
        EXPECT_LE(res.proposals, 420u);
    }
    const auto ms = mean_stderr(counts);
    EXPECT_NEAR(ms.mean, 360.0, 4.0 * std::sqrt(360.0 / 50.0));
    EXPECT_EQ(poisson_quantile(360.0, 0.999), 420.0);
}

TEST(Simulate, FirstSpikeLawOfIsolatedNeuron) {
    // frozen: first_spike_truncated_mean, first_spike_never_probability
    const ModelSpec spec = single_neuron();
    NetworkDynamics dyn(spec);
    const std::size_t reps = 10000;
    std::vector<double> first(reps);
    std::size_t never = 0;
    for (std::size_t k = 0; k < reps; ++k) {
        NetworkState s;
        s.potentials = {1.0};
        const auto res = simulate(dyn, s, 5.0, derive_seed(3, StreamTag::dynamics, k));
        if (res.state.event_log.empty()) {
            first[k] = 5.0;
            ++never;
        } else {
            first[k] = res.state.event_log.front().time;
        }
    }
    const auto ms = mean_stderr(first);
    EXPECT_NEAR(ms.mean, 0.725664821923213, 4.0 * ms.stderr_);
    const double p = 0.01831563888873418;
    EXPECT_NEAR(static_cast<double>(never) / reps, p, 4.0 * std::sqrt(p * (1 - p) / reps));
}

TEST(Simulate, ObserverAndWindows) {
    const ModelSpec spec = build_model(base_config(0.2));
    std::vector<double> seen;
    SimulationOptions opt;
    opt.observe_times = {0.25, 0.5, 0.75};
    opt.observer = [&](const NetworkState& s) { seen.push_back(s.clock); };
    opt.window = 0.25;
    const auto res = simulate(spec, sample_initial_state(spec, 1), 1.0, 2, opt);
    EXPECT_EQ(seen, opt.observe_times);
    ASSERT_EQ(res.window_counts.size(), 4u);
    std::size_t total = 0;
    for (auto c : res.window_counts) total += c;
    EXPECT_EQ(total, res.state.event_log.size());
}

TEST(EmpiricalMeasure, InitialSampleMatchesDensity) {
    // frozen: dkw_halfwidth_1e4 at level 0.999
    ModelConfig c = base_config(0.1);
    c.psi0 = {InitialShape::decreasing, 1.0, 0.5, 0.05, 0.5, 0.0};
    const ModelSpec spec = build_model(c);
    std::vector<double> xs;
    for (std::uint64_t k = 0; k < 100; ++k) {
        const auto s = sample_initial_state(spec, derive_seed(0, StreamTag::initial, k));
        const auto mu = empirical_measure(s, spec.mesh);
        EXPECT_NEAR(pair(mu, [](double, Point) { return 1.0; }), 1.0, 1e-12);
        xs.insert(xs.end(), s.potentials.begin(), s.potentials.end());
    }
    ASSERT_EQ(xs.size(), 10000u);
    const auto ks = ks_one_sample(xs, [&](double u) { return spec.psi0.cdf(u, {}); });
    EXPECT_LE(ks.statistic, 0.019494746035204052);
}

TEST(NetworkDynamics, RejectsOversizedMesh) {
    ModelSpec s = single_neuron();
    s.mesh = build_mesh(1.0 / 65.0);
    s.lambda.assign(s.mesh.count(), 0.0);
    EXPECT_THROW(NetworkDynamics{s}, std::invalid_argument);
}
