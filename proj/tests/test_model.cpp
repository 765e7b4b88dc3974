#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "hydroneuro/microsim.hpp"
#include "hydroneuro/model.hpp"

using namespace hydroneuro;

namespace {

Point random_point(std::mt19937_64& g) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    return {U(g), U(g)};
}

std::vector<KernelPreset> kernel_presets() {
    return {
        {KernelShape::constant, 1.5, 0.2, 0.5, true},
        {KernelShape::gaussian, 2.0, 0.15, 0.5, true},
        {KernelShape::gaussian, 1.0, 0.3, 0.5, false},
        {KernelShape::cosine, 1.0, 0.2, 0.7, true},
    };
}

std::vector<RatePreset> rate_presets() {
    return {
        {RateShape::linear, 1.5, 2.0, 4.0, 1.0, 2.0, 0.0},
        {RateShape::power, 1.0, 2.0, 4.0, 1.0, 2.0, 0.3},
        {RateShape::sigmoid, 2.0, 2.0, 4.0, 1.0, 2.5, -0.2},
    };
}

ModelConfig small_config(double eps) {
    ModelConfig c;
    c.epsilon = eps;
    c.alpha = 0.5;
    c.a = {KernelShape::cosine, 1.0, 0.2, 0.5, true};
    c.b = {KernelShape::gaussian, 1.0, 0.25, 0.5, true};
    c.rate = {RateShape::linear, 1.5, 2.0, 4.0, 1.0, 2.0, 0.2};
    c.psi0 = {InitialShape::mixture, 1.0, 0.5, 0.05, 0.3, 0.2};
    return c;
}

}  // namespace

TEST(Mesh, DegenerateSingleSite) {
    const Mesh m = build_mesh(1.0);
    ASSERT_EQ(m.count(), 1u);
    EXPECT_EQ(m.site(0).x, 0.0);
    EXPECT_EQ(m.site(0).y, 0.0);
}

TEST(Mesh, RowMajorEnumeration) {
    const Mesh m = build_mesh(0.5);
    ASSERT_EQ(m.count(), 4u);
    const std::vector<std::pair<double, double>> expected = {{0, 0}, {0, 0.5}, {0.5, 0}, {0.5, 0.5}};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(m.site(i).x, expected[i].first);
        EXPECT_EQ(m.site(i).y, expected[i].second);
    }
}

TEST(Mesh, TenthSpacing) {
    // frozen: mesh_0_1_count, mesh_0_1_max_coordinate
    const Mesh m = build_mesh(0.1);
    EXPECT_EQ(m.count(), 100u);
    double mx = 0.0;
    for (const auto& s : m.sites()) mx = std::max({mx, s.x, s.y});
    EXPECT_NEAR(mx, 0.9, 1e-15);
    for (std::size_t i = 0; i < m.count(); ++i) EXPECT_EQ(m.index_of(m.site(i)), i);
}

TEST(Mesh, RejectsNonDivisor) {
    EXPECT_THROW(build_mesh(0.3), std::invalid_argument);
    EXPECT_THROW(build_mesh(0.0), std::invalid_argument);
    EXPECT_THROW(build_mesh(-0.5), std::invalid_argument);
}

TEST(Distance, TorusAndEuclidean) {
    EXPECT_NEAR(distance({0.05, 0.0}, {0.95, 0.0}, true), 0.1, 1e-12);
    EXPECT_NEAR(distance({0.05, 0.0}, {0.95, 0.0}, false), 0.9, 1e-12);
    EXPECT_NEAR(distance({0.1, 0.1}, {0.9, 0.9}, true), std::sqrt(0.08), 1e-12);
}

TEST(Kernel, PropertiesOnSampledArguments) {
    std::mt19937_64 g(11);
    for (const auto& p : kernel_presets()) {
        const Kernel k = make_kernel(p);
        for (int n = 0; n < 1000; ++n) {
            const Point r1 = random_point(g), r2 = random_point(g), rp = random_point(g);
            EXPECT_EQ(k(r1, r1), 0.0);
            EXPECT_GE(k(r1, rp), 0.0);
            if (k.symmetric()) EXPECT_NEAR(k(r1, rp), k(rp, r1), 1e-14);
            const double diff = std::abs(k.profile(r1, rp) - k.profile(r2, rp));
            EXPECT_LE(diff, k.lipschitz_bound() * distance(r1, r2, p.periodic) + 1e-12);
            EXPECT_LE(k.profile(r1, rp), k.sup_bound() + 1e-12);
        }
    }
}

TEST(GapKernel, ConstantKernelLambda) {
    // frozen: lambda_constant_c2_eps0_1
    const Mesh m = build_mesh(0.1);
    const auto g = normalize_gap_kernel(make_kernel({KernelShape::constant, 2.0, 0.2, 0.5, true}), m);
    for (double l : g.lambda) EXPECT_NEAR(l, 1.9800000000000004, 1e-12);
    for (std::size_t i = 0; i < m.count(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.count(); ++j) s += g.kernel(m.site(i), m.site(j));
        EXPECT_NEAR(0.01 * s, 1.0, 1e-12);
    }
}

TEST(GapKernel, SingleSiteRejected) {
    EXPECT_THROW(normalize_gap_kernel(make_kernel({}), build_mesh(1.0)), std::invalid_argument);
}

TEST(GapKernel, NormalizationIsIdempotent) {
    const Mesh m = build_mesh(0.2);
    const auto once = normalize_gap_kernel(make_kernel({KernelShape::gaussian, 1.3, 0.2, 0.5, true}), m);
    const auto twice = normalize_gap_kernel(once.kernel, m);
    for (double l : twice.lambda) EXPECT_NEAR(l, 1.0, 1e-12);
    for (const auto& r : m.sites())
        for (const auto& q : m.sites()) EXPECT_NEAR(twice.kernel(r, q), once.kernel(r, q), 1e-12);
}

TEST(Rate, ClampExamples) {
    const auto lin = clamp_rate([](double u, Point) { return u; }, 2.0);
    EXPECT_EQ(lin(3.0, {}), 2.0);
    EXPECT_EQ(lin(1.5, {}), 1.5);
    // frozen: power_rate_sup_clamp2
    const auto sq = clamp_rate([](double u, Point) { return u * u; }, 2.0);
    EXPECT_NEAR(sq.sup_bound(), 4.0, 1e-12);
}

TEST(Rate, Rejections) {
    EXPECT_THROW(clamp_rate([](double u, Point) { return u - 1.0; }, 2.0), std::invalid_argument);
    EXPECT_THROW(clamp_rate([](double u, Point) { return 1.0 + u; }, 2.0), std::invalid_argument);
    EXPECT_THROW(clamp_rate([](double u, Point) { return std::sin(3.0 * u); }, 2.0), std::invalid_argument);
    EXPECT_THROW(clamp_rate([](double u, Point) { return u; }, 0.0), std::invalid_argument);
}

TEST(Rate, PropertiesOnSampledArguments) {
    std::mt19937_64 g(5);
    std::uniform_real_distribution<double> U(0.0, 4.0);
    for (const auto& p : rate_presets()) {
        const RateFunction phi = make_rate(p);
        for (int n = 0; n < 1000; ++n) {
            const Point r = random_point(g);
            double u = U(g), v = U(g);
            if (u > v) std::swap(u, v);
            EXPECT_EQ(phi(0.0, r), 0.0);
            EXPECT_LE(phi(u, r), phi(v, r));
            EXPECT_LE(phi(v, r), phi.sup_bound() + 1e-12);
            if (u >= p.clamp) EXPECT_EQ(phi(u, r), phi(p.clamp, r));
            EXPECT_LE(std::abs(phi(v, r) - phi(u, r)), phi.lipschitz_bound() * (v - u) + 1e-9);
        }
    }
}

TEST(InitialDensity, NormalizedAndSupported) {
    std::mt19937_64 g(3);
    std::vector<InitialPreset> presets = {
        {InitialShape::uniform, 1.5, 0.5, 0.05, 0.5, 0.0},
        {InitialShape::narrow, 1.0, 0.5, 0.05, 0.5, 0.0},
        {InitialShape::decreasing, 2.0, 0.5, 0.05, 0.5, 0.0},
        {InitialShape::bump, 1.0, 0.5, 0.05, 0.5, 0.0},
        {InitialShape::mixture, 1.0, 0.5, 0.05, 0.4, 0.3},
    };
    for (const auto& p : presets) {
        const InitialDensity psi = make_initial_density(p);
        const double R = psi.support_bound();
        for (int n = 0; n < 1000; ++n) {
            const Point r = random_point(g);
            if (n < 20) {
                auto f = [&](double u) { return psi(u, r); };
                double mass = 0.0;
                std::vector<double> cuts = {0.0};
                for (double b : psi.breakpoints()) cuts.push_back(b);
                cuts.push_back(R);
                for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
                    mass += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[k], cuts[k + 1]);
                EXPECT_NEAR(mass, 1.0, 1e-9) << to_string(p.shape);
            }
            std::uniform_real_distribution<double> U(R, 3.0 * R);
            EXPECT_EQ(psi(U(g) + 1e-9, r), 0.0);
            EXPECT_GE(psi(R * U(g) / (3.0 * R), r), 0.0);
        }
    }
}

TEST(InitialDensity, CompatibleWeightForConstantKernels) {
    // frozen: compatible_weight_const_kernels = 0.3, so ψ0(0) = 2w/R0
    ModelConfig c = small_config(0.25);
    c.a = {KernelShape::constant, 1.0, 0.2, 0.5, true};
    c.b = {KernelShape::constant, 1.0, 0.2, 0.5, true};
    c.rate = {RateShape::linear, 1.5, 2.0, 4.0, 1.0, 2.0, 0.0};
    c.psi0 = {InitialShape::compatible, 1.0, 0.5, 0.05, 0.5, 0.0};
    const ModelSpec spec = build_model(c);
    EXPECT_NEAR(spec.psi0(0.0, {0.3, 0.6}), 0.6, 1e-9);
    ASSERT_TRUE(spec.psi0.compatible().has_value());
    EXPECT_TRUE(*spec.psi0.compatible());
}

TEST(InitialDensity, CompatibleNeedsTranslationInvariance) {
    ModelConfig c = small_config(0.25);
    c.periodic = false;
    c.psi0.shape = InitialShape::compatible;
    c.psi0.spatial_amplitude = 0.0;
    c.rate.spatial_amplitude = 0.0;
    EXPECT_THROW(build_model(c), std::invalid_argument);
}

TEST(ModelSpec, NormalizationInvariant) {
    const ModelSpec spec = build_model(small_config(0.1));
    const auto& sites = spec.mesh.sites();
    for (std::size_t i = 0; i < sites.size(); ++i) {
        double s = 0.0;
        for (const auto& q : sites) s += spec.b(sites[i], q);
        EXPECT_NEAR(0.01 * s, 1.0, 1e-9);
        EXPECT_GT(spec.lambda[i], 0.0);
    }
    EXPECT_NO_THROW(validate(spec));
}

TEST(PresetNames, RoundTrip) {
    for (auto s : {KernelShape::constant, KernelShape::gaussian, KernelShape::cosine})
        EXPECT_EQ(parse_kernel_shape(to_string(s)), s);
    for (auto s : {RateShape::linear, RateShape::sigmoid, RateShape::power}) EXPECT_EQ(parse_rate_shape(to_string(s)), s);
    for (auto s : {InitialShape::uniform, InitialShape::narrow, InitialShape::decreasing, InitialShape::bump,
                   InitialShape::mixture, InitialShape::compatible})
        EXPECT_EQ(parse_initial_shape(to_string(s)), s);
    EXPECT_THROW(parse_kernel_shape("triangle"), std::invalid_argument);
}

TEST(SampleInitialState, NarrowStaysInBin) {
    ModelConfig c = small_config(0.1);
    c.psi0 = {InitialShape::narrow, 2.0, 1.0, 0.05, 0.5, 0.0};
    const ModelSpec spec = build_model(c);
    const auto s = sample_initial_state(spec, 4);
    EXPECT_EQ(s.clock, 0.0);
    EXPECT_TRUE(s.event_log.empty());
    for (double u : s.potentials) {
        EXPECT_GE(u, 0.95 - 1e-3);
        EXPECT_LE(u, 1.05 + 1e-3);
    }
}

TEST(SampleInitialState, UniformMean) {
    ModelConfig c = small_config(0.1);
    c.psi0 = {InitialShape::uniform, 1.0, 0.5, 0.05, 0.5, 0.0};
    const ModelSpec spec = build_model(c);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        for (double u : sample_initial_state(spec, seed).potentials) {
            EXPECT_LE(u, 1.0);
            EXPECT_GE(u, 0.0);
            sum += u;
            ++n;
        }
    EXPECT_EQ(n, 10000u);
    EXPECT_NEAR(sum / static_cast<double>(n), 0.5, 0.02);
}

TEST(SampleInitialState, BitReproducible) {
    const ModelSpec spec = build_model(small_config(0.1));
    const auto a = sample_initial_state(spec, 99);
    const auto b = sample_initial_state(spec, 99);
    const auto c = sample_initial_state(spec, 100);
    EXPECT_EQ(a.potentials, b.potentials);
    EXPECT_NE(a.potentials, c.potentials);
}
