#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <stdexcept>

#include "hydroneuro/limit.hpp"

namespace hydroneuro {

namespace {

// ∫_0^d e^{κx} dx and ∫_0^d x e^{κx} dx.
std::pair<double, double> exp_moments(double kappa, double d) {
    const double z = kappa * d;
    if (std::abs(z) < 1e-2) {
        const double m0 = d * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0);
        const double m1 = d * d *
                          (1.0 / 2.0 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0 + z * z * z * z / 144.0 +
                           z * z * z * z * z / 840.0);
        return {m0, m1};
    }
    const double em1 = std::expm1(z);
    return {em1 / kappa, (z * (em1 + 1.0) - em1) / (kappa * kappa)};
}

}  // namespace

CharacteristicFlow::CharacteristicFlow(double lambda, double alpha, const ScalarPath& path)
    : lambda_(lambda), kappa_(alpha + lambda), path_(path) {
    const auto& ts = path_.times;
    if (ts.empty()) throw std::invalid_argument("CharacteristicFlow: empty path");
    for (std::size_t k = 1; k < ts.size(); ++k)
        if (!(ts[k] > ts[k - 1])) throw std::invalid_argument("CharacteristicFlow: path times must increase");
    cumulative_.assign(ts.size(), 0.0);
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const double g0 = lambda_ * path_.ubar[k] + path_.p[k];
        const double g1 = lambda_ * path_.ubar[k + 1] + path_.p[k + 1];
        const double d = ts[k + 1] - ts[k];
        const auto [m0, m1] = exp_moments(kappa_, d);
        cumulative_[k + 1] = cumulative_[k] + std::exp(kappa_ * ts[k]) * (g0 * m0 + (g1 - g0) / d * m1);
    }
}

double CharacteristicFlow::J(double t) const {
    const auto& ts = path_.times;
    if (t <= ts.front()) {
        const double g = lambda_ * path_.ubar.front() + path_.p.front();
        const auto [m0, m1] = exp_moments(kappa_, ts.front() - t);
        (void)m1;
        return -std::exp(kappa_ * t) * g * m0;
    }
    std::size_t k = ts.size() - 1;
    if (t < ts.back()) k = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin()) - 1;
    const double g0 = lambda_ * path_.ubar[k] + path_.p[k];
    double slope = 0.0;
    if (k + 1 < ts.size()) {
        const double g1 = lambda_ * path_.ubar[k + 1] + path_.p[k + 1];
        slope = (g1 - g0) / (ts[k + 1] - ts[k]);
    }
    const auto [m0, m1] = exp_moments(kappa_, t - ts[k]);
    return cumulative_[k] + std::exp(kappa_ * ts[k]) * (g0 * m0 + slope * m1);
}

double CharacteristicFlow::operator()(double s, double t, double u) const {
    if (s == t) return u;
    return std::exp(-kappa_ * (t - s)) * u + std::exp(-kappa_ * t) * (J(t) - J(s));
}

double CharacteristicFlow::inverse_from_zero(double t, double u) const {
    return std::exp(kappa_ * t) * u - J(t);
}

double characteristic_flow(double s, double t, double u, double lambda, double alpha, const ScalarPath& path) {
    return CharacteristicFlow(lambda, alpha, path)(s, t, u);
}

ClosedForm::ClosedForm(const ModelSpec& spec, double lambda, Point r, const ScalarPath& path)
    : spec_(&spec), r_(r), path_(path), flow_(lambda, spec.alpha, path) {}

double ClosedForm::killing(double s, double t, double u) const {
    if (t <= s) return 0.0;
    const auto n = static_cast<std::size_t>(std::max(8.0, 2.0 * std::ceil((t - s) / 0.01)));
    const double h = (t - s) / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
        const double w = j == 0 || j == n ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        const double hh = s + h * static_cast<double>(j);
        acc += w * (*spec_).phi(flow_(s, hh, u), r_);
    }
    return acc * h / 3.0;
}

double ClosedForm::density(double t, double u) const {
    if (u < 0.0) return 0.0;
    const double kappa = flow_.kappa();
    const double ustar = shock(t);
    if (u >= ustar) {
        const double v = flow_.inverse_from_zero(t, u);
        if (v < 0.0 || v > spec_->psi0.support_bound()) return 0.0;
        return spec_->psi0(v, r_) * std::exp(kappa * t - killing(0.0, t, v));
    }
    // Reset branch: the characteristic leaving 0 at time s reaches u at t.
    auto g = [&](double s) { return flow_(s, t, 0.0) - u; };
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13; };
    const auto br = boost::math::tools::bisect(g, 0.0, t, tol);
    const double s = 0.5 * (br.first + br.second);
    const double q = path_.at(path_.q, s);
    const double denom = flow_.lambda() * path_.at(path_.ubar, s) + path_.at(path_.p, s);
    if (!(denom > 0.0)) return 0.0;
    return q / denom * std::exp(kappa * (t - s) - killing(s, t, 0.0));
}

double closed_form_l1(const std::vector<ClosedForm>& cf, const DensityField& f, double t, std::size_t cells) {
    if (cf.size() != f.size()) throw std::invalid_argument("closed_form_l1: square counts differ");
    double total = 0.0;
    for (std::size_t m = 0; m < cf.size(); ++m) {
        const double ustar = cf[m].shock(t);
        const double top = std::max(f.profiles[m].support_max(), ustar) * (1.0 + 1e-9);
        auto piece = [&](double a, double b, std::size_t n) {
            if (b <= a || n == 0) return 0.0;
            const double h = (b - a) / static_cast<double>(n);
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double x = a + (static_cast<double>(j) + 0.5) * h;
                s += std::abs(cf[m].density(t, x) - f.profiles[m].value(x));
            }
            return s * h;
        };
        const auto n_low = static_cast<std::size_t>(std::ceil(static_cast<double>(cells) * ustar / top));
        total += piece(0.0, ustar, std::max<std::size_t>(n_low, 1)) +
                 piece(ustar, top, std::max<std::size_t>(cells - std::min(cells, n_low), 1));
    }
    return total * f.ell * f.ell;
}

std::vector<WeakTest> weak_test_library() {
    return {
        {[](double) { return 1.0; }, [](double) { return 0.0; }},
        {[](double u) { return std::sin(u); }, [](double u) { return std::cos(u); }},
        {[](double u) { return std::cos(u); }, [](double u) { return -std::sin(u); }},
        {[](double u) { return std::exp(-u); }, [](double u) { return -std::exp(-u); }},
        {[](double u) { return u / (1.0 + u); }, [](double u) { return 1.0 / ((1.0 + u) * (1.0 + u)); }},
        {[](double u) { return std::sin(2.0 * u) / 2.0; }, [](double u) { return std::cos(2.0 * u); }},
        {[](double u) { return std::cos(2.0 * u) / 2.0; }, [](double u) { return -std::sin(2.0 * u); }},
        {[](double u) { return u * std::exp(-u); }, [](double u) { return (1.0 - u) * std::exp(-u); }},
    };
}

double weak_residual(const SchemeTrajectory& traj, std::size_t step, const WeakTest& test, const ModelSpec& spec,
                     const SquareCoupling& sc, std::size_t m) {
    if (step == 0) throw std::invalid_argument("weak_residual: needs a step with two neighbours");
    const double d = traj.delta;
    const auto get = [&](std::size_t n) -> const DensityField& {
        const auto it = traj.snapshots.find(n);
        if (it == traj.snapshots.end()) throw std::out_of_range("weak_residual: snapshot missing");
        return it->second;
    };
    const DensityField& prev = get(step - 1);
    const DensityField& here = get(step);
    const DensityField& next = get(step + 1);
    const double lhs =
        (next.profiles[m].integrate(test.f) - prev.profiles[m].integrate(test.f)) / (2.0 * d);
    const double lambda = sc.lambda[m];
    const double ubar = here.ubar[m];
    const double p = here.p[m];
    const Point c = here.centers[m];
    auto V = [&](double u) { return -spec.alpha * u - lambda * (u - ubar) + p; };
    const auto& pr = here.profiles[m];
    const double transport = pr.integrate([&](double u) { return test.df(u) * V(u); });
    const double boundary = test.f(0.0) * V(0.0) * pr.boundary_value();
    const double killing = pr.integrate([&](double u) { return spec.phi(u, c) * test.f(u); });
    return lhs - (transport + boundary - killing);
}

}  // namespace hydroneuro
