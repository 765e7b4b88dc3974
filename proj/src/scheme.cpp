#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hydroneuro/limit.hpp"

namespace hydroneuro {

namespace {

std::size_t series_length(double x) {
    std::size_t K = 1;
    double term = x;
    while (term > 1e-17 && K < 80) {
        ++K;
        term *= x / static_cast<double>(K);
    }
    return K;
}

// Σ_{k >= first} coef[k + shift] t^k / k!.
double series(const std::vector<double>& coef, double t, std::size_t first, std::size_t shift = 0) {
    double s = 0.0;
    double term = 1.0;
    for (std::size_t k = 0; k + shift < coef.size(); ++k) {
        if (k > 0) term *= t / static_cast<double>(k);
        if (k >= first) s += term * coef[k + shift];
    }
    return s;
}

}  // namespace

DensityField initial_field(const ModelSpec& spec, const SquareCoupling& sc, const SchemeOptions& opt) {
    if (opt.ugrid < 2) throw std::invalid_argument("initial_field: ugrid must be at least 2");
    DensityField f;
    f.ell = sc.ell;
    f.centers = sc.centers;
    const double R = spec.psi0.support_bound();
    const double eta = 1e-12 * R;
    std::vector<double> grid(opt.ugrid);
    for (std::size_t j = 0; j < opt.ugrid; ++j) grid[j] = R * static_cast<double>(j) / static_cast<double>(opt.ugrid - 1);
    const auto& breaks = spec.psi0.breakpoints();
    for (const Point c : f.centers) {
        DensityProfile prof;
        std::size_t b = 0;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            while (b < breaks.size() && breaks[b] <= grid[j]) {
                if (breaks[b] > 0.0 && breaks[b] < R) {
                    prof.u.push_back(breaks[b]);
                    prof.rho.push_back(spec.psi0(breaks[b] - eta, c));
                    prof.u.push_back(breaks[b]);
                    prof.rho.push_back(spec.psi0(breaks[b] + eta, c));
                }
                ++b;
            }
            if (!prof.u.empty() && prof.u.back() == grid[j]) continue;
            const double x = j + 1 == grid.size() ? R - eta : grid[j];
            prof.u.push_back(grid[j]);
            prof.rho.push_back(spec.psi0(x, c));
        }
        f.ustar.push_back(0.0);
        f.profiles.push_back(std::move(prof));
    }
    compute_scalars(f, spec, sc);
    return f;
}

std::vector<std::vector<double>> birth_moments(const DensityField& f, const ModelSpec& spec, double delta) {
    const std::size_t K = series_length(delta * spec.phi.sup_bound());
    std::vector<std::vector<double>> mu(f.size(), std::vector<double>(K + 2, 0.0));
    for (std::size_t m = 0; m < f.size(); ++m) {
        const auto& pr = f.profiles[m];
        const Point c = f.centers[m];
        auto& out = mu[m];
        auto add = [&](double u, double w) {
            if (w == 0.0) return;
            const double phi = spec.phi(u, c);
            double term = w * std::exp(-delta * phi);
            for (double& o : out) {
                o += term;
                term *= phi;
            }
        };
        for (std::size_t k = 0; k + 1 < pr.u.size(); ++k) {
            const double h = pr.u[k + 1] - pr.u[k];
            if (h <= 0.0) continue;
            add(pr.u[k], h / 6.0 * pr.rho[k]);
            add(0.5 * (pr.u[k] + pr.u[k + 1]), h / 3.0 * (pr.rho[k] + pr.rho[k + 1]));
            add(pr.u[k + 1], h / 6.0 * pr.rho[k + 1]);
        }
    }
    return mu;
}

BirthMap::BirthMap(const std::vector<std::vector<double>>& moments, const DensityField& f, const SquareCoupling& sc,
                   double delta, std::size_t m)
    : delta_(delta), lambda_(sc.lambda[m]), kappa_(sc.kappa[m]), ubar_(f.ubar.at(m)), own_(moments[m]) {
    deposited_.assign(own_.size(), 0.0);
    for (std::size_t mp = 0; mp < moments.size(); ++mp) {
        const double a = sc.aw(static_cast<Eigen::Index>(mp), static_cast<Eigen::Index>(m));
        if (a == 0.0) continue;
        for (std::size_t k = 0; k < deposited_.size(); ++k) deposited_[k] += a * moments[mp][k];
    }
}

BirthMap::BirthMap(const DensityField& f, const ModelSpec& spec, const SquareCoupling& sc, double delta,
                   std::size_t m)
    : BirthMap(birth_moments(f, spec, delta), f, sc, delta, m) {}

double BirthMap::position(double t) const {
    const double z = kappa_ * t;
    const double drift = z < 1e-12 ? lambda_ * t * ubar_ : lambda_ / kappa_ * -std::expm1(-z) * ubar_;
    return drift + series(deposited_, t, 1);
}

double BirthMap::speed(double t) const {
    return lambda_ * std::exp(-kappa_ * t) * ubar_ + series(deposited_, t, 0, 1);
}

double BirthMap::flux(double t) const { return series(own_, t, 0, 1); }

double BirthMap::solve(double x) const {
    const double top = end();
    if (x < 0.0 || x > top * (1.0 + 1e-12) + 1e-300)
        throw std::runtime_error("BirthMap::solve: u = " + std::to_string(x) + " outside the reset branch [0, " +
                                 std::to_string(top) + "]; the field mass or normalisation is corrupted");
    if (x <= 0.0) return 0.0;
    if (x >= top) return delta_;
    auto g = [&](double t) { return position(t) - x; };
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12; };
    const auto r = boost::math::tools::bisect(g, 0.0, delta_, tol);
    return 0.5 * (r.first + r.second);
}

double BirthMap::density(double x) const {
    const double t = solve(x);
    const double v = speed(t);
    return v > 0.0 ? flux(t) / v : 0.0;
}

DensityField rho_delta_step(const DensityField& f, const ModelSpec& spec, const SquareCoupling& sc, double delta,
                            const SchemeOptions& opt) {
    if (!(delta > 0.0)) throw std::invalid_argument("rho_delta_step: delta must be positive");
    const auto moments = birth_moments(f, spec, delta);
    DensityField next;
    next.time = f.time + delta;
    next.ell = f.ell;
    next.centers = f.centers;
    next.profiles.resize(f.size());
    next.ustar.resize(f.size());
    const std::size_t nb = std::max<std::size_t>(opt.birth_nodes, 1);
    for (std::size_t m = 0; m < f.size(); ++m) {
        const BirthMap bm(moments, f, sc, delta, m);
        const double xn = bm.end();
        const auto& old = f.profiles[m];
        auto& prof = next.profiles[m];
        prof.u.reserve(old.u.size() + nb + 1);
        prof.rho.reserve(old.u.size() + nb + 1);
        std::size_t born = 0;
        if (xn > 0.0) {
            for (std::size_t k = 0; k < nb; ++k) {
                const double x = xn * static_cast<double>(k) / static_cast<double>(nb);
                prof.u.push_back(x);
                prof.rho.push_back(bm.density(x));
            }
            const double v = bm.speed(delta);
            prof.u.push_back(xn);
            prof.rho.push_back(v > 0.0 ? bm.flux(delta) / v : 0.0);
            born = nb + 1;
        }
        const double k = sc.kappa[m];
        const double shrink = std::exp(-k * delta);
        const Point c = f.centers[m];
        for (std::size_t j = 0; j < old.u.size(); ++j) {
            prof.u.push_back(shrink * old.u[j] + xn);
            prof.rho.push_back(old.rho[j] * std::exp(delta * (k - spec.phi(old.u[j], c))));
        }
        prof.shock = old.shock + born;
        next.ustar[m] = prof.u[prof.shock];
    }
    compute_scalars(next, spec, sc);
    return next;
}

std::size_t SchemeTrajectory::step_of(double t) const {
    const double n = std::round(t / delta);
    if (n < 0.0 || std::abs(n * delta - t) > 1e-9 * std::max(1.0, std::abs(t)))
        throw std::invalid_argument("time " + std::to_string(t) + " is not a multiple of delta");
    return static_cast<std::size_t>(n);
}

const DensityField& SchemeTrajectory::at(double t) const {
    const auto it = snapshots.find(step_of(t));
    if (it == snapshots.end()) throw std::out_of_range("no snapshot kept at t = " + std::to_string(t));
    return it->second;
}

SchemeTrajectory run_scheme(const ModelSpec& spec, const SquareCoupling& sc, double delta, double horizon,
                            const SchemeOptions& opt, const std::vector<double>& keep_times, bool with_neighbours) {
    SchemeTrajectory traj;
    traj.delta = delta;
    const std::size_t steps = traj.step_of(horizon);
    std::vector<char> keep(steps + 1, 0);
    for (double t : keep_times) {
        const std::size_t n = traj.step_of(t);
        if (n > steps) throw std::invalid_argument("keep time beyond the horizon");
        keep[n] = 1;
        if (with_neighbours) {
            if (n > 0) keep[n - 1] = 1;
            if (n < steps) keep[n + 1] = 1;
        }
    }
    DensityField f = initial_field(spec, sc, opt);
    auto record = [&](std::size_t n) {
        traj.times.push_back(static_cast<double>(n) * delta);
        traj.ubar.push_back(f.ubar);
        traj.p.push_back(f.p);
        traj.q.push_back(f.q);
        traj.ustar.push_back(f.ustar);
        std::vector<double> b, j, ms, s;
        for (const auto& pr : f.profiles) {
            b.push_back(pr.boundary_value());
            j.push_back(pr.shock_jump());
            ms.push_back(pr.mass());
            s.push_back(pr.support_max());
        }
        traj.boundary.push_back(std::move(b));
        traj.jump.push_back(std::move(j));
        traj.mass.push_back(std::move(ms));
        traj.support.push_back(std::move(s));
        if (keep[n]) traj.snapshots.emplace(n, f);
    };
    record(0);
    for (std::size_t n = 1; n <= steps; ++n) {
        f = rho_delta_step(f, spec, sc, delta, opt);
        f.time = static_cast<double>(n) * delta;
        record(n);
    }
    return traj;
}

double ScalarPath::at(const std::vector<double>& v, double t) const {
    if (times.empty()) return 0.0;
    if (t <= times.front()) return v.front();
    if (t >= times.back()) return v.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto k = static_cast<std::size_t>(it - times.begin()) - 1;
    const double w = (t - times[k]) / (times[k + 1] - times[k]);
    return v[k] + w * (v[k + 1] - v[k]);
}

PdeSolution solve_pde(const ModelSpec& spec, const SquareCoupling& sc, double horizon,
                      const std::vector<double>& deltas, const SchemeOptions& opt,
                      const std::vector<double>& obs_times, bool with_neighbours) {
    if (deltas.empty()) throw std::invalid_argument("solve_pde: empty delta sequence");
    for (std::size_t k = 1; k < deltas.size(); ++k)
        if (std::abs(deltas[k] * 2.0 - deltas[k - 1]) > 1e-12 * deltas[k - 1])
            throw std::invalid_argument("solve_pde: delta sequence must halve at each level");
    PdeSolution sol;
    sol.obs_times = obs_times;
    for (double d : deltas) sol.levels.push_back(run_scheme(spec, sc, d, horizon, opt, obs_times, with_neighbours));

    const std::size_t L = sol.levels.size();
    const SchemeTrajectory& fine = sol.levels.back();
    const SchemeTrajectory* coarse = L > 1 ? &sol.levels[L - 2] : nullptr;
    auto extrap = [&](const std::vector<std::vector<double>> SchemeTrajectory::*field, double t) {
        const auto& vf = (fine.*field)[fine.step_of(t)];
        if (coarse == nullptr) return vf;
        const auto& vc = (coarse->*field)[coarse->step_of(t)];
        std::vector<double> out(vf.size());
        for (std::size_t m = 0; m < vf.size(); ++m) out[m] = 2.0 * vf[m] - vc[m];
        return out;
    };
    for (double t : obs_times) {
        sol.ubar.push_back(extrap(&SchemeTrajectory::ubar, t));
        sol.p.push_back(extrap(&SchemeTrajectory::p, t));
        sol.q.push_back(extrap(&SchemeTrajectory::q, t));
        sol.ustar.push_back(extrap(&SchemeTrajectory::ustar, t));
        sol.boundary.push_back(extrap(&SchemeTrajectory::boundary, t));
        sol.jump.push_back(extrap(&SchemeTrajectory::jump, t));
    }

    const SchemeTrajectory& base = coarse ? *coarse : fine;
    const std::size_t M = sc.size();
    sol.paths.assign(M, {});
    for (std::size_t n = 0; n < base.times.size(); ++n) {
        const double t = base.times[n];
        const auto ub = extrap(&SchemeTrajectory::ubar, t);
        const auto pp = extrap(&SchemeTrajectory::p, t);
        const auto qq = extrap(&SchemeTrajectory::q, t);
        for (std::size_t m = 0; m < M; ++m) {
            sol.paths[m].times.push_back(t);
            sol.paths[m].ubar.push_back(ub[m]);
            sol.paths[m].p.push_back(pp[m]);
            sol.paths[m].q.push_back(qq[m]);
        }
    }

    for (std::size_t k = 0; k + 1 < L; ++k) {
        double worst = 0.0;
        for (double t : obs_times)
            worst = std::max(worst, l1_distance(sol.levels[k + 1].at(t), sol.levels[k].at(t)));
        sol.level_l1.push_back(worst);
    }
    for (std::size_t k = 1; k < sol.level_l1.size(); ++k)
        if (!(sol.level_l1[k] < sol.level_l1[k - 1])) sol.convergent = false;

    for (std::size_t m = 0; m < M; ++m) sol.closed_forms.emplace_back(spec, sc.lambda[m], sc.centers[m], sol.paths[m]);
    return sol;
}

}  // namespace hydroneuro
