#include "hydroneuro/metrics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hydroneuro/auxcouple.hpp"
#include "hydroneuro/parallel.hpp"
#include "hydroneuro/rng.hpp"
#include "hydroneuro/stats.hpp"

namespace hydroneuro {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::vector<BlTest> build_library() {
    auto hat = [](double c, double w) {
        return [c, w](double u) { return std::max(0.0, 1.0 - std::abs(u - c) / w); };
    };
    const std::vector<std::function<double(double)>> us = {
        [](double) { return 1.0; },
        [](double u) { return std::sin(u) / 2.0; },
        [](double u) { return std::cos(u) / 2.0; },
        [](double u) { return std::sin(2.0 * u) / 4.0; },
        [](double u) { return std::cos(2.0 * u) / 4.0; },
        hat(0.5, 2.0),
        hat(1.5, 2.0),
        [](double u) { return std::min(u, 2.0) / 2.0; },
    };
    const double s = 1.0 / (2.0 * two_pi);
    const std::vector<std::function<double(Point)>> rs = {
        [](Point) { return 1.0; },
        [s](Point p) { return s * std::cos(two_pi * p.x); },
        [s](Point p) { return s * std::cos(two_pi * p.y); },
        [s](Point p) { return s / std::numbers::sqrt2 * std::sin(two_pi * (p.x + p.y)); },
    };
    std::vector<BlTest> lib;
    for (std::size_t i = 0; i < us.size(); ++i)
        for (std::size_t j = 0; j < rs.size(); ++j) lib.push_back({us[i], rs[j], i, j});
    return lib;
}

double square_integral(const std::function<double(Point)>& g, Point c, double ell) {
    using Gauss = boost::math::quadrature::gauss<double, 10>;
    const double h = ell / 2.0;
    return Gauss::integrate(
        [&](double x) {
            return Gauss::integrate([&](double y) { return g({x, y}); }, c.y - h, c.y + h);
        },
        c.x - h, c.x + h);
}

double max_gap(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, std::abs(a[j] - b[j]));
    return d;
}

}  // namespace

const std::vector<BlTest>& bl_library() {
    static const std::vector<BlTest> lib = build_library();
    return lib;
}

std::vector<double> bl_pairings(const EmpiricalMeasure& mu) {
    const auto& lib = bl_library();
    std::vector<double> out(lib.size(), 0.0);
    for (std::size_t k = 0; k < mu.size(); ++k)
        for (std::size_t j = 0; j < lib.size(); ++j) out[j] += mu.weight[k] * lib[j](mu.u[k], mu.r[k]);
    return out;
}

std::vector<double> bl_pairings(const DensityField& f) {
    const auto& lib = bl_library();
    const std::size_t nu = 8;
    const std::size_t nr = 4;
    std::vector<double> out(lib.size(), 0.0);
    for (std::size_t m = 0; m < f.size(); ++m) {
        std::vector<double> ui(nu), ri(nr);
        for (std::size_t j = 0; j < lib.size(); ++j) {
            const auto& t = lib[j];
            if (t.r_index == 0) ui[t.u_index] = f.profiles[m].integrate(t.u);
            if (t.u_index == 0) ri[t.r_index] = square_integral(t.r, f.centers[m], f.ell);
        }
        for (std::size_t j = 0; j < lib.size(); ++j) out[j] += ui[lib[j].u_index] * ri[lib[j].r_index];
    }
    return out;
}

double bl_distance(const EmpiricalMeasure& mu, const DensityField& f) {
    return max_gap(bl_pairings(mu), bl_pairings(f));
}

double bl_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    return max_gap(bl_pairings(a), bl_pairings(b));
}

double bl_distance(const DensityField& a, const DensityField& b) { return max_gap(bl_pairings(a), bl_pairings(b)); }

// ------------------------------------------------------------------ oracle

OracleResult one_particle_oracle(const ModelSpec& spec, const ScalarPath& path, double lambda, Point r,
                                 std::size_t replicas, const std::vector<double>& times, std::uint64_t seed,
                                 std::size_t threads) {
    std::vector<double> obs = times;
    std::sort(obs.begin(), obs.end());
    const CharacteristicFlow flow(lambda, spec.alpha, path);
    const InverseCdf inv(spec.psi0, r);
    const double phi_star = spec.phi.sup_bound();

    struct Path {
        std::vector<double> u;
        bool reset = false;
        std::vector<char> reset_by;
    };
    auto run = [&](std::size_t k) {
        Rng rng(derive_seed(seed, StreamTag::oracle, k));
        Path out;
        out.u.resize(obs.size());
        out.reset_by.assign(obs.size(), 0);
        double t = 0.0;
        double u = inv(rng.uniform());
        std::size_t next = 0;
        const double t_end = obs.empty() ? 0.0 : obs.back();
        for (;;) {
            const double cand = phi_star > 0.0 ? t + rng.exponential(phi_star) : t_end + 1.0;
            while (next < obs.size() && obs[next] <= std::min(cand, t_end)) {
                out.u[next] = flow(t, obs[next], u);
                out.reset_by[next] = out.reset;
                ++next;
            }
            if (cand > t_end) break;
            u = flow(t, cand, u);
            t = cand;
            if (rng.uniform() * phi_star < spec.phi(u, r)) {
                u = 0.0;
                out.reset = true;
            }
        }
        return out;
    };
    const auto paths = parallel_map(replicas, run, threads);

    OracleResult res;
    res.times = obs;
    res.samples.assign(obs.size(), std::vector<double>(replicas));
    res.resets.assign(obs.size(), 0);
    for (std::size_t k = 0; k < replicas; ++k)
        for (std::size_t j = 0; j < obs.size(); ++j) {
            res.samples[j][k] = paths[k].u[j];
            res.resets[j] += paths[k].reset_by[j] ? 1 : 0;
        }
    return res;
}

std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
    if (bins == 0 || !(hi > lo)) throw std::invalid_argument("uniform_edges: need hi > lo and bins > 0");
    std::vector<double> e(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k) e[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
    return e;
}

std::vector<double> histogram_masses(const std::vector<double>& samples, const std::vector<double>& edges) {
    const std::size_t bins = edges.size() - 1;
    std::vector<double> h(bins, 0.0);
    if (samples.empty()) return h;
    const double w = 1.0 / static_cast<double>(samples.size());
    for (double x : samples) {
        auto it = std::upper_bound(edges.begin(), edges.end(), x);
        std::size_t k = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
        h[std::min(k, bins - 1)] += w;
    }
    return h;
}

std::vector<double> bin_masses(const DensityProfile& p, const std::vector<double>& edges) {
    const std::size_t bins = edges.size() - 1;
    std::vector<double> out(bins, 0.0);
    auto cumulative = [&](double x) {
        double s = 0.0;
        for (std::size_t k = 0; k + 1 < p.u.size(); ++k) {
            const double a = p.u[k];
            const double b = std::min(p.u[k + 1], x);
            if (b <= a) {
                if (p.u[k] >= x) break;
                continue;
            }
            const double h = p.u[k + 1] - p.u[k];
            const double rb = p.rho[k] + (p.rho[k + 1] - p.rho[k]) * (b - a) / h;
            s += 0.5 * (b - a) * (p.rho[k] + rb);
        }
        return s;
    };
    double prev = cumulative(edges.front());
    for (std::size_t k = 0; k < bins; ++k) {
        const double next = k + 1 == bins ? p.mass() : cumulative(edges[k + 1]);
        out[k] = next - prev;
        prev = next;
    }
    return out;
}

// ------------------------------------------------------- convergence study

const ConvergenceCell& ConvergenceReport::cell(double epsilon, double time) const {
    for (const auto& c : cells)
        if (std::abs(c.epsilon - epsilon) < 1e-12 && std::abs(c.time - time) < 1e-12) return c;
    throw std::out_of_range("no convergence cell for the requested (epsilon, time)");
}

ConvergenceReport convergence_study(const ModelConfig& base, const ConvergenceOptions& opt) {
    const auto start = std::chrono::steady_clock::now();
    if (opt.epsilons.empty()) throw std::invalid_argument("convergence_study: empty epsilon list");
    std::vector<double> eps = opt.epsilons;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    eps.erase(std::unique(eps.begin(), eps.end()), eps.end());

    ConvergenceReport rep;
    rep.seed = opt.seed;
    const double step = opt.horizon / std::ldexp(1.0, static_cast<int>(opt.dyadic_level));
    for (std::size_t k = 0; k <= (std::size_t{1} << opt.dyadic_level); ++k) rep.times.push_back(step * static_cast<double>(k));

    ModelConfig limit_cfg = base;
    limit_cfg.epsilon = opt.ell;
    const ModelSpec limit_spec = build_model(limit_cfg);
    const SquareCoupling sc = square_coupling(limit_spec, opt.ell);
    const SchemeTrajectory traj = run_scheme(limit_spec, sc, opt.deltas.back(), opt.horizon, opt.scheme, rep.times);
    std::vector<std::vector<double>> field_pairings;
    for (double t : rep.times) field_pairings.push_back(bl_pairings(traj.at(t)));

    for (double e : eps) {
        ModelConfig cfg = base;
        cfg.epsilon = e;
        const auto side = reciprocal_count(e, "epsilon");
        if (side * side > NetworkDynamics::max_sites) {
            for (double t : rep.times)
                rep.cells.push_back({e, t, 0, 0.0, 0.0, true, "skipped: mesh exceeds the dense-operator guard"});
            continue;
        }
        const ModelSpec spec = build_model(cfg);
        const NetworkDynamics dyn(spec);
        auto replica = [&](std::size_t k) {
            NetworkState s0 = sample_initial_state(spec, derive_seed(opt.seed, StreamTag::initial, k));
            std::vector<double> d;
            SimulationOptions so;
            so.substep = opt.substep;
            so.observe_times = rep.times;
            so.observer = [&](const NetworkState& s) {
                const auto pm = bl_pairings(empirical_measure(s, spec.mesh));
                d.push_back(max_gap(pm, field_pairings[d.size()]));
            };
            simulate(dyn, std::move(s0), opt.horizon, derive_seed(opt.seed, StreamTag::dynamics, k), so);
            return d;
        };
        const auto dist = parallel_map(opt.replicas, replica, opt.threads);
        for (std::size_t j = 0; j < rep.times.size(); ++j) {
            std::vector<double> xs;
            for (const auto& d : dist) xs.push_back(d.at(j));
            const auto ms = mean_stderr(xs);
            rep.cells.push_back({e, rep.times[j], opt.replicas, ms.mean, ms.stderr_, false, ""});
        }
    }
    for (double t : rep.times) {
        std::vector<double> x, y;
        for (const auto& c : rep.cells)
            if (!c.skipped && c.time == t) {
                x.push_back(c.epsilon);
                y.push_back(c.mean);
            }
        rep.slope.push_back(loglog_slope(x, y));
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

// ------------------------------------------------------------- bound audit

AuditReport bound_audit(const std::vector<SimulationResult>& runs, const ModelSpec& spec, double horizon,
                        double window) {
    AuditReport rep;
    rep.replicas = runs.size();
    const double eps2 = spec.mesh.epsilon() * spec.mesh.epsilon();
    const double phi_star = spec.phi.sup_bound();
    const double a_star = spec.a_star();
    std::size_t total_over = 0, windows = 0, window_over = 0;
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const auto& r = runs[k];
        const auto N = r.state.event_log.size();
        rep.spike_counts.push_back(N);
        const double bound = r.initial_sup + a_star * eps2 * static_cast<double>(N);
        if (r.sup_potential > bound * (1.0 + 1e-12) + 1e-12)
            throw std::logic_error("bound_audit: replica " + std::to_string(k) + " has sup potential " +
                                   std::to_string(r.sup_potential) + " above the path bound " + std::to_string(bound));
        ++rep.path_bound_holds;
        if (static_cast<double>(N) > 2.0 * phi_star * horizon / eps2) ++total_over;
        if (window > 0.0) {
            const double cap = 2.0 * phi_star * window / eps2;
            for (auto c : r.window_counts) {
                ++windows;
                if (static_cast<double>(c) > cap) ++window_over;
                if (cap > 0.0) rep.max_window_ratio = std::max(rep.max_window_ratio, static_cast<double>(c) / cap);
            }
        }
    }
    if (!runs.empty()) rep.total_over_fraction = static_cast<double>(total_over) / static_cast<double>(runs.size());
    if (windows > 0) rep.window_over_fraction = static_cast<double>(window_over) / static_cast<double>(windows);
    return rep;
}

}  // namespace hydroneuro
