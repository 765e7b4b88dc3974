#include "hydroneuro/auxcouple.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hydroneuro/rng.hpp"
#include "hydroneuro/stats.hpp"

namespace hydroneuro {

namespace {

std::size_t checked_ratio(double num, double den, const char* what) {
    if (!(num > 0.0) || !(den > 0.0)) throw std::invalid_argument(std::string(what) + ": values must be positive");
    const double q = num / den;
    const double k = std::round(q);
    if (k < 1.0 || std::abs(k * den - num) > 1e-9 * std::max(1.0, num))
        throw std::invalid_argument(std::string(what) + " is not an integer (" + std::to_string(q) + ")");
    return static_cast<std::size_t>(k);
}

}  // namespace

PartitionSpec::PartitionSpec(const PartitionConfig& cfg, double support) : cfg_(cfg), support_(support) {
    time_bins_ = checked_ratio(cfg.delta, cfg.tau, "delta/tau");
    potential_bins_ = checked_ratio(support, cfg.ebin, "R0/E");
    side_ = reciprocal_count(cfg.ell, "ell");
    centers_.reserve(side_ * side_);
    for (std::size_t mx = 0; mx < side_; ++mx)
        for (std::size_t my = 0; my < side_; ++my)
            centers_.push_back({(static_cast<double>(mx) + 0.5) * cfg.ell, (static_cast<double>(my) + 0.5) * cfg.ell});
}

PartitionSpec::PartitionSpec(const PartitionConfig& cfg, double support, const Mesh& mesh)
    : PartitionSpec(cfg, support) {
    checked_ratio(cfg.ell, mesh.epsilon(), "ell/epsilon");
    square_sites_.assign(square_count(), {});
    site_square_.resize(mesh.count());
    for (std::size_t i = 0; i < mesh.count(); ++i) {
        const std::size_t m = square_of(mesh.site(i));
        site_square_[i] = m;
        square_sites_[m].push_back(i);
    }
}

std::size_t PartitionSpec::square_of(Point r) const {
    auto idx = [&](double x) {
        auto k = static_cast<std::size_t>(std::floor(x / cfg_.ell + 1e-9));
        return std::min(k, side_ - 1);
    };
    return idx(r.x) * side_ + idx(r.y);
}

std::size_t PartitionSpec::time_bin(double s) const {
    const double tau = cfg_.tau;
    auto k = static_cast<long>(std::floor(s / tau));
    if (static_cast<double>(k + 1) * tau <= s) ++k;
    if (static_cast<double>(k) * tau > s) --k;
    k = std::clamp(k, 0L, static_cast<long>(time_bins_) - 1);
    return time_bins_ - static_cast<std::size_t>(k);
}

std::size_t PartitionSpec::potential_bin(double u) const {
    if (u < 0.0) throw std::invalid_argument("negative potential cannot be binned");
    auto k = static_cast<std::size_t>(std::floor(u / cfg_.ebin));
    if (static_cast<double>(k + 1) * cfg_.ebin <= u) ++k;
    return std::min(k, potential_bins_ - 1);
}

double SquareCoupling::flow(std::size_t m, double t, double y, double ybar) const {
    const double k = kappa[m];
    const double w = k * t < 1e-12 ? lambda[m] * t : lambda[m] / k * (-std::expm1(-k * t));
    return std::exp(-k * t) * y + w * ybar;
}

SquareCoupling square_coupling(const ModelSpec& spec, double ell) {
    SquareCoupling sc;
    sc.ell = ell;
    const std::size_t side = reciprocal_count(ell, "ell");
    for (std::size_t mx = 0; mx < side; ++mx)
        for (std::size_t my = 0; my < side; ++my)
            sc.centers.push_back({(static_cast<double>(mx) + 0.5) * ell, (static_cast<double>(my) + 0.5) * ell});
    const std::size_t n = sc.centers.size();
    const auto N = static_cast<Eigen::Index>(n);
    const double l2 = ell * ell;
    sc.bw.resize(N, N);
    sc.aw.resize(N, N);
    sc.lambda.resize(n);
    sc.kappa.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += spec.raw_b.profile(sc.centers[m], sc.centers[k]);
        sc.lambda[m] = l2 * s;
        if (!(sc.lambda[m] > 0.0)) throw std::invalid_argument("gap kernel vanishes on a square row");
        sc.kappa[m] = spec.alpha + sc.lambda[m];
        for (std::size_t k = 0; k < n; ++k) {
            const auto mm = static_cast<Eigen::Index>(m);
            const auto kk = static_cast<Eigen::Index>(k);
            sc.bw(mm, kk) = l2 * spec.raw_b.profile(sc.centers[m], sc.centers[k]) / sc.lambda[m];
            sc.aw(mm, kk) = l2 * spec.a.profile(sc.centers[m], sc.centers[k]);
        }
    }
    return sc;
}

void update_square_averages(AuxState& y, const PartitionSpec& part, const SquareCoupling& sc) {
    const std::size_t M = part.square_count();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M));
    for (std::size_t m = 0; m < M; ++m) {
        const auto& sites = part.square_sites()[m];
        double s = 0.0;
        for (auto i : sites) s += y.potentials[i];
        mean(static_cast<Eigen::Index>(m)) = s / static_cast<double>(sites.size());
    }
    const Eigen::VectorXd avg = sc.bw * mean;
    y.square_average.assign(avg.data(), avg.data() + avg.size());
}

AuxState bin_initial(const std::vector<double>& u0, const PartitionSpec& part, const SquareCoupling& sc) {
    if (sc.size() != part.square_count()) throw std::invalid_argument("bin_initial: square grids differ");
    AuxState y;
    const std::size_t K = part.potential_bins();
    y.potentials.resize(u0.size());
    y.level.resize(u0.size());
    for (std::size_t i = 0; i < u0.size(); ++i) {
        if (u0[i] > part.support() + 1e-12)
            throw std::invalid_argument("bin_initial: potential " + std::to_string(u0[i]) + " exceeds R0");
        const std::size_t k = part.potential_bin(u0[i]);
        y.level[i] = k;
        y.potentials[i] = part.bin_center(k);
    }
    std::vector<double> centers(K);
    for (std::size_t k = 0; k < K; ++k) centers[k] = part.bin_center(k);
    y.levels.assign(part.square_count(), centers);
    update_square_averages(y, part, sc);
    return y;
}

void apply_aux_update(AuxState& y, const std::vector<std::size_t>& spike_bin, const PartitionSpec& part,
                      const SquareCoupling& sc, double epsilon) {
    const std::size_t M = part.square_count();
    const std::size_t H = part.time_bins();
    const auto& site_square = part.site_square();
    // cum(m, h) = Σ_{s < h} N(m, s), h = 1..H+1 stored at index h-1.
    std::vector<std::vector<double>> cum(M, std::vector<double>(H + 1, 0.0));
    y.last_spikes = 0;
    for (std::size_t i = 0; i < spike_bin.size(); ++i) {
        if (spike_bin[i] == 0) continue;
        ++y.last_spikes;
        for (std::size_t h = spike_bin[i] + 1; h <= H + 1; ++h) cum[site_square[i]][h - 1] += 1.0;
    }
    const double scale = epsilon * epsilon / (sc.ell * sc.ell);
    const double delta = part.delta();
    const double tau = part.tau();
    for (std::size_t m = 0; m < M; ++m) {
        std::vector<double> S(H + 1, 0.0);  // S[h-1] = S(m,h), S[H] = S(m,δ)
        for (std::size_t h = 0; h <= H; ++h) {
            double s = 0.0;
            for (std::size_t mp = 0; mp < M; ++mp)
                s += sc.aw(static_cast<Eigen::Index>(mp), static_cast<Eigen::Index>(m)) * cum[mp][h];
            S[h] = scale * s;
        }
        const double ybar = y.square_average[m];
        std::vector<double> next;
        next.reserve(H + y.levels[m].size());
        for (std::size_t h = 1; h <= H; ++h)
            next.push_back(sc.flow(m, static_cast<double>(h - 1) * tau, 0.0, ybar) + S[h - 1]);
        for (double e : y.levels[m]) next.push_back(sc.flow(m, delta, e, ybar) + S[H]);
        y.levels[m] = std::move(next);
    }
    for (std::size_t i = 0; i < y.potentials.size(); ++i) {
        y.level[i] = spike_bin[i] == 0 ? y.level[i] + H : spike_bin[i] - 1;
        y.potentials[i] = y.levels[site_square[i]][y.level[i]];
    }
    ++y.step;
    update_square_averages(y, part, sc);
}

AuxStepStats aux_step(AuxState& y, const PartitionSpec& part, const SquareCoupling& sc, const ModelSpec& spec,
                      std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = y.potentials.size();
    const auto& site_square = part.site_square();
    AuxStepStats stats;
    stats.counts.assign(part.square_count(), std::vector<std::size_t>(part.time_bins(), 0));
    std::vector<std::size_t> bins(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t m = site_square[i];
        const double xi = rng.exponential(spec.phi(y.potentials[i], part.center(m)));
        if (xi < part.delta()) {
            bins[i] = part.time_bin(xi);
            stats.counts[m][bins[i] - 1]++;
            ++stats.spikes;
        }
    }
    apply_aux_update(y, bins, part, sc, spec.mesh.epsilon());
    return stats;
}

CouplingLedger start_coupling(const NetworkState& u, const AuxState& y) {
    CouplingLedger led;
    led.good.assign(u.potentials.size(), 1);
    for (std::size_t i = 0; i < u.potentials.size(); ++i)
        led.theta = std::max(led.theta, std::abs(u.potentials[i] - y.potentials[i]));
    led.theta_history.push_back(led.theta);
    led.bad_history.push_back(0);
    led.good_history.push_back(u.potentials.size());
    return led;
}

CoupledStepStats coupled_step(const NetworkDynamics& dyn, NetworkState& u, AuxState& y, CouplingLedger& ledger,
                              const PartitionSpec& part, const SquareCoupling& sc, std::uint64_t seed,
                              double substep) {
    const ModelSpec& spec = dyn.spec();
    const double delta = part.delta();
    if (std::abs(u.clock - static_cast<double>(y.step) * delta) > 1e-9 * std::max(1.0, u.clock))
        throw std::invalid_argument("coupled_step: true clock and auxiliary step index disagree");
    if (u.potentials.size() != y.potentials.size() || ledger.good.size() != u.potentials.size())
        throw std::invalid_argument("coupled_step: state sizes differ");
    if (substep <= 0.0) substep = dyn.default_substep();

    const std::size_t n = u.potentials.size();
    const auto& sites = spec.mesh.sites();
    const auto& site_square = part.site_square();
    const double phi_star = spec.phi.sup_bound();
    std::vector<double> aux_rate(n);
    for (std::size_t i = 0; i < n; ++i) aux_rate[i] = spec.phi(y.potentials[i], part.center(site_square[i]));

    std::vector<char> q(n, 0), f1(n, 0), f2(n, 0), fxi(n, 0);
    std::vector<std::size_t> beta(n, 0);
    CoupledStepStats st;
    const double t0 = u.clock;
    const double t_end = t0 + delta;
    const std::size_t spikes_before = u.event_log.size();
    dyn.refresh_averages(u);

    if (phi_star > 0.0) {
        Rng rng(seed);
        const double total = static_cast<double>(n) * phi_star;
        double t = t0;
        for (;;) {
            const double gap = rng.exponential(total);
            const std::size_t i = rng.index(n);
            const double w = rng.uniform();
            const double cand = t + gap;
            if (cand >= t_end) break;
            ++st.proposals;
            dyn.flow(u, cand - u.clock, substep);
            u.clock = cand;
            t = cand;
            const double a = spec.phi(u.potentials[i], sites[i]);
            const double b = aux_rate[i];
            const double thr = w * phi_star;
            if (!q[i]) {
                const double lo = std::min(a, b);
                const double hi = std::max(a, b);
                if (thr < lo) {
                    f1[i] = 1;
                    q[i] = 1;
                    beta[i] = part.time_bin(cand - t0);
                    dyn.spike(u, i);
                    ++st.shared;
                } else if (thr < hi) {
                    f2[i] = 1;
                    if (a > b) {
                        dyn.spike(u, i);
                        ++st.true_only;
                    } else {
                        q[i] = 1;
                        beta[i] = part.time_bin(cand - t0);
                        ++st.aux_only;
                    }
                }
            } else if (thr < a) {
                dyn.spike(u, i);
                if (f1[i]) fxi[i] = 1;
                ++st.true_after;
            }
        }
    }
    dyn.flow(u, t_end - u.clock, substep);
    u.clock = t_end;

    std::vector<std::size_t> bins(n, 0);
    for (std::size_t i = 0; i < n; ++i) bins[i] = q[i] ? beta[i] : 0;
    apply_aux_update(y, bins, part, sc, spec.mesh.epsilon());

    std::size_t good = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (f2[i] || (f1[i] && fxi[i])) ledger.good[i] = 0;
        if (ledger.good[i]) {
            ++good;
            ledger.theta = std::max(ledger.theta, std::abs(u.potentials[i] - y.potentials[i]));
        }
    }
    ledger.theta_history.push_back(ledger.theta);
    ledger.good_history.push_back(good);
    ledger.bad_history.push_back(n - good);
    ledger.window_spikes.push_back(u.event_log.size() - spikes_before);
    return st;
}

CouplingRun run_coupling(const NetworkDynamics& dyn, const PartitionSpec& part, const SquareCoupling& sc,
                         double horizon, std::uint64_t seed, double substep) {
    const ModelSpec& spec = dyn.spec();
    NetworkState u = sample_initial_state(spec, derive_seed(seed, StreamTag::initial, 0));
    AuxState y = bin_initial(u.potentials, part, sc);
    CouplingRun run;
    run.ledger = start_coupling(u, y);
    const auto steps = static_cast<std::size_t>(std::llround(horizon / part.delta()));
    const double eps2 = spec.mesh.epsilon() * spec.mesh.epsilon();
    const double guard = 2.0 * spec.phi.sup_bound() * part.delta() / eps2;
    for (std::size_t k = 0; k < steps; ++k) {
        coupled_step(dyn, u, y, run.ledger, part, sc, derive_seed(seed, StreamTag::coupling, k), substep);
        if (static_cast<double>(run.ledger.window_spikes.back()) > guard) ++run.guard_violations;
    }
    run.theta_max = run.ledger.theta;
    for (auto b : run.ledger.bad_history) run.bad_fraction_max = std::max(run.bad_fraction_max, eps2 * static_cast<double>(b));
    return run;
}

CouplingReport coupling_report(const std::vector<double>& deltas, const std::vector<std::vector<CouplingRun>>& runs,
                               double) {
    if (deltas.size() != runs.size()) throw std::invalid_argument("coupling_report: one run set per delta expected");
    CouplingReport rep;
    rep.delta = deltas;
    for (const auto& set : runs) {
        std::vector<double> th, bad;
        for (const auto& r : set) {
            th.push_back(r.theta_max);
            bad.push_back(r.bad_fraction_max);
        }
        const auto a = mean_stderr(th);
        const auto b = mean_stderr(bad);
        rep.theta_max_mean.push_back(a.mean);
        rep.theta_max_stderr.push_back(a.stderr_);
        rep.bad_max_mean.push_back(b.mean);
        rep.bad_max_stderr.push_back(b.stderr_);
    }
    rep.theta_slope = loglog_slope(rep.delta, rep.theta_max_mean);
    rep.bad_slope = loglog_slope(rep.delta, rep.bad_max_mean);
    return rep;
}

}  // namespace hydroneuro
