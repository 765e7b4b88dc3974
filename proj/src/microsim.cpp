#include "hydroneuro/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hydroneuro/rng.hpp"

namespace hydroneuro {

namespace {

// (λ/κ)(1 - e^{-κh}), continuous as κ -> 0.
double relaxation_weight(double lambda, double kappa, double h) {
    if (kappa * h < 1e-12) return lambda * h;
    return lambda / kappa * (-std::expm1(-kappa * h));
}

}  // namespace

NetworkDynamics::NetworkDynamics(const ModelSpec& spec) : spec_(spec), n_(spec.mesh.count()) {
    if (n_ > max_sites)
        throw std::invalid_argument("mesh with " + std::to_string(n_) + " sites exceeds the dense limit of " +
                                    std::to_string(max_sites));
    const auto& sites = spec.mesh.sites();
    const double eps2 = spec.mesh.epsilon() * spec.mesh.epsilon();
    W_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    D_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    lambda_ = spec.lambda;
    kappa_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        kappa_[i] = spec.alpha + lambda_[i];
        for (std::size_t j = 0; j < n_; ++j) {
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            W_(ii, jj) = lambda_[i] > 0.0 ? eps2 * spec.raw_b(sites[i], sites[j]) / lambda_[i] : 0.0;
            D_(ii, jj) = eps2 * spec.a(sites[i], sites[j]);
        }
    }
    M_ = W_ * D_.transpose();
    uniform_kappa_ = std::all_of(kappa_.begin(), kappa_.end(), [&](double k) { return k == kappa_[0]; });
}

double NetworkDynamics::default_substep() const {
    const double lmax = lambda_.empty() ? 0.0 : *std::max_element(lambda_.begin(), lambda_.end());
    const double k = spec_.alpha + lmax;
    return k > 0.0 ? std::min(0.01, 0.1 / k) : 0.01;
}

void NetworkDynamics::refresh_averages(NetworkState& s) const {
    s.local_averages.resize(n_);
    Eigen::Map<const Eigen::VectorXd> u(s.potentials.data(), static_cast<Eigen::Index>(n_));
    Eigen::Map<Eigen::VectorXd> ubar(s.local_averages.data(), static_cast<Eigen::Index>(n_));
    ubar.noalias() = W_ * u;
    s.events_since_refresh = 0;
}

void NetworkDynamics::flow(NetworkState& s, double dt, double substep) const {
    if (dt <= 0.0) return;
    if (substep <= 0.0) substep = default_substep();
    if (s.local_averages.size() != n_) refresh_averages(s);
    const auto nsub = static_cast<std::size_t>(std::max(1.0, std::ceil(dt / substep - 1e-12)));
    const double h = dt / static_cast<double>(nsub);
    std::vector<double> decay(uniform_kappa_ ? 1 : n_);
    std::vector<double> pull(decay.size());
    for (std::size_t i = 0; i < decay.size(); ++i) {
        decay[i] = std::exp(-kappa_[i] * h);
        pull[i] = relaxation_weight(lambda_[i], kappa_[i], h);
    }
    for (std::size_t k = 0; k < nsub; ++k) {
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t c = uniform_kappa_ ? 0 : i;
            s.potentials[i] = decay[c] * s.potentials[i] + pull[c] * s.local_averages[i];
        }
        refresh_averages(s);
    }
    s.clock += dt;
}

void NetworkDynamics::spike(NetworkState& s, std::size_t i) const {
    if (s.local_averages.size() != n_) refresh_averages(s);
    const double pre = s.potentials[i];
    s.event_log.push_back({s.clock, i, pre});
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < n_; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (j != i) s.potentials[j] += D_(ii, jj);
        s.local_averages[j] += M_(jj, ii) - W_(jj, ii) * pre;
    }
    s.potentials[i] = 0.0;
    if (++s.events_since_refresh >= refresh_interval) refresh_averages(s);
}

NetworkState sample_initial_state(const ModelSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    NetworkState s;
    const auto& sites = spec.mesh.sites();
    s.potentials.resize(sites.size());
    if (spec.psi0.position_independent()) {
        InverseCdf inv(spec.psi0, sites.front());
        for (auto& u : s.potentials) u = inv(rng.uniform());
    } else {
        for (std::size_t i = 0; i < sites.size(); ++i) {
            InverseCdf inv(spec.psi0, sites[i]);
            s.potentials[i] = inv(rng.uniform());
        }
    }
    return s;
}

NetworkState flow(const ModelSpec& spec, NetworkState state, double dt, double substep) {
    NetworkDynamics dyn(spec);
    dyn.refresh_averages(state);
    dyn.flow(state, dt, substep);
    return state;
}

NetworkState exact_flow(const ModelSpec& spec, NetworkState state, double dt) {
    const std::size_t n = spec.mesh.count();
    if (n > NetworkDynamics::max_sites) throw std::invalid_argument("exact_flow: mesh too large for a dense solve");
    const auto& sites = spec.mesh.sites();
    const double eps2 = spec.mesh.epsilon() * spec.mesh.epsilon();
    const auto N = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd A(N, N);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                i == j ? -spec.alpha - spec.lambda[i] : eps2 * spec.raw_b(sites[i], sites[j]);
    Eigen::MatrixXd S = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    const Eigen::VectorXd ex = (eig.eigenvalues() * dt).array().exp().matrix();
    Eigen::Map<Eigen::VectorXd> u(state.potentials.data(), N);
    const Eigen::VectorXd next = eig.eigenvectors() * ex.asDiagonal() * (eig.eigenvectors().transpose() * u);
    u = next;
    state.clock += dt;
    state.local_averages.clear();
    return state;
}

SimulationResult simulate(const NetworkDynamics& dyn, NetworkState state, double horizon, std::uint64_t seed,
                          const SimulationOptions& opt) {
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate: horizon must be positive");
    const ModelSpec& spec = dyn.spec();
    const auto& sites = spec.mesh.sites();
    const std::size_t n = dyn.size();
    const double substep = opt.substep > 0.0 ? opt.substep : dyn.default_substep();
    const double phi_star = spec.phi.sup_bound();
    const double t0 = state.clock;
    const double t_end = t0 + horizon;

    SimulationResult res;
    dyn.refresh_averages(state);
    res.initial_sup = state.potentials.empty() ? 0.0 : *std::max_element(state.potentials.begin(), state.potentials.end());
    res.sup_potential = res.initial_sup;
    if (opt.window > 0.0)
        res.window_counts.assign(static_cast<std::size_t>(std::ceil(horizon / opt.window - 1e-9)), 0);

    std::vector<double> obs = opt.observe_times;
    std::sort(obs.begin(), obs.end());
    std::size_t next_obs = 0;
    while (next_obs < obs.size() && obs[next_obs] < t0) ++next_obs;

    auto advance_to = [&](double target) {
        while (next_obs < obs.size() && obs[next_obs] <= target) {
            dyn.flow(state, obs[next_obs] - state.clock, substep);
            state.clock = obs[next_obs];
            if (opt.observer) opt.observer(state);
            ++next_obs;
        }
        dyn.flow(state, target - state.clock, substep);
        state.clock = target;
    };

    if (phi_star <= 0.0) {
        advance_to(t_end);
        res.state = std::move(state);
        return res;
    }

    Rng rng(seed);
    const double total_rate = static_cast<double>(n) * phi_star;
    double t = t0;
    for (;;) {
        const double gap = rng.exponential(total_rate);
        const std::size_t i = rng.index(n);
        const double w = rng.uniform();
        const double cand = t + gap;
        if (cand > t_end) break;
        ++res.proposals;
        advance_to(cand);
        t = cand;
        if (w * phi_star < spec.phi(state.potentials[i], sites[i])) {
            dyn.spike(state, i);
            const double mx = *std::max_element(state.potentials.begin(), state.potentials.end());
            res.sup_potential = std::max(res.sup_potential, mx);
            if (!res.window_counts.empty()) {
                auto k = static_cast<std::size_t>((cand - t0) / opt.window);
                res.window_counts[std::min(k, res.window_counts.size() - 1)]++;
            }
        }
    }
    advance_to(t_end);
    res.state = std::move(state);
    return res;
}

SimulationResult simulate(const ModelSpec& spec, NetworkState state, double horizon, std::uint64_t seed,
                          const SimulationOptions& options) {
    NetworkDynamics dyn(spec);
    return simulate(dyn, std::move(state), horizon, seed, options);
}

EmpiricalMeasure empirical_measure(const NetworkState& state, const Mesh& mesh) {
    EmpiricalMeasure mu;
    const double w = mesh.epsilon() * mesh.epsilon();
    mu.u = state.potentials;
    mu.r = mesh.sites();
    mu.weight.assign(mu.u.size(), w);
    return mu;
}

double pair(const EmpiricalMeasure& mu, const TestFunction& f) {
    double s = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) s += mu.weight[k] * f(mu.u[k], mu.r[k]);
    return s;
}

}  // namespace hydroneuro
