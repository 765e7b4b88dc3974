#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "hydroneuro/model.hpp"

namespace hydroneuro {

struct SpikeEvent {
    double time = 0.0;
    std::size_t site = 0;
    double pre_potential = 0.0;
};

struct NetworkState {
    std::vector<double> potentials;
    double clock = 0.0;
    std::vector<SpikeEvent> event_log;
    /// Ū_i = ε² Σ_j b(i,j) U_j, kept in sync by NetworkDynamics.
    std::vector<double> local_averages;
    std::size_t events_since_refresh = 0;
};

/// Dense operators of one ModelSpec, shared read-only by every replica.
class NetworkDynamics {
public:
    static constexpr std::size_t max_sites = 4096;
    static constexpr std::size_t refresh_interval = 1000;

    explicit NetworkDynamics(const ModelSpec& spec);

    const ModelSpec& spec() const { return spec_; }
    std::size_t size() const { return n_; }
    double default_substep() const;

    void refresh_averages(NetworkState& s) const;
    /// Frozen-average substeps of length <= substep covering dt.
    void flow(NetworkState& s, double dt, double substep) const;
    /// Reset U_i, deposit ε² a(i,j) on every j != i, log the event.
    void spike(NetworkState& s, std::size_t i) const;

    /// W(i,j) = ε² b̃(i,j).
    const Eigen::MatrixXd& averaging() const { return W_; }
    /// D(i,j) = ε² a(i,j), the jump of U_j when i spikes.
    const Eigen::MatrixXd& deposits() const { return D_; }
    const std::vector<double>& kappa() const { return kappa_; }

private:
    ModelSpec spec_;
    std::size_t n_;
    Eigen::MatrixXd W_;
    Eigen::MatrixXd D_;
    Eigen::MatrixXd M_;  // W Dᵀ: column i is the change of Ū after a spike of i
    std::vector<double> kappa_;
    std::vector<double> lambda_;
    bool uniform_kappa_ = false;
};

/// Draws U_i(0) from ψ0(·, i) by inverse CDF; clock 0, empty log.
NetworkState sample_initial_state(const ModelSpec& spec, std::uint64_t seed);

NetworkState flow(const ModelSpec& spec, NetworkState state, double dt, double substep);

/// e^{A dt} U with A_ij = ε² λ_i b(i,j), A_ii = -α - λ_i. N <= 4096.
NetworkState exact_flow(const ModelSpec& spec, NetworkState state, double dt);

struct SimulationOptions {
    double substep = 0.0;  // 0 selects the default
    std::vector<double> observe_times;
    std::function<void(const NetworkState&)> observer;
    double window = 0.0;  // width of spike-count windows, 0 disables
};

struct SimulationResult {
    NetworkState state;
    double initial_sup = 0.0;
    double sup_potential = 0.0;  // sup over [0,T] of max_i U_i(t)
    std::size_t proposals = 0;
    std::vector<std::size_t> window_counts;
};

/// Ogata thinning at the global rate ε⁻² φ*; per proposal the draws are
/// (gap, site, acceptance uniform) in that order.
SimulationResult simulate(const NetworkDynamics& dyn, NetworkState state, double horizon, std::uint64_t seed,
                          const SimulationOptions& options = {});
SimulationResult simulate(const ModelSpec& spec, NetworkState state, double horizon, std::uint64_t seed,
                          const SimulationOptions& options = {});

struct EmpiricalMeasure {
    std::vector<double> u;
    std::vector<Point> r;
    std::vector<double> weight;
    std::size_t size() const { return u.size(); }
};

EmpiricalMeasure empirical_measure(const NetworkState& state, const Mesh& mesh);

using TestFunction = std::function<double(double, Point)>;

double pair(const EmpiricalMeasure& mu, const TestFunction& f);

}  // namespace hydroneuro
