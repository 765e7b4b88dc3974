#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "hydroneuro/microsim.hpp"
#include "hydroneuro/model.hpp"

namespace hydroneuro {

struct PartitionConfig {
    double delta = 0.1;
    double ell = 0.5;
    double ebin = 0.1;
    double tau = 0.05;
};

/// Squares C_m (row-major, side ℓ), time bins J_h = [δ - hτ, δ - (h-1)τ)
/// for h = 1..δ/τ, potential bins I_k = [kE, (k+1)E) for k = 0..R0/E - 1.
class PartitionSpec {
public:
    PartitionSpec(const PartitionConfig& cfg, double support);
    /// Also checks that ℓ is a multiple of ε and assigns mesh sites to squares.
    PartitionSpec(const PartitionConfig& cfg, double support, const Mesh& mesh);

    double delta() const { return cfg_.delta; }
    double ell() const { return cfg_.ell; }
    double ebin() const { return cfg_.ebin; }
    double tau() const { return cfg_.tau; }
    double support() const { return support_; }
    const PartitionConfig& config() const { return cfg_; }

    std::size_t time_bins() const { return time_bins_; }
    std::size_t potential_bins() const { return potential_bins_; }
    std::size_t squares_per_side() const { return side_; }
    std::size_t square_count() const { return side_ * side_; }
    Point center(std::size_t m) const { return centers_[m]; }
    const std::vector<Point>& centers() const { return centers_; }

    std::size_t square_of(Point r) const;
    /// Bin h in 1..δ/τ of an elapsed time s in [0,δ); bin edges belong to the
    /// bin on their right (the later bin, smaller h).
    std::size_t time_bin(double s) const;
    /// Zero-based potential bin; u = R0 falls in the last bin.
    std::size_t potential_bin(double u) const;
    double bin_center(std::size_t k) const { return (static_cast<double>(k) + 0.5) * cfg_.ebin; }

    const std::vector<std::size_t>& site_square() const { return site_square_; }
    const std::vector<std::vector<std::size_t>>& square_sites() const { return square_sites_; }

private:
    PartitionConfig cfg_;
    double support_;
    std::size_t time_bins_ = 0;
    std::size_t potential_bins_ = 0;
    std::size_t side_ = 0;
    std::vector<Point> centers_;
    std::vector<std::size_t> site_square_;
    std::vector<std::vector<std::size_t>> square_sites_;
};

/// Couplings between square centres on the ℓ-grid (smooth kernel profile,
/// self-square term kept): λ_m = ℓ² Σ_m' b(i_m,i_m'),
/// bw(m,m') = ℓ² b(i_m,i_m') / λ_m, aw(m',m) = ℓ² a(i_m',i_m).
struct SquareCoupling {
    double ell = 1.0;
    std::vector<Point> centers;
    std::vector<double> lambda;
    std::vector<double> kappa;
    Eigen::MatrixXd bw;
    Eigen::MatrixXd aw;

    std::size_t size() const { return centers.size(); }
    /// Φ_{t,ȳ}(y) for square m.
    double flow(std::size_t m, double t, double y, double ybar) const;
};

SquareCoupling square_coupling(const ModelSpec& spec, double ell);

struct AuxState {
    std::vector<double> potentials;      // y_i
    std::size_t step = 0;
    std::vector<double> square_average;  // ȳ(m)
    std::vector<std::size_t> level;      // level index of each site within its square
    std::vector<std::vector<double>> levels;  // E_{n,k} per square
    std::size_t last_spikes = 0;
};

AuxState bin_initial(const std::vector<double>& u0, const PartitionSpec& part, const SquareCoupling& sc);

void update_square_averages(AuxState& y, const PartitionSpec& part, const SquareCoupling& sc);

/// Spike decisions of one macro step: spike_bin[i] = 0 for non-spikers,
/// h in 1..δ/τ otherwise.
void apply_aux_update(AuxState& y, const std::vector<std::size_t>& spike_bin, const PartitionSpec& part,
                      const SquareCoupling& sc, double epsilon);

struct AuxStepStats {
    std::vector<std::vector<std::size_t>> counts;  // N(m,h), h index 0..δ/τ-1
    std::size_t spikes = 0;
};

AuxStepStats aux_step(AuxState& y, const PartitionSpec& part, const SquareCoupling& sc, const ModelSpec& spec,
                      std::uint64_t seed);

struct CouplingLedger {
    std::vector<char> good;
    double theta = 0.0;
    std::vector<double> theta_history;        // θ_n, n = 0, 1, ...
    std::vector<std::size_t> bad_history;     // |B_n|
    std::vector<std::size_t> good_history;    // |G_n|
    std::vector<std::size_t> window_spikes;   // true-process spikes per step
};

CouplingLedger start_coupling(const NetworkState& u, const AuxState& y);

struct CoupledStepStats {
    std::size_t proposals = 0;
    std::size_t shared = 0;      // ξ¹
    std::size_t true_only = 0;   // ξ², true side larger
    std::size_t aux_only = 0;    // ξ², auxiliary side larger
    std::size_t true_after = 0;  // ξ after the auxiliary spike
};

/// One macro step of the coupling: true state and auxiliary state advance
/// from nδ to (n+1)δ and the ledger records the labels.
CoupledStepStats coupled_step(const NetworkDynamics& dyn, NetworkState& u, AuxState& y, CouplingLedger& ledger,
                              const PartitionSpec& part, const SquareCoupling& sc, std::uint64_t seed,
                              double substep = 0.0);

struct CouplingRun {
    CouplingLedger ledger;
    double theta_max = 0.0;
    double bad_fraction_max = 0.0;
    std::size_t guard_violations = 0;  // steps with more than 2φ*ε⁻²δ true spikes
};

CouplingRun run_coupling(const NetworkDynamics& dyn, const PartitionSpec& part, const SquareCoupling& sc,
                         double horizon, std::uint64_t seed, double substep = 0.0);

struct CouplingReport {
    std::vector<double> delta;
    std::vector<double> theta_max_mean;
    std::vector<double> theta_max_stderr;
    std::vector<double> bad_max_mean;
    std::vector<double> bad_max_stderr;
    std::optional<double> theta_slope;
    std::optional<double> bad_slope;
};

/// Aggregates per-δ replica results (outer index δ, inner index replica).
CouplingReport coupling_report(const std::vector<double>& deltas, const std::vector<std::vector<CouplingRun>>& runs,
                               double epsilon);

}  // namespace hydroneuro
