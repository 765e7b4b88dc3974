#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hydroneuro/limit.hpp"
#include "hydroneuro/microsim.hpp"
#include "hydroneuro/model.hpp"

namespace hydroneuro {

// ------------------------------------------------------ bounded-Lipschitz

/// Tensor product f(u) g(r) with sup norm and Lipschitz constant at most 1.
struct BlTest {
    std::function<double(double)> u;
    std::function<double(Point)> r;
    std::size_t u_index = 0;
    std::size_t r_index = 0;
    double operator()(double x, Point p) const { return u(x) * r(p); }
};

/// 8 u-functions × 4 r-functions, fixed order.
const std::vector<BlTest>& bl_library();

std::vector<double> bl_pairings(const EmpiricalMeasure& mu);
/// ∫∫ φ_j ρ du dr with ρ constant in r on each square.
std::vector<double> bl_pairings(const DensityField& f);

double bl_distance(const EmpiricalMeasure& mu, const DensityField& f);
double bl_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b);
double bl_distance(const DensityField& a, const DensityField& b);

// ------------------------------------------------------ one-particle oracle

struct OracleResult {
    std::vector<double> times;
    std::vector<std::vector<double>> samples;  // [time][replica]
    std::vector<std::size_t> resets;           // per time, replicas that reset at least once
};

/// Independent copies of the jump process with drift -αu - λ(u - ū_t) + p_t,
/// jump rate φ(u, r) and reset to 0, started from ψ0(·, r).
OracleResult one_particle_oracle(const ModelSpec& spec, const ScalarPath& path, double lambda, Point r,
                                 std::size_t replicas, const std::vector<double>& times, std::uint64_t seed,
                                 std::size_t threads = 0);

/// Histogram masses of `samples` on `edges` (values past the last edge go to
/// the last bin).
std::vector<double> histogram_masses(const std::vector<double>& samples, const std::vector<double>& edges);
std::vector<double> bin_masses(const DensityProfile& p, const std::vector<double>& edges);
std::vector<double> uniform_edges(double lo, double hi, std::size_t bins);

// ------------------------------------------------------ convergence study

struct ConvergenceOptions {
    std::vector<double> epsilons;
    double horizon = 1.0;
    std::size_t replicas = 10;
    std::uint64_t seed = 1;
    std::size_t dyadic_level = 2;  // observation times k 2^{-q} T
    double ell = 0.25;             // r-resolution of the limit field
    std::vector<double> deltas = {1.0 / 16, 1.0 / 32};
    SchemeOptions scheme;
    double substep = 0.0;
    std::size_t threads = 0;
};

struct ConvergenceCell {
    double epsilon = 0.0;
    double time = 0.0;
    std::size_t replicas = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
    bool skipped = false;
    std::string note;
};

struct ConvergenceReport {
    std::vector<double> times;
    std::vector<ConvergenceCell> cells;  // ε decreasing, then time
    std::vector<std::optional<double>> slope;  // per time, log-log vs ε
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;

    const ConvergenceCell& cell(double epsilon, double time) const;
};

/// `base` supplies every model parameter except ε.
ConvergenceReport convergence_study(const ModelConfig& base, const ConvergenceOptions& opt);

// ------------------------------------------------------------ bound audit

struct AuditReport {
    std::size_t replicas = 0;
    std::size_t path_bound_holds = 0;
    double total_over_fraction = 0.0;   // N(T) > 2φ*ε⁻²T
    double window_over_fraction = 0.0;  // δ-windows with > 2φ*ε⁻²δ spikes
    double max_window_ratio = 0.0;
    std::vector<std::size_t> spike_counts;
};

/// Throws std::logic_error if sup‖U‖ > ‖U(0)‖ + a*ε²N(T) in any replica.
AuditReport bound_audit(const std::vector<SimulationResult>& runs, const ModelSpec& spec, double horizon,
                        double window);

}  // namespace hydroneuro
