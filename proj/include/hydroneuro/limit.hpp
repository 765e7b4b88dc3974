#pragma once

#include <functional>
#include <map>
#include <vector>

#include "hydroneuro/auxcouple.hpp"
#include "hydroneuro/model.hpp"

namespace hydroneuro {

// ---------------------------------------------------------------- ledger

struct LedgerSquare {
    std::vector<double> level;  // D_{n,k}
    std::vector<double> mass;   // ζ_n(m,k)
    std::vector<double> lo;     // interval I_{n,k} = [lo, hi)
    std::vector<double> hi;
    double total_mass() const;
};

struct LevelLedger {
    std::size_t step = 0;
    std::vector<LedgerSquare> squares;
    std::vector<double> average;                 // e_n(m)
    std::vector<double> deposit;                 // s_n(m)
    std::vector<std::vector<double>> bin_deposit;  // s_n^h(m), h = 1..δ/τ
};

LevelLedger ledger_init(const ModelSpec& spec, const PartitionSpec& part, const SquareCoupling& sc);
LevelLedger ledger_step(const LevelLedger& ledger, const ModelSpec& spec, const PartitionSpec& part,
                        const SquareCoupling& sc);

struct LedgerComparison {
    double level_gap = 0.0;  // max_{m,k} |E_{n,k}(m) - D_{n,k}(m)|
    double mass_gap = 0.0;   // max_{m,k} |ε² η_{n,k}(m) - ζ_{n,k}(m)|
};

LedgerComparison ledger_vs_aux(const LevelLedger& ledger, const AuxState& aux, const PartitionSpec& part,
                               double epsilon);

// ----------------------------------------------------------- density field

/// Piecewise-linear density in u. Equal consecutive abscissae encode a jump;
/// the density vanishes outside [u.front(), u.back()].
struct DensityProfile {
    std::vector<double> u;
    std::vector<double> rho;
    std::size_t shock = 0;  // first node of the initial-data branch

    double mass() const;
    /// ∫ f ρ du, composite Simpson with panels no wider than 1e-2.
    double integrate(const std::function<double(double)>& f) const;
    double value(double x) const;  // right-continuous
    double left_value(double x) const;
    double support_max() const { return u.empty() ? 0.0 : u.back(); }
    double boundary_value() const { return rho.empty() ? 0.0 : rho.front(); }
    /// ρ(u*+) - ρ(u*-); zero before any reset mass exists.
    double shock_jump() const;
    double min_value() const;
};

struct DensityField {
    double time = 0.0;
    double ell = 1.0;
    std::vector<Point> centers;
    std::vector<DensityProfile> profiles;
    std::vector<double> ubar;   // ∫∫ u b(r,r') ρ du dr'
    std::vector<double> p;      // ∫∫ a(r',r) φ(u,r') ρ du dr'
    std::vector<double> q;      // ∫ φ(u,r) ρ du
    std::vector<double> ustar;  // shock position

    std::size_t size() const { return profiles.size(); }
};

/// Σ_m ℓ² ∫ |ρ_a - ρ_b| du, exact for piecewise-linear profiles.
double l1_distance(const DensityField& a, const DensityField& b);
double l1_distance(const DensityProfile& a, const DensityProfile& b);

/// Fills ubar, p, q from the profiles.
void compute_scalars(DensityField& f, const ModelSpec& spec, const SquareCoupling& sc);

DensityField density_from_ledger(const LevelLedger& ledger, const PartitionSpec& part, const ModelSpec& spec,
                                 const SquareCoupling& sc);

// ------------------------------------------------------------ δ-scheme

struct SchemeOptions {
    std::size_t ugrid = 2001;      // nodes discretising ψ0
    std::size_t birth_nodes = 4;   // reset-branch nodes injected per step
};

DensityField initial_field(const ModelSpec& spec, const SquareCoupling& sc, const SchemeOptions& opt);

/// Reset branch of one δ-step for square m: a neuron that fires with time t
/// left in the step ends at X(t) = Φ_{t,ū}(0) + Σ_m' a ∫ρ (e^{-(δ-t)φ} - e^{-δφ}),
/// carrying density Q(t)/X'(t) with Q(t) = ∫ ρ φ e^{-(δ-t)φ}.
class BirthMap {
public:
    BirthMap(const DensityField& f, const ModelSpec& spec, const SquareCoupling& sc, double delta, std::size_t m);
    /// `moments[m]` as returned by birth_moments, shared across squares.
    BirthMap(const std::vector<std::vector<double>>& moments, const DensityField& f, const SquareCoupling& sc,
             double delta, std::size_t m);

    double position(double t) const;
    double speed(double t) const;
    double flux(double t) const;
    double end() const { return position(delta_); }
    /// t in [0,δ] with X(t) = x, by bisection to 1e-12.
    double solve(double x) const;
    double density(double x) const;
    double ubar() const { return ubar_; }

private:
    double delta_, lambda_, kappa_, ubar_;
    std::vector<double> own_;        // μ_k(m) = ∫ ρ e^{-δφ} φ^k, k = 0..K+1
    std::vector<double> deposited_;  // Σ_m' aw(m',m) μ_k(m')
};

/// μ_k(m) = ∫ ρ_m e^{-δφ} φ^k du for k = 0..K+1, per square.
std::vector<std::vector<double>> birth_moments(const DensityField& f, const ModelSpec& spec, double delta);

DensityField rho_delta_step(const DensityField& f, const ModelSpec& spec, const SquareCoupling& sc, double delta,
                            const SchemeOptions& opt = {});

struct SchemeTrajectory {
    double delta = 0.0;
    std::vector<double> times;
    // [step][square]
    std::vector<std::vector<double>> ubar, p, q, ustar, boundary, jump, mass, support;
    std::map<std::size_t, DensityField> snapshots;

    std::size_t step_of(double t) const;
    const DensityField& at(double t) const;
};

/// Runs the δ-scheme to `horizon`, keeping fields at `keep_times` (and at
/// their neighbouring steps when `with_neighbours`).
SchemeTrajectory run_scheme(const ModelSpec& spec, const SquareCoupling& sc, double delta, double horizon,
                            const SchemeOptions& opt, const std::vector<double>& keep_times,
                            bool with_neighbours = false);

// ------------------------------------------------------- characteristics

/// Piecewise-linear scalar paths of one square.
struct ScalarPath {
    std::vector<double> times;
    std::vector<double> ubar, p, q;
    double at(const std::vector<double>& v, double t) const;
};

/// T_{s,t}(u) = e^{-κ(t-s)} u + ∫_s^t e^{-κ(t-h)} (λ ū_h + p_h) dh, exact on
/// piecewise-linear paths.
class CharacteristicFlow {
public:
    CharacteristicFlow(double lambda, double alpha, const ScalarPath& path);
    double operator()(double s, double t, double u) const;
    /// v with T_{0,t}(v) = u.
    double inverse_from_zero(double t, double u) const;
    double kappa() const { return kappa_; }
    double lambda() const { return lambda_; }

private:
    double J(double t) const;  // ∫_0^t e^{κh} (λ ū_h + p_h) dh
    double lambda_, kappa_;
    ScalarPath path_;
    std::vector<double> cumulative_;
};

double characteristic_flow(double s, double t, double u, double lambda, double alpha, const ScalarPath& path);

/// Explicit solution along characteristics for one square, given its paths.
class ClosedForm {
public:
    ClosedForm(const ModelSpec& spec, double lambda, Point r, const ScalarPath& path);
    double density(double t, double u) const;
    double shock(double t) const { return flow_(0.0, t, 0.0); }

private:
    double killing(double s, double t, double u) const;  // ∫_s^t φ(T_{s,h}(u)) dh
    const ModelSpec* spec_;
    Point r_;
    ScalarPath path_;
    CharacteristicFlow flow_;
};

/// Σ_m ℓ² ∫ |closed-form - scheme| du at time t on a uniform u-grid.
double closed_form_l1(const std::vector<ClosedForm>& cf, const DensityField& f, double t, std::size_t cells = 4000);

// ------------------------------------------------------------ weak form

struct WeakTest {
    std::function<double(double)> f;
    std::function<double(double)> df;
};

/// Library of smooth u-test functions used for the weak residual.
std::vector<WeakTest> weak_test_library();

/// Central difference of ∫fρ at step n minus ∫f'Vρ + f(0)V(0)ρ(0+) - ∫φfρ.
double weak_residual(const SchemeTrajectory& traj, std::size_t step, const WeakTest& test, const ModelSpec& spec,
                     const SquareCoupling& sc, std::size_t m);

// ------------------------------------------------------------ solve_pde

struct PdeSolution {
    std::vector<SchemeTrajectory> levels;  // coarse to fine
    std::vector<double> obs_times;
    // Richardson-extrapolated values at obs_times: [time][square]
    std::vector<std::vector<double>> ubar, p, q, ustar, boundary, jump;
    std::vector<ScalarPath> paths;  // extrapolated, per square
    std::vector<double> level_l1;   // max over obs times of L1(level k+1, level k)
    bool convergent = true;
    std::vector<ClosedForm> closed_forms;
};

PdeSolution solve_pde(const ModelSpec& spec, const SquareCoupling& sc, double horizon,
                      const std::vector<double>& deltas, const SchemeOptions& opt,
                      const std::vector<double>& obs_times, bool with_neighbours = false);

}  // namespace hydroneuro
