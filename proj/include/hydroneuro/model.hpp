#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hydroneuro {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// |r - r'| on the unit torus when `periodic`, Euclidean otherwise.
double distance(Point a, Point b, bool periodic);

/// Lattice εZ² ∩ [0,1)², sites in row-major order (x outer, y inner).
class Mesh {
public:
    Mesh() = default;
    double epsilon() const { return epsilon_; }
    std::size_t side() const { return side_; }
    std::size_t count() const { return sites_.size(); }
    const std::vector<Point>& sites() const { return sites_; }
    Point site(std::size_t i) const { return sites_[i]; }
    /// Index of the site at `r`, if `r` is a lattice point.
    std::optional<std::size_t> index_of(Point r) const;

private:
    friend Mesh build_mesh(double epsilon);
    double epsilon_ = 1.0;
    std::size_t side_ = 1;
    std::vector<Point> sites_;
};

Mesh build_mesh(double epsilon);

/// Rounds 1/x to an integer, throws if x is not the reciprocal of one.
std::size_t reciprocal_count(double x, const char* what);

enum class KernelShape { constant, gaussian, cosine };

struct KernelPreset {
    KernelShape shape = KernelShape::constant;
    double scale = 1.0;
    double width = 0.2;       // gaussian standard deviation
    double modulation = 0.5;  // cosine amplitude, |m| <= 1
    bool periodic = true;
};

/// Interaction kernel. `profile` is the smooth shape used for couplings
/// between square centres; `operator()` removes the self-coupling.
class Kernel {
public:
    using Profile = std::function<double(Point, Point)>;

    Kernel() = default;
    Kernel(Profile profile, double lipschitz_bound, double sup_bound, bool symmetric);

    double operator()(Point r, Point rp) const;
    double profile(Point r, Point rp) const { return profile_(r, rp); }
    double lipschitz_bound() const { return lipschitz_; }
    double sup_bound() const { return sup_; }
    bool symmetric() const { return symmetric_; }

private:
    Profile profile_;
    double lipschitz_ = 0.0;
    double sup_ = 0.0;
    bool symmetric_ = true;
};

Kernel make_kernel(const KernelPreset& preset);

struct GapNormalization {
    Kernel kernel;               // b̃(r,r') = raw_b(r,r') / λ(r)
    std::vector<double> lambda;  // λ_i per mesh site
};

/// λ_i = ε² Σ_j raw_b(i,j), b̃ = raw_b / λ_i.
GapNormalization normalize_gap_kernel(const Kernel& raw_b, const Mesh& mesh);

enum class RateShape { linear, sigmoid, power };

struct RatePreset {
    RateShape shape = RateShape::linear;
    double gain = 1.0;
    double exponent = 2.0;   // power
    double steepness = 4.0;  // sigmoid
    double midpoint = 1.0;   // sigmoid
    double clamp = 2.0;
    double spatial_amplitude = 0.0;  // rate multiplied by 1 + s cos(2πx)
};

class RateFunction {
public:
    using Raw = std::function<double(double, Point)>;

    RateFunction() = default;
    RateFunction(Raw clamped, double sup_bound, double clamp_level, double lipschitz_bound,
                 bool position_independent);

    double operator()(double u, Point r) const { return eval_(u, r); }
    double sup_bound() const { return sup_; }
    double clamp_level() const { return clamp_; }
    double lipschitz_bound() const { return lipschitz_; }
    bool position_independent() const { return position_independent_; }
    bool identically_zero() const { return sup_ == 0.0; }

private:
    Raw eval_;
    double sup_ = 0.0;
    double clamp_ = 1.0;
    double lipschitz_ = 0.0;
    bool position_independent_ = true;
};

/// Freezes `raw` above `clamp_level`. Rejects negative values, a nonzero
/// value at u = 0 and decreasing stretches on the sampling grid.
RateFunction clamp_rate(const RateFunction::Raw& raw, double clamp_level,
                        bool position_independent = false);

RateFunction make_rate(const RatePreset& preset);

enum class InitialShape { uniform, narrow, decreasing, bump, mixture, compatible };

struct InitialPreset {
    InitialShape shape = InitialShape::uniform;
    double support = 1.0;  // R0
    double center = 0.5;
    double halfwidth = 0.05;
    double weight = 0.5;  // mixture weight of the decreasing component
    double spatial_amplitude = 0.0;
};

class InitialDensity {
public:
    using Fn = std::function<double(double, Point)>;

    InitialDensity() = default;
    InitialDensity(Fn pdf, Fn cdf, double support_bound, bool position_independent,
                   std::optional<bool> compatible = std::nullopt);

    double operator()(double u, Point r) const;
    double cdf(double u, Point r) const;
    double support_bound() const { return support_; }
    bool position_independent() const { return position_independent_; }
    std::optional<bool> compatible() const { return compatible_; }
    /// Points where ψ0 jumps inside (0, R0).
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    void set_breakpoints(std::vector<double> b) { breakpoints_ = std::move(b); }

private:
    Fn pdf_;
    Fn cdf_;
    double support_ = 1.0;
    bool position_independent_ = true;
    std::optional<bool> compatible_;
    std::vector<double> breakpoints_;
};

/// Inverse-CDF table on a uniform u-grid with linear interpolation.
class InverseCdf {
public:
    static constexpr std::size_t default_points = 4096;
    InverseCdf(const InitialDensity& psi0, Point r, std::size_t points = default_points);
    double operator()(double w) const;

private:
    std::vector<double> u_;
    std::vector<double> F_;
};

struct ModelConfig {
    double epsilon = 0.1;
    double alpha = 0.0;
    KernelPreset a;
    KernelPreset b;
    RatePreset rate;
    InitialPreset psi0;
    bool periodic = true;  // applied to both kernels
};

struct ModelSpec {
    ModelConfig config;
    Mesh mesh;
    Kernel a;
    Kernel raw_b;
    Kernel b;  // normalised
    std::vector<double> lambda;
    double alpha = 0.0;
    RateFunction phi;
    InitialDensity psi0;

    double lambda_max() const;
    /// a* = sup of a over ordered pairs of distinct mesh sites.
    double a_star() const;
};

InitialDensity make_initial_density(const InitialPreset& preset);

/// Mixture density whose weight makes ψ0(0) = q0 / (λ ū0 + p0). Needs a
/// translation-invariant model (periodic or constant kernels, rate and ψ0
/// without spatial modulation).
InitialDensity make_compatible_density(const InitialPreset& preset, const Kernel& a,
                                       const Kernel& raw_b, const RateFunction& phi);

ModelSpec build_model(const ModelConfig& config);

/// Throws std::invalid_argument if the normalisation invariant fails.
void validate(const ModelSpec& spec);

std::string to_string(KernelShape s);
std::string to_string(RateShape s);
std::string to_string(InitialShape s);
KernelShape parse_kernel_shape(const std::string& s);
RateShape parse_rate_shape(const std::string& s);
InitialShape parse_initial_shape(const std::string& s);

}  // namespace hydroneuro
