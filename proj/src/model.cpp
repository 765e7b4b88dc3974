#include "hydroneuro/model.hpp"

#include <algorithm>
#include <memory>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hydroneuro {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double integrate(const std::function<double(double)>& f, double lo, double hi) {
    if (hi <= lo) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 12, 1e-13);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double distance(Point a, Point b, bool periodic) {
    double dx = std::abs(a.x - b.x);
    double dy = std::abs(a.y - b.y);
    if (periodic) {
        dx = std::min(dx, 1.0 - dx);
        dy = std::min(dy, 1.0 - dy);
    }
    return std::hypot(dx, dy);
}

std::size_t reciprocal_count(double x, const char* what) {
    if (!(x > 0.0) || x > 1.0)
        throw std::invalid_argument(std::string(what) + " must lie in (0,1], got " + fmt_double(x));
    const double inv = 1.0 / x;
    const double n = std::round(inv);
    if (std::abs(n * x - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(what) + " = " + fmt_double(x) +
                                    " is not the reciprocal of an integer");
    return static_cast<std::size_t>(n);
}

Mesh build_mesh(double epsilon) {
    Mesh mesh;
    mesh.side_ = reciprocal_count(epsilon, "epsilon");
    mesh.epsilon_ = 1.0 / static_cast<double>(mesh.side_);
    mesh.sites_.reserve(mesh.side_ * mesh.side_);
    for (std::size_t ix = 0; ix < mesh.side_; ++ix)
        for (std::size_t iy = 0; iy < mesh.side_; ++iy)
            mesh.sites_.push_back({static_cast<double>(ix) * mesh.epsilon_,
                                   static_cast<double>(iy) * mesh.epsilon_});
    return mesh;
}

std::optional<std::size_t> Mesh::index_of(Point r) const {
    const double fx = r.x / epsilon_;
    const double fy = r.y / epsilon_;
    const double ix = std::round(fx);
    const double iy = std::round(fy);
    if (std::abs(fx - ix) > 1e-9 || std::abs(fy - iy) > 1e-9) return std::nullopt;
    if (ix < 0 || iy < 0 || ix >= static_cast<double>(side_) || iy >= static_cast<double>(side_))
        return std::nullopt;
    return static_cast<std::size_t>(ix) * side_ + static_cast<std::size_t>(iy);
}

Kernel::Kernel(Profile profile, double lipschitz_bound, double sup_bound, bool symmetric)
    : profile_(std::move(profile)), lipschitz_(lipschitz_bound), sup_(sup_bound), symmetric_(symmetric) {}

double Kernel::operator()(Point r, Point rp) const {
    if (std::abs(r.x - rp.x) < 1e-12 && std::abs(r.y - rp.y) < 1e-12) return 0.0;
    return profile_(r, rp);
}

Kernel make_kernel(const KernelPreset& p) {
    if (p.scale < 0.0) throw std::invalid_argument("kernel scale must be nonnegative");
    const double c = p.scale;
    switch (p.shape) {
    case KernelShape::constant:
        return Kernel([c](Point, Point) { return c; }, 0.0, c, true);
    case KernelShape::gaussian: {
        if (!(p.width > 0.0)) throw std::invalid_argument("gaussian kernel width must be positive");
        const double w = p.width;
        const bool periodic = p.periodic;
        auto f = [c, w, periodic](Point r, Point rp) {
            const double d = distance(r, rp, periodic);
            return c * std::exp(-d * d / (2.0 * w * w));
        };
        return Kernel(f, c / (w * std::sqrt(std::numbers::e)), c, true);
    }
    case KernelShape::cosine: {
        if (std::abs(p.modulation) > 1.0)
            throw std::invalid_argument("cosine kernel modulation must satisfy |m| <= 1");
        const double m = p.modulation;
        auto f = [c, m](Point r, Point rp) {
            return c * (1.0 + m * std::cos(two_pi * (r.x - rp.x)) * std::cos(two_pi * (r.y - rp.y)));
        };
        return Kernel(f, c * std::abs(m) * two_pi, c * (1.0 + std::abs(m)), true);
    }
    }
    throw std::invalid_argument("unknown kernel preset");
}

GapNormalization normalize_gap_kernel(const Kernel& raw_b, const Mesh& mesh) {
    const double eps2 = mesh.epsilon() * mesh.epsilon();
    const auto& sites = mesh.sites();
    std::vector<double> lambda(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < sites.size(); ++j) s += raw_b(sites[i], sites[j]);
        lambda[i] = eps2 * s;
        if (!(lambda[i] > 0.0))
            throw std::invalid_argument("gap kernel has a zero row at site " + std::to_string(i) +
                                        " (isolated neuron); lambda must be strictly positive");
    }
    auto lam = std::make_shared<std::vector<double>>(lambda);
    auto raw = raw_b;
    Mesh m = mesh;
    auto lambda_at = [lam, raw, m, eps2](Point r) {
        if (auto i = m.index_of(r)) return (*lam)[*i];
        double s = 0.0;
        for (const auto& q : m.sites()) s += raw(r, q);
        return eps2 * s;
    };
    auto profile = [raw, lambda_at](Point r, Point rp) { return raw.profile(r, rp) / lambda_at(r); };
    const double lmin = *std::min_element(lambda.begin(), lambda.end());
    Kernel normalized(profile, raw_b.lipschitz_bound() / lmin, raw_b.sup_bound() / lmin, false);
    return {normalized, lambda};
}

RateFunction::RateFunction(Raw clamped, double sup_bound, double clamp_level, double lipschitz_bound,
                           bool position_independent)
    : eval_(std::move(clamped)),
      sup_(sup_bound),
      clamp_(clamp_level),
      lipschitz_(lipschitz_bound),
      position_independent_(position_independent) {}

RateFunction clamp_rate(const RateFunction::Raw& raw, double clamp_level, bool position_independent) {
    if (!(clamp_level > 0.0)) throw std::invalid_argument("rate clamp level must be positive");
    constexpr std::size_t nu = 2048;
    constexpr std::size_t nr = 16;
    double sup = 0.0;
    double lip = 0.0;
    for (std::size_t ix = 0; ix < nr; ++ix) {
        for (std::size_t iy = 0; iy < nr; ++iy) {
            const Point r{static_cast<double>(ix) / nr, static_cast<double>(iy) / nr};
            double prev = raw(0.0, r);
            if (std::abs(prev) > 1e-12)
                throw std::invalid_argument("rate must vanish at u = 0 (got " + fmt_double(prev) + ")");
            for (std::size_t k = 1; k <= nu; ++k) {
                const double u = clamp_level * static_cast<double>(k) / nu;
                const double v = raw(u, r);
                if (v < 0.0) throw std::invalid_argument("rate takes negative value " + fmt_double(v));
                if (v < prev - 1e-12) throw std::invalid_argument("rate is decreasing in u");
                lip = std::max(lip, (v - prev) / (clamp_level / nu));
                prev = v;
            }
            sup = std::max(sup, prev);
        }
    }
    auto clamped = [raw, clamp_level](double u, Point r) { return raw(std::min(u, clamp_level), r); };
    return RateFunction(clamped, sup, clamp_level, lip * (1.0 + 1e-9), position_independent);
}

RateFunction make_rate(const RatePreset& p) {
    if (p.gain < 0.0) throw std::invalid_argument("rate gain must be nonnegative");
    if (std::abs(p.spatial_amplitude) >= 1.0)
        throw std::invalid_argument("rate spatial amplitude must satisfy |s| < 1");
    const double s = p.spatial_amplitude;
    auto modulation = [s](Point r) { return 1.0 + s * std::cos(two_pi * r.x); };
    const double g = p.gain;
    RateFunction::Raw raw;
    switch (p.shape) {
    case RateShape::linear:
        raw = [g, modulation](double u, Point r) { return g * u * modulation(r); };
        break;
    case RateShape::power: {
        if (p.exponent < 1.0) throw std::invalid_argument("power rate exponent must be >= 1");
        const double e = p.exponent;
        raw = [g, e, modulation](double u, Point r) { return g * std::pow(u, e) * modulation(r); };
        break;
    }
    case RateShape::sigmoid: {
        if (!(p.steepness > 0.0)) throw std::invalid_argument("sigmoid steepness must be positive");
        const double k = p.steepness;
        const double c = p.midpoint;
        const double s0 = 1.0 / (1.0 + std::exp(k * c));
        raw = [g, k, c, s0, modulation](double u, Point r) {
            const double sv = 1.0 / (1.0 + std::exp(-k * (u - c)));
            return g * (sv - s0) * modulation(r);
        };
        break;
    }
    }
    return clamp_rate(raw, p.clamp, s == 0.0);
}

InitialDensity::InitialDensity(Fn pdf, Fn cdf, double support_bound, bool position_independent,
                               std::optional<bool> compatible)
    : pdf_(std::move(pdf)),
      cdf_(std::move(cdf)),
      support_(support_bound),
      position_independent_(position_independent),
      compatible_(compatible) {}

double InitialDensity::operator()(double u, Point r) const {
    if (u < 0.0 || u > support_) return 0.0;
    return pdf_(u, r);
}

double InitialDensity::cdf(double u, Point r) const {
    if (u <= 0.0) return 0.0;
    if (u >= support_) return 1.0;
    return cdf_(u, r);
}

InverseCdf::InverseCdf(const InitialDensity& psi0, Point r, std::size_t points) {
    const double R = psi0.support_bound();
    u_.resize(points);
    F_.resize(points);
    for (std::size_t k = 0; k < points; ++k) {
        u_[k] = R * static_cast<double>(k) / static_cast<double>(points - 1);
        F_[k] = psi0.cdf(u_[k], r);
    }
    F_.front() = 0.0;
    F_.back() = 1.0;
}

double InverseCdf::operator()(double w) const {
    auto it = std::upper_bound(F_.begin(), F_.end(), w);
    if (it == F_.end()) return u_.back();
    const std::size_t k = static_cast<std::size_t>(it - F_.begin());
    if (k == 0) return u_.front();
    const double f0 = F_[k - 1];
    const double f1 = F_[k];
    const double t = f1 > f0 ? (w - f0) / (f1 - f0) : 0.0;
    return u_[k - 1] + t * (u_[k] - u_[k - 1]);
}

namespace {

struct Component {
    InitialDensity::Fn pdf;
    InitialDensity::Fn cdf;
};

Component uniform_component(double R) {
    return {[R](double, Point) { return 1.0 / R; }, [R](double u, Point) { return u / R; }};
}

Component decreasing_component(double R) {
    return {[R](double u, Point) { return 2.0 * (R - u) / (R * R); },
            [R](double u, Point) { return (2.0 * R * u - u * u) / (R * R); }};
}

Component bump_component(double R) {
    return {[R](double u, Point) { return 6.0 * u * (R - u) / (R * R * R); },
            [R](double u, Point) { return (3.0 * R * u * u - 2.0 * u * u * u) / (R * R * R); }};
}

InitialDensity mixture(double R, double weight, double amplitude, std::optional<bool> compatible) {
    auto dec = decreasing_component(R);
    auto bump = bump_component(R);
    auto w = [weight, amplitude](Point r) {
        return std::clamp(weight + amplitude * std::cos(two_pi * r.x), 0.0, 1.0);
    };
    auto pdf = [dec, bump, w](double u, Point r) {
        const double wr = w(r);
        return (1.0 - wr) * bump.pdf(u, r) + wr * dec.pdf(u, r);
    };
    auto cdf = [dec, bump, w](double u, Point r) {
        const double wr = w(r);
        return (1.0 - wr) * bump.cdf(u, r) + wr * dec.cdf(u, r);
    };
    return InitialDensity(pdf, cdf, R, amplitude == 0.0, compatible);
}

}  // namespace

InitialDensity make_initial_density(const InitialPreset& p) {
    const double R = p.support;
    if (!(R > 0.0)) throw std::invalid_argument("psi0 support R0 must be positive");
    switch (p.shape) {
    case InitialShape::uniform: {
        auto c = uniform_component(R);
        return InitialDensity(c.pdf, c.cdf, R, true);
    }
    case InitialShape::narrow: {
        const double lo = p.center - p.halfwidth;
        const double hi = p.center + p.halfwidth;
        if (!(p.halfwidth > 0.0) || lo < 0.0 || hi > R)
            throw std::invalid_argument("narrow psi0 must satisfy 0 <= center - halfwidth < center + halfwidth <= R0");
        auto pdf = [lo, hi](double u, Point) { return (u >= lo && u <= hi) ? 1.0 / (hi - lo) : 0.0; };
        auto cdf = [lo, hi](double u, Point) { return std::clamp((u - lo) / (hi - lo), 0.0, 1.0); };
        InitialDensity d(pdf, cdf, R, true);
        d.set_breakpoints({lo, hi});
        return d;
    }
    case InitialShape::decreasing: {
        auto c = decreasing_component(R);
        return InitialDensity(c.pdf, c.cdf, R, true);
    }
    case InitialShape::bump: {
        auto c = bump_component(R);
        return InitialDensity(c.pdf, c.cdf, R, true);
    }
    case InitialShape::mixture:
        if (p.weight < 0.0 || p.weight > 1.0) throw std::invalid_argument("psi0 weight must lie in [0,1]");
        return mixture(R, p.weight, p.spatial_amplitude, std::nullopt);
    case InitialShape::compatible:
        throw std::invalid_argument("compatible psi0 needs the model kernels; use build_model");
    }
    throw std::invalid_argument("unknown psi0 preset");
}

InitialDensity make_compatible_density(const InitialPreset& p, const Kernel& a, const Kernel& raw_b,
                                       const RateFunction& phi) {
    if (p.spatial_amplitude != 0.0 || !phi.position_independent())
        throw std::invalid_argument("compatible psi0 requires position-independent rate and psi0");
    const double R = p.support;
    const Point r0{0.0, 0.0};
    constexpr std::size_t n = 128;
    double lam = 0.0;
    double A = 0.0;
    for (std::size_t ix = 0; ix < n; ++ix)
        for (std::size_t iy = 0; iy < n; ++iy) {
            const Point q{(ix + 0.5) / n, (iy + 0.5) / n};
            lam += raw_b.profile(r0, q);
            A += a.profile(q, r0);
        }
    lam /= double(n * n);
    A /= double(n * n);
    auto dec = decreasing_component(R);
    auto bump = bump_component(R);
    const double split = std::min(phi.clamp_level(), R);
    auto rate_moment = [&](const Component& c) {
        auto f = [&](double u) { return phi(u, r0) * c.pdf(u, r0); };
        return integrate(f, 0.0, split) + integrate(f, split, R);
    };
    const double q_dec = rate_moment(dec);
    const double q_bump = rate_moment(bump);
    auto gap = [&](double w) {
        const double q = (1.0 - w) * q_bump + w * q_dec;
        const double ubar = (1.0 - w) * R / 2.0 + w * R / 3.0;
        return w * 2.0 / R - q / (lam * ubar + A * q);
    };
    if (gap(0.0) * gap(1.0) > 0.0)
        throw std::invalid_argument("no mixture weight in [0,1] satisfies the boundary compatibility condition");
    boost::math::tools::eps_tolerance<double> tol(50);
    auto [lo, hi] = boost::math::tools::bisect(gap, 0.0, 1.0, tol);
    return mixture(R, 0.5 * (lo + hi), 0.0, true);
}

double ModelSpec::lambda_max() const { return *std::max_element(lambda.begin(), lambda.end()); }

double ModelSpec::a_star() const { return a.sup_bound(); }

ModelSpec build_model(const ModelConfig& cfg) {
    ModelSpec spec;
    spec.config = cfg;
    if (cfg.alpha < 0.0) throw std::invalid_argument("alpha must be nonnegative");
    spec.mesh = build_mesh(cfg.epsilon);
    KernelPreset ap = cfg.a;
    KernelPreset bp = cfg.b;
    ap.periodic = bp.periodic = cfg.periodic;
    spec.a = make_kernel(ap);
    spec.raw_b = make_kernel(bp);
    auto gap = normalize_gap_kernel(spec.raw_b, spec.mesh);
    spec.b = gap.kernel;
    spec.lambda = std::move(gap.lambda);
    spec.alpha = cfg.alpha;
    spec.phi = make_rate(cfg.rate);
    if (cfg.psi0.shape == InitialShape::compatible) {
        const bool invariant = cfg.periodic || (ap.shape == KernelShape::constant && bp.shape == KernelShape::constant);
        if (!invariant) throw std::invalid_argument("compatible psi0 requires periodic or constant kernels");
        spec.psi0 = make_compatible_density(cfg.psi0, spec.a, spec.raw_b, spec.phi);
    } else {
        spec.psi0 = make_initial_density(cfg.psi0);
    }
    validate(spec);
    return spec;
}

void validate(const ModelSpec& spec) {
    const auto& sites = spec.mesh.sites();
    const double eps2 = spec.mesh.epsilon() * spec.mesh.epsilon();
    for (std::size_t i = 0; i < sites.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < sites.size(); ++j) s += spec.raw_b(sites[i], sites[j]);
        const double row = eps2 * s / spec.lambda[i];
        if (std::abs(row - 1.0) > 1e-9)
            throw std::invalid_argument("normalised gap kernel row " + std::to_string(i) + " sums to " +
                                        fmt_double(row));
    }
}

std::string to_string(KernelShape s) {
    switch (s) {
    case KernelShape::constant: return "constant";
    case KernelShape::gaussian: return "gaussian";
    case KernelShape::cosine: return "cosine";
    }
    return "?";
}

std::string to_string(RateShape s) {
    switch (s) {
    case RateShape::linear: return "linear";
    case RateShape::sigmoid: return "sigmoid";
    case RateShape::power: return "power";
    }
    return "?";
}

std::string to_string(InitialShape s) {
    switch (s) {
    case InitialShape::uniform: return "uniform";
    case InitialShape::narrow: return "narrow";
    case InitialShape::decreasing: return "decreasing";
    case InitialShape::bump: return "bump";
    case InitialShape::mixture: return "mixture";
    case InitialShape::compatible: return "compatible";
    }
    return "?";
}

KernelShape parse_kernel_shape(const std::string& s) {
    for (auto k : {KernelShape::constant, KernelShape::gaussian, KernelShape::cosine})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown kernel preset '" + s + "' (constant, gaussian, cosine)");
}

RateShape parse_rate_shape(const std::string& s) {
    for (auto k : {RateShape::linear, RateShape::sigmoid, RateShape::power})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown rate preset '" + s + "' (linear, sigmoid, power)");
}

InitialShape parse_initial_shape(const std::string& s) {
    for (auto k : {InitialShape::uniform, InitialShape::narrow, InitialShape::decreasing, InitialShape::bump,
                   InitialShape::mixture, InitialShape::compatible})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown psi0 preset '" + s +
                                "' (uniform, narrow, decreasing, bump, mixture, compatible)");
}

}  // namespace hydroneuro
