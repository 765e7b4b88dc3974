#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hydroneuro/limit.hpp"

namespace hydroneuro {

double LedgerSquare::total_mass() const {
    double s = 0.0;
    for (double z : mass) s += z;
    return s;
}

LevelLedger ledger_init(const ModelSpec& spec, const PartitionSpec& part, const SquareCoupling& sc) {
    if (sc.size() != part.square_count()) throw std::invalid_argument("ledger_init: square grids differ");
    LevelLedger led;
    const double l2 = part.ell() * part.ell();
    const std::size_t K = part.potential_bins();
    const double E = part.ebin();
    for (std::size_t m = 0; m < part.square_count(); ++m) {
        LedgerSquare sq;
        const Point c = part.center(m);
        for (std::size_t k = 0; k < K; ++k) {
            const double lo = static_cast<double>(k) * E;
            const double hi = k + 1 == K ? part.support() : static_cast<double>(k + 1) * E;
            sq.level.push_back(part.bin_center(k));
            sq.mass.push_back(l2 * (spec.psi0.cdf(hi, c) - spec.psi0.cdf(lo, c)));
            sq.lo.push_back(lo);
            sq.hi.push_back(hi);
        }
        led.squares.push_back(std::move(sq));
    }
    led.average.assign(part.square_count(), 0.0);
    led.deposit.assign(part.square_count(), 0.0);
    led.bin_deposit.assign(part.square_count(), std::vector<double>(part.time_bins(), 0.0));
    return led;
}

LevelLedger ledger_step(const LevelLedger& led, const ModelSpec& spec, const PartitionSpec& part,
                        const SquareCoupling& sc) {
    const std::size_t M = part.square_count();
    const std::size_t H = part.time_bins();
    const double delta = part.delta();
    const double tau = part.tau();
    const double l2 = part.ell() * part.ell();

    // Per source square: Σ_k D ζ, Σ_k ζ (1 - e^{-δφ}) and the per-bin sums.
    std::vector<double> moment(M, 0.0);
    std::vector<double> fired(M, 0.0);
    std::vector<std::vector<double>> fired_late(M, std::vector<double>(H, 0.0));  // index h-1
    std::vector<std::vector<double>> survive(M);
    std::vector<std::vector<double>> born(M, std::vector<double>(H, 0.0));
    for (std::size_t m = 0; m < M; ++m) {
        const auto& sq = led.squares[m];
        const Point c = part.center(m);
        survive[m].resize(sq.level.size());
        for (std::size_t k = 0; k < sq.level.size(); ++k) {
            const double z = sq.mass[k];
            const double phi = spec.phi(sq.level[k], c);
            const double full = std::exp(-delta * phi);
            moment[m] += sq.level[k] * z;
            fired[m] += z * (1.0 - full);
            survive[m][k] = z * full;
            for (std::size_t h = 1; h <= H; ++h) {
                const double e_prev = std::exp(-(delta - static_cast<double>(h - 1) * tau) * phi);
                const double e_here = h == H ? 1.0 : std::exp(-(delta - static_cast<double>(h) * tau) * phi);
                fired_late[m][h - 1] += z * (e_prev - full);
                born[m][h - 1] += z * (e_here - e_prev);
            }
        }
    }

    LevelLedger next;
    next.step = led.step + 1;
    next.squares.resize(M);
    next.average.resize(M);
    next.deposit.resize(M);
    next.bin_deposit.assign(M, std::vector<double>(H, 0.0));
    for (std::size_t m = 0; m < M; ++m) {
        double e = 0.0;
        double s = 0.0;
        for (std::size_t mp = 0; mp < M; ++mp) {
            const auto mm = static_cast<Eigen::Index>(m);
            const auto pp = static_cast<Eigen::Index>(mp);
            e += sc.bw(mm, pp) / l2 * moment[mp];
            const double a = sc.aw(pp, mm) / l2;
            s += a * fired[mp];
            for (std::size_t h = 0; h < H; ++h) next.bin_deposit[m][h] += a * fired_late[mp][h];
        }
        next.average[m] = e;
        next.deposit[m] = s;

        const auto& old = led.squares[m];
        auto& sq = next.squares[m];
        const std::size_t n_old = old.level.size();
        sq.level.reserve(H + n_old);
        for (std::size_t h = 1; h <= H; ++h) {
            sq.level.push_back(sc.flow(m, static_cast<double>(h - 1) * tau, 0.0, e) + next.bin_deposit[m][h - 1]);
            sq.mass.push_back(born[m][h - 1]);
        }
        const double x_end = sc.flow(m, delta, old.lo.front(), e) + s;
        for (std::size_t h = 0; h < H; ++h) {
            sq.lo.push_back(sq.level[h]);
            sq.hi.push_back(h + 1 < H ? sq.level[h + 1] : x_end);
        }
        for (std::size_t k = 0; k < n_old; ++k) {
            sq.level.push_back(sc.flow(m, delta, old.level[k], e) + s);
            sq.mass.push_back(survive[m][k]);
            sq.lo.push_back(sc.flow(m, delta, old.lo[k], e) + s);
            sq.hi.push_back(sc.flow(m, delta, old.hi[k], e) + s);
        }
    }
    return next;
}

LedgerComparison ledger_vs_aux(const LevelLedger& led, const AuxState& aux, const PartitionSpec& part,
                               double epsilon) {
    if (led.squares.size() != aux.levels.size() || led.step != aux.step)
        throw std::invalid_argument("ledger_vs_aux: ledger and auxiliary run use different partitions or steps");
    LedgerComparison cmp;
    const double eps2 = epsilon * epsilon;
    const auto& site_square = part.site_square();
    for (std::size_t m = 0; m < led.squares.size(); ++m) {
        const auto& sq = led.squares[m];
        if (sq.level.size() != aux.levels[m].size())
            throw std::invalid_argument("ledger_vs_aux: level counts differ");
        for (std::size_t k = 0; k < sq.level.size(); ++k)
            cmp.level_gap = std::max(cmp.level_gap, std::abs(sq.level[k] - aux.levels[m][k]));
    }
    std::vector<std::vector<double>> eta(led.squares.size());
    for (std::size_t m = 0; m < eta.size(); ++m) eta[m].assign(led.squares[m].level.size(), 0.0);
    for (std::size_t i = 0; i < aux.level.size(); ++i) eta[site_square[i]][aux.level[i]] += 1.0;
    for (std::size_t m = 0; m < eta.size(); ++m)
        for (std::size_t k = 0; k < eta[m].size(); ++k)
            cmp.mass_gap = std::max(cmp.mass_gap, std::abs(eps2 * eta[m][k] - led.squares[m].mass[k]));
    return cmp;
}

// ----------------------------------------------------------------- profiles

double DensityProfile::mass() const {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) s += 0.5 * (u[k + 1] - u[k]) * (rho[k] + rho[k + 1]);
    return s;
}

double DensityProfile::integrate(const std::function<double(double)>& f) const {
    constexpr double max_panel = 1e-2;
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
        const double h = u[k + 1] - u[k];
        if (h <= 0.0) continue;
        const auto panels = static_cast<std::size_t>(std::ceil(h / max_panel));
        const double w = h / static_cast<double>(panels);
        const double slope = (rho[k + 1] - rho[k]) / h;
        for (std::size_t j = 0; j < panels; ++j) {
            const double a = u[k] + w * static_cast<double>(j);
            const double b = j + 1 == panels ? u[k + 1] : a + w;
            const double ra = rho[k] + slope * (a - u[k]);
            const double rb = j + 1 == panels ? rho[k + 1] : ra + slope * w;
            const double mid = 0.5 * (a + b);
            s += (b - a) / 6.0 * (f(a) * ra + 2.0 * f(mid) * (ra + rb) + f(b) * rb);
        }
    }
    return s;
}

double DensityProfile::value(double x) const {
    if (u.empty() || x < u.front() || x >= u.back()) return 0.0;
    const auto it = std::upper_bound(u.begin(), u.end(), x);
    const auto k = static_cast<std::size_t>(it - u.begin()) - 1;
    const double h = u[k + 1] - u[k];
    return rho[k] + (rho[k + 1] - rho[k]) * (x - u[k]) / h;
}

double DensityProfile::left_value(double x) const {
    if (u.empty() || x <= u.front() || x > u.back()) return 0.0;
    const auto it = std::lower_bound(u.begin(), u.end(), x);
    const auto k = static_cast<std::size_t>(it - u.begin());
    const double h = u[k] - u[k - 1];
    return rho[k - 1] + (rho[k] - rho[k - 1]) * (x - u[k - 1]) / h;
}

double DensityProfile::shock_jump() const {
    if (shock == 0 || shock >= rho.size()) return 0.0;
    return rho[shock] - rho[shock - 1];
}

double DensityProfile::min_value() const {
    return rho.empty() ? 0.0 : *std::min_element(rho.begin(), rho.end());
}

double l1_distance(const DensityProfile& a, const DensityProfile& b) {
    std::vector<double> xs;
    xs.reserve(a.u.size() + b.u.size());
    xs.insert(xs.end(), a.u.begin(), a.u.end());
    xs.insert(xs.end(), b.u.begin(), b.u.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
        const double h = xs[j + 1] - xs[j];
        const double dl = a.value(xs[j]) - b.value(xs[j]);
        const double dr = a.left_value(xs[j + 1]) - b.left_value(xs[j + 1]);
        if (dl * dr >= 0.0) {
            s += 0.5 * h * (std::abs(dl) + std::abs(dr));
        } else {
            s += 0.5 * h * (dl * dl + dr * dr) / (std::abs(dl) + std::abs(dr));
        }
    }
    return s;
}

double l1_distance(const DensityField& a, const DensityField& b) {
    if (a.size() != b.size()) throw std::invalid_argument("l1_distance: fields use different r-grids");
    double s = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) s += l1_distance(a.profiles[m], b.profiles[m]);
    return s * a.ell * a.ell;
}

void compute_scalars(DensityField& f, const ModelSpec& spec, const SquareCoupling& sc) {
    const std::size_t M = f.size();
    std::vector<double> mean(M);
    f.q.assign(M, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        const Point c = f.centers[m];
        mean[m] = f.profiles[m].integrate([](double u) { return u; });
        f.q[m] = f.profiles[m].integrate([&](double u) { return spec.phi(u, c); });
    }
    f.ubar.assign(M, 0.0);
    f.p.assign(M, 0.0);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t mp = 0; mp < M; ++mp) {
            f.ubar[m] += sc.bw(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(mp)) * mean[mp];
            f.p[m] += sc.aw(static_cast<Eigen::Index>(mp), static_cast<Eigen::Index>(m)) * f.q[mp];
        }
}

DensityField density_from_ledger(const LevelLedger& led, const PartitionSpec& part, const ModelSpec& spec,
                                 const SquareCoupling& sc) {
    DensityField f;
    f.time = static_cast<double>(led.step) * part.delta();
    f.ell = part.ell();
    f.centers = part.centers();
    const double l2 = part.ell() * part.ell();
    const std::size_t K0 = part.potential_bins();
    for (const auto& sq : led.squares) {
        DensityProfile prof;
        const std::size_t first_initial = sq.level.size() - K0;
        for (std::size_t k = 0; k < sq.level.size(); ++k) {
            const double len = sq.hi[k] - sq.lo[k];
            if (k > 0 && sq.lo[k] < sq.hi[k - 1] - 1e-12)
                throw std::logic_error("density_from_ledger: overlapping level intervals");
            if (k == first_initial) prof.shock = prof.u.size();
            if (len <= 0.0) {
                if (sq.mass[k] > 1e-14) throw std::logic_error("density_from_ledger: mass on an empty interval");
                continue;
            }
            if (!prof.u.empty() && sq.lo[k] > prof.u.back() + 1e-12) {
                prof.u.push_back(prof.u.back());
                prof.rho.push_back(0.0);
                prof.u.push_back(sq.lo[k]);
                prof.rho.push_back(0.0);
            }
            const double d = sq.mass[k] / (len * l2);
            prof.u.push_back(sq.lo[k]);
            prof.rho.push_back(d);
            prof.u.push_back(sq.hi[k]);
            prof.rho.push_back(d);
        }
        f.ustar.push_back(sq.lo[first_initial]);
        f.profiles.push_back(std::move(prof));
    }
    compute_scalars(f, spec, sc);
    return f;
}

}  // namespace hydroneuro
