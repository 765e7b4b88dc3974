#pragma once

#include <functional>
#include <optional>
#include <vector>

namespace hydroneuro {

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t count = 0;
};

MeanStderr mean_stderr(const std::vector<double>& xs);

/// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> xs, double p);

/// Smallest k with P(Poisson(mean) <= k) >= p.
double poisson_quantile(double mean, double p);

/// Kolmogorov survival function Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}.
double kolmogorov_q(double lambda);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
KsResult ks_one_sample(std::vector<double> xs, const std::function<double(double)>& cdf);

/// OLS slope of log y against log x; empty unless at least three points.
std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace hydroneuro
