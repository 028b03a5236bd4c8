#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace adfq {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// Mean and variance of one independent Gaussian.
struct GaussianParams {
    double mean = 0.0;
    double variance = 1.0;

    GaussianParams() = default;
    GaussianParams(double m, double v) : mean(m), variance(v) {
        if (!(v > 0.0)) throw std::domain_error("GaussianParams: variance must be positive");
    }

    double stddev() const { return std::sqrt(variance); }
};

inline double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double log_std_normal_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

inline double normal_pdf(double x, double mean, double stddev) {
    if (!(stddev > 0.0)) throw std::domain_error("normal_pdf: stddev must be positive");
    return std_normal_pdf((x - mean) / stddev) / stddev;
}

/// Standard normal CDF through erfc, which keeps full relative accuracy in the lower tail.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

/// log(Phi(x)), finite for every finite x.
///
/// erfc underflows below x ~ -38, so the far tail switches to the asymptotic
/// expansion of the Mills ratio. At x = -35 the truncation error of the
/// series is below 1e-16.
inline double log_normal_cdf(double x) {
    if (x > 5.0) return std::log1p(-normal_cdf(-x));
    if (x > -35.0) return std::log(normal_cdf(x));
    const double z2 = 1.0 / (x * x);
    // 1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8 - 945/x^10 + 10395/x^12
    const double series =
        1.0 + z2 * (-1.0 + z2 * (3.0 + z2 * (-15.0 + z2 * (105.0 + z2 * (-945.0 + z2 * 10395.0)))));
    return -0.5 * x * x - std::log(-x) - kLogSqrt2Pi + std::log(series);
}

/// exp(-[-y]_+^2 / 2): the ReLU surrogate for Phi(y) that becomes exact far in either tail.
inline double relu_cdf_approx(double y) {
    const double neg = std::max(0.0, -y);
    return std::exp(-0.5 * neg * neg);
}

/// log(sum(exp(values))) with the max shifted out.
inline double log_sum_exp(std::span<const double> values) {
    if (values.empty()) throw std::domain_error("log_sum_exp: empty input");
    const double m = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(m)) return m;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - m);
    return m + std::log(sum);
}

/// Density of max_i X_i for independent X_i ~ N(mean_i, variance_i).
///
/// Each summand is assembled in log space so long CDF products cannot
/// underflow before the final exponentiation.
inline double log_max_gaussian_pdf(double x, std::span<const GaussianParams> params) {
    if (params.empty()) throw std::domain_error("max_gaussian_pdf: empty parameter list");
    const std::size_t n = params.size();
    std::vector<double> log_cdf(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (!(params[j].variance > 0.0)) throw std::domain_error("max_gaussian_pdf: variance must be positive");
        log_cdf[j] = log_normal_cdf((x - params[j].mean) / params[j].stddev());
    }
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sd = params[i].stddev();
        double t = log_std_normal_pdf((x - params[i].mean) / sd) - std::log(sd);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) t += log_cdf[j];
        terms[i] = t;
    }
    return log_sum_exp(terms);
}

inline double max_gaussian_pdf(double x, std::span<const GaussianParams> params) {
    return std::exp(log_max_gaussian_pdf(x, params));
}

}  // namespace adfq
