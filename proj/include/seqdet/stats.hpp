#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace seqdet::stats {

/// Streaming mean/variance accumulator (Welford).
class Summary {
public:
    void add(double x);
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    /// Sample variance (n-1 denominator); 0 for fewer than two points.
    double variance() const;
    double std_error() const;
    double ci95_half_width() const { return 1.959963984540054 * std_error(); }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

Summary summarize(std::span<const double> xs);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;

    double slope_ci95_low() const { return slope - 1.959963984540054 * slope_se; }
    double slope_ci95_high() const { return slope + 1.959963984540054 * slope_se; }
};

/// Ordinary least squares; slope_se from the residual variance.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Weighted least squares with known per-point standard errors (weights
/// 1/se^2); slope_se from the weight matrix, not the residuals.
LineFit fit_line_weighted(std::span<const double> x, std::span<const double> y,
                          std::span<const double> se);

/// Empirical quantile with linear interpolation, p in [0, 1]. Copies its input.
double quantile(std::vector<double> xs, double p);

} // namespace seqdet::stats
