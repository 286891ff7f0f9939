#include "seqdet/stats.hpp"

#include <algorithm>
#include <cmath>

#include "seqdet/error.hpp"

namespace seqdet::stats {

void Summary::add(double x) {
    ++n_;
    const double d1 = x - mean_;
    mean_ += d1 / static_cast<double>(n_);
    m2_ += d1 * (x - mean_);
}

double Summary::variance() const {
    return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
}

double Summary::std_error() const {
    return n_ == 0 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
}

Summary summarize(std::span<const double> xs) {
    Summary s;
    for (double x : xs) s.add(x);
    return s;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw invalid_parameter("fit_line: need at least two equal-length points");
    const auto n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw invalid_parameter("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ssr += r * r;
    }
    f.slope_se = x.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
    return f;
}

LineFit fit_line_weighted(std::span<const double> x, std::span<const double> y,
                          std::span<const double> se) {
    if (x.size() != y.size() || x.size() != se.size() || x.size() < 2)
        throw invalid_parameter("fit_line_weighted: need at least two equal-length points");
    double sw = 0, swx = 0, swy = 0;
    std::vector<double> w(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (se[i] <= 0.0) throw invalid_parameter("fit_line_weighted: non-positive std error");
        w[i] = 1.0 / (se[i] * se[i]);
        sw += w[i];
        swx += w[i] * x[i];
        swy += w[i] * y[i];
    }
    const double mx = swx / sw;
    const double my = swy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw invalid_parameter("fit_line_weighted: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.slope_se = std::sqrt(1.0 / sxx);
    return f;
}

double quantile(std::vector<double> xs, double p) {
    if (xs.empty()) throw invalid_parameter("quantile: empty sample");
    if (p < 0.0 || p > 1.0) throw invalid_parameter("quantile: p outside [0, 1]");
    std::sort(xs.begin(), xs.end());
    const double pos = p * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= xs.size()) return xs.back();
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - frac) + xs[lo + 1] * frac;
}

} // namespace seqdet::stats
