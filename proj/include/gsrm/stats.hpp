#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gsrm/error.hpp"

namespace gsrm::stats {

// Pairwise (tree) summation. Besides the accuracy win, it makes the mean of a
// power-of-two count of identical doubles exact, which downstream aggregation
// contracts rely on.
// Strict pairwise (base case 2): for 2^k equal addends every level is an
// exact doubling, so means of identical samples reproduce the value exactly.
inline double pairwise_sum(const double* x, std::size_t n) {
    if (n == 0) return 0.0;
    if (n == 1) return x[0];
    if (n == 2) return x[0] + x[1];
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

inline double mean(const std::vector<double>& x) {
    if (x.empty()) fail("mean: empty input");
    return pairwise_sum(x) / double(x.size());
}

// Population standard deviation (divide by n, not n-1).
inline double population_std(const std::vector<double>& x) {
    if (x.empty()) fail("population_std: empty input");
    const double m = mean(x);
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - m;
        sq[i] = d * d;
    }
    return std::sqrt(pairwise_sum(sq) / double(x.size()));
}

// Type-7 quantile (linear interpolation between order statistics), the R /
// NumPy default: h = (n-1)p, q = x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)]).
// `p` in [0, 1]; input need not be sorted.
inline double quantile_type7(std::vector<double> x, double p) {
    if (x.empty()) fail("quantile_type7: empty input");
    if (p < 0.0 || p > 1.0) fail("quantile_type7: p outside [0, 1]");
    std::sort(x.begin(), x.end());
    const double h = double(x.size() - 1) * p;
    const std::size_t lo = std::size_t(std::floor(h));
    if (lo + 1 >= x.size()) return x.back();
    const double frac = h - double(lo);
    return x[lo] + frac * (x[lo + 1] - x[lo]);
}

// Ordinary least squares slope of y against t. Requires at least two points
// and non-degenerate t.
inline double ols_slope(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size()) fail("ols_slope: length mismatch");
    if (t.size() < 2) fail("ols_slope: need at least two points");
    const double tm = mean(t);
    const double ym = mean(y);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double dt = t[i] - tm;
        num += dt * (y[i] - ym);
        den += dt * dt;
    }
    if (den == 0.0) fail("ols_slope: degenerate abscissa");
    return num / den;
}

} // namespace gsrm::stats
