#pragma once

// Shared helpers for the test suites: deterministic random path/control
// generators built on the counter RNG, a two-sample Kolmogorov-Smirnov
// statistic, and small numeric utilities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "svr/paths.hpp"
#include "svr/rng.hpp"

namespace svr_test {

/// Random piecewise-linear path: Gaussian increments scaled so the path has
/// O(1) magnitude regardless of the node count. Stream 5 keeps these draws
/// disjoint from the simulator streams.
inline svr::Path random_path(svr::TimeGrid grid, std::uint64_t seed, std::uint64_t index,
                             double start = 0.0, double scale = 1.0) {
    std::vector<double> v(grid.n_steps() + 1);
    v[0] = start;
    const double step = scale / std::sqrt(static_cast<double>(grid.n_steps()));
    for (std::size_t k = 0; k < grid.n_steps(); ++k)
        v[k + 1] = v[k] + step * svr::counter_gaussian(seed, index, k, 5);
    return svr::Path(grid, std::move(v));
}

inline svr::Control random_control(svr::TimeGrid grid, std::uint64_t seed, std::uint64_t index,
                                   double scale = 1.0) {
    std::vector<double> d(grid.n_steps());
    for (std::size_t k = 0; k < grid.n_steps(); ++k)
        d[k] = scale * svr::counter_gaussian(seed, index, k, 6);
    return svr::Control(grid, std::move(d));
}

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i;
        else ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(a.size()) -
                                 static_cast<double>(j) / static_cast<double>(b.size())));
    }
    return d;
}

/// Critical value of the two-sample KS test at significance alpha = 0.01.
inline double ks_critical_1pct(std::size_t n, std::size_t m) {
    return 1.628 * std::sqrt(static_cast<double>(n + m) /
                             (static_cast<double>(n) * static_cast<double>(m)));
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Black-Scholes call price (r continuously compounded, maturity T).
inline double black_scholes_call(double s0, double K, double sigma, double r, double T) {
    const double sq = sigma * std::sqrt(T);
    const double d1 = (std::log(s0 / K) + (r + 0.5 * sigma * sigma) * T) / sq;
    const double d2 = d1 - sq;
    return s0 * standard_normal_cdf(d1) - K * std::exp(-r * T) * standard_normal_cdf(d2);
}

}  // namespace svr_test
