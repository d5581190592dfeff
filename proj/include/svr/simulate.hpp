#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "svr/models.hpp"
#include "svr/paths.hpp"
#include "svr/rng.hpp"

namespace svr {

/// Brownian increments for one replica. dW drives the asset-specific noise,
/// dB the volatility noise; the two come from independent counter streams
/// derived from (seed, replica_index), so regeneration is bit-identical.
struct NoiseBundle {
    TimeGrid grid;
    std::vector<double> dW;
    std::vector<double> dB;
    std::uint64_t seed = 0;
    std::uint64_t replica_index = 0;

    NoiseBundle(TimeGrid g, std::uint64_t seed_, std::uint64_t replica)
        : grid(g), dW(g.n_steps()), dB(g.n_steps()), seed(seed_), replica_index(replica) {
        const double sqrt_dt = std::sqrt(g.dt());
        for (std::size_t k = 0; k < g.n_steps(); ++k) {
            dW[k] = sqrt_dt * counter_gaussian(seed, replica, k, 0);
            dB[k] = sqrt_dt * counter_gaussian(seed, replica, k, 1);
        }
    }
};

struct SimulatedTriple {
    Path U;  // unconstrained process
    Path Y;  // reflected volatility, Y = Gamma(U) node-wise
    Path X;  // log-price (x0 not subtracted)
};

struct ReplicaAbort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Euler scheme for the unconstrained process with the incremental discrete
/// Skorokhod reflection: coefficients are evaluated at the reflected state.
///   U(k+1) = U(k) + a(t_k, Y(k)) dt + sqrt(eps) c(t_k, Y(k)) dB(k)
///   Y(k)   = U(k) - min_{j<=k}(min(U(j), 0))
inline std::pair<Path, Path> simulate_volatility(const ModelSpec& spec, double eps,
                                                 const NoiseBundle& noise) {
    if (!(eps > 0.0) || eps > 1.0) throw std::invalid_argument("simulate_volatility: eps must be in (0,1]");
    if (noise.grid.horizon() != spec.T)
        throw std::invalid_argument("simulate_volatility: noise grid horizon must match spec.T");
    const auto& cs = spec.coefficients;
    const std::size_t n = noise.grid.n_steps();
    const double dt = noise.grid.dt();
    const double sqeps = std::sqrt(eps);
    std::vector<double> u(n + 1), y(n + 1);
    u[0] = spec.y0;
    double run_min = std::min(u[0], 0.0);
    y[0] = u[0] - run_min;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = noise.grid.node(k);
        u[k + 1] = u[k] + cs.a(t, y[k]) * dt + sqeps * cs.c(t, y[k]) * noise.dB[k];
        if (!std::isfinite(u[k + 1]))
            throw ReplicaAbort("simulate_volatility: non-finite state at step " + std::to_string(k));
        run_min = std::min(run_min, std::min(u[k + 1], 0.0));
        y[k + 1] = u[k + 1] - run_min;
    }
    return {Path(noise.grid, std::move(u)), Path(noise.grid, std::move(y))};
}

/// Runs simulate_volatility, then the Euler log-price recursion including the
/// finite-eps Ito correction:
///   X(k+1) = X(k) + b dt - (eps/2) sigma^2 dt + sqrt(eps) sigma (rho_bar dW + rho dB).
inline SimulatedTriple simulate_logprice(const ModelSpec& spec, double eps, const NoiseBundle& noise) {
    auto [U, Y] = simulate_volatility(spec, eps, noise);
    const auto& cs = spec.coefficients;
    const std::size_t n = noise.grid.n_steps();
    const double dt = noise.grid.dt();
    const double sqeps = std::sqrt(eps);
    const double rho = spec.rho, rho_bar = spec.rho_bar();
    std::vector<double> x(n + 1);
    x[0] = spec.x0();
    for (std::size_t k = 0; k < n; ++k) {
        const double t = noise.grid.node(k);
        const double s = cs.sigma(t, Y.values[k]);
        x[k + 1] = x[k] + cs.b(t, Y.values[k]) * dt - 0.5 * eps * s * s * dt +
                   sqeps * s * (rho_bar * noise.dW[k] + rho * noise.dB[k]);
        if (!std::isfinite(x[k + 1]))
            throw ReplicaAbort("simulate_logprice: non-finite state at step " + std::to_string(k));
    }
    return SimulatedTriple{std::move(U), std::move(Y), Path(noise.grid, std::move(x))};
}

struct MCEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n_replicas = 0;
    std::size_t aborted = 0;
    std::uint64_t seed = 0;
    double eps = 1.0;
};

using PathStatistic = std::function<double(const SimulatedTriple&)>;

/// Pairwise (cascade) summation: deterministic to the last bit regardless of
/// the number of workers that produced the values.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

inline unsigned default_workers() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

/// Mean and standard error of a path statistic over independent replicas.
/// Replica i uses the noise stream (seed, i); values are stored by replica
/// index and reduced pairwise, so the result does not depend on worker count.
inline MCEstimate batch_estimate(const ModelSpec& spec, double eps, std::size_t n_replicas,
                                 std::uint64_t seed, const PathStatistic& statistic,
                                 TimeGrid grid, unsigned n_workers = 0) {
    if (n_replicas < 2) throw std::invalid_argument("batch_estimate: n_replicas must be >= 2");
    if (n_workers == 0) n_workers = default_workers();
    std::vector<double> values(n_replicas, 0.0);
    std::vector<std::uint8_t> ok(n_replicas, 0);

    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            try {
                NoiseBundle noise(grid, seed, i);
                values[i] = statistic(simulate_logprice(spec, eps, noise));
                ok[i] = 1;
            } catch (const ReplicaAbort&) {
                ok[i] = 0;
            }
        }
    };

    if (n_workers <= 1 || n_replicas < 256) {
        run_range(0, n_replicas);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n_replicas + n_workers - 1) / n_workers;
        for (unsigned w = 0; w < n_workers; ++w) {
            const std::size_t lo = std::min<std::size_t>(w * chunk, n_replicas);
            const std::size_t hi = std::min<std::size_t>(lo + chunk, n_replicas);
            if (lo < hi) pool.emplace_back(run_range, lo, hi);
        }
        for (auto& t : pool) t.join();
    }

    std::size_t aborted = 0;
    std::vector<double> good;
    good.reserve(n_replicas);
    for (std::size_t i = 0; i < n_replicas; ++i) {
        if (ok[i]) good.push_back(values[i]);
        else ++aborted;
    }
    MCEstimate est;
    est.n_replicas = good.size();
    est.aborted = aborted;
    est.seed = seed;
    est.eps = eps;
    if (good.empty()) return est;
    est.mean = pairwise_sum(good) / static_cast<double>(good.size());
    std::vector<double> sq(good.size());
    for (std::size_t i = 0; i < good.size(); ++i) {
        const double d = good[i] - est.mean;
        sq[i] = d * d;
    }
    if (good.size() > 1) {
        const double var = pairwise_sum(sq) / static_cast<double>(good.size() - 1);
        est.stderr_ = std::sqrt(var / static_cast<double>(good.size()));
    }
    return est;
}

// Named statistics used by the CLI and the pricing layer.

inline PathStatistic stat_constant_one() {
    return [](const SimulatedTriple&) { return 1.0; };
}

inline PathStatistic stat_terminal_logprice() {
    return [](const SimulatedTriple& s) { return s.X.back(); };
}

/// Indicator of {X_T - x0 >= k}.
inline PathStatistic stat_terminal_indicator(double x0, double k) {
    return [x0, k](const SimulatedTriple& s) { return (s.X.back() - x0 >= k) ? 1.0 : 0.0; };
}

inline PathStatistic stat_sup_volatility() {
    return [](const SimulatedTriple& s) { return sup_norm(s.Y); };
}

/// Indicator of {sup_t Y_t >= y}.
inline PathStatistic stat_sup_volatility_indicator(double y) {
    return [y](const SimulatedTriple& s) { return (sup_norm(s.Y) >= y) ? 1.0 : 0.0; };
}

}  // namespace svr
