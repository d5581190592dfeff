#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include "svr/rng.hpp"

namespace svr {

using Objective = std::function<double(const std::vector<double>&)>;

struct OptimizerConfig {
    std::size_t n_starts = 8;  // zero start + (n_starts - 1) random starts
    std::size_t max_iterations = 200;
    double gradient_tolerance = 1e-7;
    double finite_difference_step = 1e-6;  // relative step for central differences
    double start_scale = 0.5;              // magnitude of random initial points
    std::vector<double> constraint_penalty_schedule = {1e2, 1e4, 1e6};
};

struct LocalResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    double gradient_norm = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t n_evals = 0;
};

inline std::vector<double> central_gradient(const Objective& f, std::vector<double> x,
                                            double rel_step, std::size_t& n_evals) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(x);
        x[i] = xi - h;
        const double fm = f(x);
        x[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
        n_evals += 2;
    }
    return g;
}

/// Limited-memory BFGS with central-difference gradients and an Armijo
/// backtracking line search. Objectives may return +inf outside their domain;
/// such points are simply rejected by the line search.
inline LocalResult lbfgs_minimize(const Objective& f, std::vector<double> x0,
                                  const OptimizerConfig& cfg, std::size_t memory = 10) {
    LocalResult res;
    std::vector<double> x = std::move(x0);
    double fx = f(x);
    res.n_evals = 1;
    if (!std::isfinite(fx)) {
        res.x = x;
        res.value = fx;
        return res;
    }
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::vector<double> grad = central_gradient(f, x, cfg.finite_difference_step, res.n_evals);

    auto norm = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double a : v) s += a * a;
        return std::sqrt(s);
    };
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };

    for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
        const double gnorm = norm(grad);
        if (gnorm <= cfg.gradient_tolerance) {
            res.converged = true;
            res.gradient_norm = gnorm;
            break;
        }
        // two-loop recursion
        std::vector<double> q = grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * dot(s_hist[i], q);
            for (std::size_t j = 0; j < q.size(); ++j) q[j] -= alpha[i] * y_hist[i][j];
        }
        double gamma = 1.0;
        if (!s_hist.empty()) {
            const double yy = dot(y_hist.back(), y_hist.back());
            if (yy > 0.0) gamma = dot(s_hist.back(), y_hist.back()) / yy;
        }
        for (double& qi : q) qi *= gamma;
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * dot(y_hist[i], q);
            for (std::size_t j = 0; j < q.size(); ++j) q[j] += (alpha[i] - beta) * s_hist[i][j];
        }
        // descent direction is -q
        double dir_deriv = -dot(grad, q);
        std::vector<double> dir(q.size());
        if (dir_deriv >= 0.0) {  // fall back to steepest descent
            for (std::size_t j = 0; j < q.size(); ++j) dir[j] = -grad[j];
            dir_deriv = -dot(grad, grad);
        } else {
            for (std::size_t j = 0; j < q.size(); ++j) dir[j] = -q[j];
        }

        double step = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        std::vector<double> x_new(x.size());
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            for (std::size_t j = 0; j < x.size(); ++j) x_new[j] = x[j] + step * dir[j];
            f_new = f(x_new);
            ++res.n_evals;
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * dir_deriv) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.gradient_norm = gnorm;
            break;  // stuck (nonsmooth kink or noise floor); report current point
        }
        std::vector<double> grad_new = central_gradient(f, x_new, cfg.finite_difference_step, res.n_evals);
        std::vector<double> s(x.size()), yv(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            s[j] = x_new[j] - x[j];
            yv[j] = grad_new[j] - grad[j];
        }
        const double sy = dot(s, yv);
        if (sy > 1e-14) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        x = std::move(x_new);
        fx = f_new;
        grad = std::move(grad_new);
        res.gradient_norm = norm(grad);
        if (res.gradient_norm <= cfg.gradient_tolerance) {
            res.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    res.value = fx;
    return res;
}

/// Deterministic random start: Gaussian entries scaled by start_scale, keyed
/// by (start index, coordinate) through the counter generator.
inline std::vector<double> random_start(std::size_t dim, std::size_t start_index, double scale,
                                        std::uint64_t seed = 0x5eedULL) {
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < dim; ++i)
        x[i] = scale * counter_gaussian(seed, start_index, i, 7);
    return x;
}

struct MultiStartResult {
    LocalResult best;
    std::size_t n_starts = 0;
    std::size_t converged_starts = 0;
};

/// Multi-start local minimization: the zero start plus random Gaussian starts.
/// Ties within 1e-12 are resolved by the supplied tie-break key (smaller wins).
inline MultiStartResult multistart_minimize(
    const Objective& f, std::size_t dim, const OptimizerConfig& cfg,
    const std::function<double(const std::vector<double>&)>& tie_break_key = {}) {
    MultiStartResult ms;
    ms.n_starts = cfg.n_starts;
    double best_key = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < cfg.n_starts; ++s) {
        std::vector<double> x0 = (s == 0) ? std::vector<double>(dim, 0.0)
                                          : random_start(dim, s, cfg.start_scale);
        LocalResult lr = lbfgs_minimize(f, std::move(x0), cfg);
        if (lr.converged) ++ms.converged_starts;
        if (!std::isfinite(lr.value)) continue;
        const double key = tie_break_key ? tie_break_key(lr.x) : 0.0;
        const bool better = lr.value < ms.best.value - 1e-12 ||
                            (std::abs(lr.value - ms.best.value) <= 1e-12 && key < best_key);
        if (better) {
            best_key = key;
            ms.best = std::move(lr);
        }
    }
    return ms;
}

}  // namespace svr
