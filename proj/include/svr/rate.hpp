#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "svr/control.hpp"
#include "svr/models.hpp"
#include "svr/optimize.hpp"
#include "svr/paths.hpp"

namespace svr {

inline constexpr double kDegenerateDenominator = 1e-14;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct DegenerateDenominator : std::runtime_error {
    DegenerateDenominator() : std::runtime_error("integral of sigma(f-hat)^2 vanishes") {}
};

struct RateResult {
    double value = kInfinity;
    bool infinite = false;
    std::optional<Control> minimizer_f;
    std::optional<Path> minimizer_g;
    std::size_t n_starts = 0;
    std::size_t converged_starts = 0;
    double best_gradient_norm = kInfinity;
    TimeGrid grid;
    // branch values reported when y0 = 0 (terminal rate function only)
    std::optional<double> branch_l1;
    std::optional<double> branch_l2;

    explicit RateResult(TimeGrid g) : grid(g) {}
};

namespace detail {

/// One pass over the grid: solves the controlled equation for phi and
/// accumulates the left-endpoint integrals entering the terminal rate
/// objective. No allocation.
struct SkeletonIntegrals {
    double drift_integral = 0.0;      // int b(s, fhat) ds
    double corr_integral = 0.0;       // int rho sigma(s, fhat) fdot ds
    double variance_integral = 0.0;   // int sigma(s, fhat)^2 ds
    double energy2 = 0.0;             // int fdot^2 ds
    double sup_reflected = 0.0;       // sup over nodes of Gamma(phi)
    bool finite = true;
};

inline SkeletonIntegrals skeleton_integrals(const ModelSpec& spec, const TimeGrid& grid,
                                            const std::vector<double>& fdot) {
    const auto& cs = spec.coefficients;
    const double dt = grid.dt();
    const double rho = spec.rho;
    SkeletonIntegrals out;
    double phi = spec.y0;
    double run_min = std::min(phi, 0.0);
    double refl = phi - run_min;
    out.sup_reflected = refl;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        const double t = grid.node(k);
        const double s = cs.sigma(t, refl);
        out.drift_integral += cs.b(t, refl) * dt;
        out.corr_integral += rho * s * fdot[k] * dt;
        out.variance_integral += s * s * dt;
        out.energy2 += fdot[k] * fdot[k] * dt;
        phi += (cs.a(t, refl) + cs.c(t, refl) * fdot[k]) * dt;
        if (!std::isfinite(phi)) {
            out.finite = false;
            return out;
        }
        run_min = std::min(run_min, std::min(phi, 0.0));
        refl = phi - run_min;
        out.sup_reflected = std::max(out.sup_reflected, refl);
    }
    return out;
}

}  // namespace detail

/// Terminal-rate objective for a single control:
///   (x - int[b + rho sigma fdot])^2 / (2 rhobar^2 int sigma^2) + (1/2) int fdot^2
/// with all integrals over the skeleton volatility fhat = Gamma(G fdot).
/// Throws DegenerateDenominator when int sigma(fhat)^2 < 1e-14.
inline double itilde_objective(const ModelSpec& spec, double x, const Control& f) {
    const auto si = detail::skeleton_integrals(spec, f.grid, f.derivative);
    if (!si.finite) return kInfinity;
    if (si.variance_integral < kDegenerateDenominator) throw DegenerateDenominator();
    const double rb = spec.rho_bar();
    const double num = x - si.drift_integral - si.corr_integral;
    return num * num / (2.0 * rb * rb * si.variance_integral) + 0.5 * si.energy2;
}

/// Closed-form infimum of int fdot^2 over the L1 set for reflecting Brownian
/// motion with drift and y0 = 0, cross-checked against the constrained
/// optimizer (projected descent on fdot <= -a/xi).
inline double l1_infimum(const ModelSpec& spec, const TimeGrid& grid) {
    const auto& cs = spec.coefficients;
    if (cs.family != Family::reflected_bm_drift)
        throw std::invalid_argument("l1_infimum: closed form only for reflected_bm_drift");
    if (spec.y0 != 0.0) throw std::invalid_argument("l1_infimum: requires y0 = 0");
    const double bound = -cs.drift_a / cs.xi;
    const double closed_form = cs.drift_a * cs.drift_a * spec.T / (cs.xi * cs.xi);

    // projected gradient descent on dt * sum fdot^2 subject to fdot <= bound
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    std::vector<double> fdot(n, bound - 1.0);
    for (int iter = 0; iter < 500; ++iter) {
        for (std::size_t k = 0; k < n; ++k)
            fdot[k] = std::min(fdot[k] - 0.4 * 2.0 * fdot[k], bound);
    }
    double check = 0.0;
    for (double d : fdot) check += d * d;
    check *= dt;
    if (std::abs(check - closed_form) > 1e-4 * std::max(1.0, closed_form))
        throw std::runtime_error("l1_infimum: constrained optimizer disagrees with closed form");
    return closed_form;
}

namespace detail {

/// Penalized L1-branch for the reflected OU family with y0 = 0: the set
/// {f : Gamma(phi_f) == 0} is represented by a quadratic penalty on the
/// sup-node of the reflected skeleton. Returns inf of int fdot^2.
inline double l1_branch_penalized(const ModelSpec& spec, const TimeGrid& grid,
                                  const OptimizerConfig& cfg) {
    const double dt = grid.dt();
    std::vector<double> penalties = cfg.constraint_penalty_schedule;
    if (penalties.empty() || penalties.back() < 1e6) penalties.push_back(1e6);
    std::vector<double> warm;
    for (std::size_t stage = 0; stage < penalties.size(); ++stage) {
        const double pen = penalties[stage];
        Objective obj = [&](const std::vector<double>& fdot) {
            const auto si = skeleton_integrals(spec, grid, fdot);
            if (!si.finite) return kInfinity;
            return si.energy2 + pen * si.sup_reflected * si.sup_reflected;
        };
        if (stage == 0) {
            MultiStartResult ms = multistart_minimize(obj, grid.n_steps(), cfg);
            warm = ms.best.x;
        } else {
            LocalResult lr = lbfgs_minimize(obj, warm, cfg);
            if (std::isfinite(lr.value)) warm = lr.x;
        }
    }
    const auto si = skeleton_integrals(spec, grid, warm);
    return si.energy2 + penalties.back() * si.sup_reflected * si.sup_reflected;
}

}  // namespace detail

/// Terminal rate function I~_T(x): multi-start quasi-Newton minimization over
/// discretized controls; for y0 = 0 the L1 branch is evaluated separately and
/// the smaller branch wins.
inline RateResult itilde(const ModelSpec& spec, double x, const TimeGrid& grid,
                         const OptimizerConfig& cfg) {
    RateResult res(grid);
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();

    Objective obj = [&](const std::vector<double>& fdot) {
        const auto si = detail::skeleton_integrals(spec, grid, fdot);
        if (!si.finite || si.variance_integral < kDegenerateDenominator) return kInfinity;
        const double rb = spec.rho_bar();
        const double num = x - si.drift_integral - si.corr_integral;
        return num * num / (2.0 * rb * rb * si.variance_integral) + 0.5 * si.energy2;
    };
    auto energy_key = [&](const std::vector<double>& fdot) {
        double s = 0.0;
        for (double d : fdot) s += d * d;
        return 0.5 * dt * s;
    };

    MultiStartResult ms = multistart_minimize(obj, n, cfg, energy_key);
    res.n_starts = ms.n_starts;
    res.converged_starts = ms.converged_starts;
    res.best_gradient_norm = ms.best.gradient_norm;
    double l2_value = ms.best.value;

    // L1 branch: only relevant at x = mu*T when y0 = 0 (the rate function is
    // given branch-wise there; away from mu*T the L1 controls cost +inf).
    std::optional<double> l1_value;
    if (spec.y0 == 0.0) {
        const double muT = spec.coefficients.mu * spec.T;
        if (std::abs(x - muT) <= 1e-12 * std::max(1.0, std::abs(muT))) {
            const auto family = spec.coefficients.family;
            if (family == Family::reflected_bm_drift) {
                l1_value = 0.5 * l1_infimum(spec, grid);
            } else if (family == Family::reflected_ou) {
                l1_value = 0.5 * detail::l1_branch_penalized(spec, grid, cfg);
            }
            // strictly positive sigma: the L1 set is empty
        }
    }
    res.branch_l2 = std::isfinite(l2_value) ? std::optional<double>(l2_value) : std::nullopt;
    res.branch_l1 = l1_value;

    if (l1_value && *l1_value < l2_value) {
        res.value = *l1_value;
        res.minimizer_f.reset();
    } else if (std::isfinite(l2_value)) {
        res.value = l2_value;
        res.minimizer_f = Control(grid, ms.best.x);
    } else if (l1_value) {
        res.value = *l1_value;
    } else {
        res.infinite = true;
    }
    return res;
}

/// Sample-path rate function Q~_T(g) for strictly positive sigma:
/// inf over f of (1/2) int [(gdot - b - rho sigma fdot)/(rhobar sigma)]^2 + (1/2) int fdot^2.
inline RateResult qtilde(const ModelSpec& spec, const Path& g, const OptimizerConfig& cfg) {
    if (!spec.coefficients.sigma_strictly_positive)
        throw std::invalid_argument("qtilde: requires strictly positive sigma");
    const TimeGrid grid = g.grid;
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    std::vector<double> gdot(n);
    for (std::size_t k = 0; k < n; ++k) gdot[k] = (g.values[k + 1] - g.values[k]) / dt;

    const auto& cs = spec.coefficients;
    const double rho = spec.rho, rb = spec.rho_bar();
    Objective obj = [&](const std::vector<double>& fdot) {
        double phi = spec.y0;
        double run_min = std::min(phi, 0.0);
        double refl = phi - run_min;
        double acc = 0.0, energy2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = grid.node(k);
            const double s = cs.sigma(t, refl);
            const double resid = (gdot[k] - cs.b(t, refl) - rho * s * fdot[k]) / (rb * s);
            acc += resid * resid * dt;
            energy2 += fdot[k] * fdot[k] * dt;
            phi += (cs.a(t, refl) + cs.c(t, refl) * fdot[k]) * dt;
            if (!std::isfinite(phi)) return kInfinity;
            run_min = std::min(run_min, std::min(phi, 0.0));
            refl = phi - run_min;
        }
        return 0.5 * acc + 0.5 * energy2;
    };

    RateResult res(grid);
    auto energy_key = [&](const std::vector<double>& fdot) {
        double s = 0.0;
        for (double d : fdot) s += d * d;
        return 0.5 * dt * s;
    };
    MultiStartResult ms = multistart_minimize(obj, n, cfg, energy_key);
    res.n_starts = ms.n_starts;
    res.converged_starts = ms.converged_starts;
    res.best_gradient_norm = ms.best.gradient_norm;
    if (std::isfinite(ms.best.value)) {
        res.value = ms.best.value;
        res.minimizer_f = Control(grid, ms.best.x);
        res.minimizer_g = g;
    } else {
        res.infinite = true;
    }
    return res;
}

enum class BarrierKind { up_in, up_out, down_in, down_out };

struct BarrierSetSpec {
    BarrierKind kind;
    double K;  // barrier level (price units)
};

namespace detail {

/// Joint Q~_T objective over stacked variables z = [fdot | gdot].
struct JointObjective {
    const ModelSpec& spec;
    TimeGrid grid;

    double base(const std::vector<double>& z) const {
        const auto& cs = spec.coefficients;
        const std::size_t n = grid.n_steps();
        const double dt = grid.dt();
        const double rho = spec.rho, rb = spec.rho_bar();
        double phi = spec.y0;
        double run_min = std::min(phi, 0.0);
        double refl = phi - run_min;
        double acc = 0.0, energy2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = grid.node(k);
            const double s = cs.sigma(t, refl);
            const double fd = z[k], gd = z[n + k];
            const double resid = (gd - cs.b(t, refl) - rho * s * fd) / (rb * s);
            acc += resid * resid * dt;
            energy2 += fd * fd * dt;
            phi += (cs.a(t, refl) + cs.c(t, refl) * fd) * dt;
            if (!std::isfinite(phi)) return kInfinity;
            run_min = std::min(run_min, std::min(phi, 0.0));
            refl = phi - run_min;
        }
        return 0.5 * acc + 0.5 * energy2;
    }

    /// Running extreme of the g path over nodes 1..n (the set definitions
    /// quantify over s in (0, T]).
    double g_extreme(const std::vector<double>& z, bool maximum) const {
        const std::size_t n = grid.n_steps();
        const double dt = grid.dt();
        double g = 0.0;
        double ext = maximum ? -kInfinity : kInfinity;
        for (std::size_t k = 0; k < n; ++k) {
            g += dt * z[n + k];
            ext = maximum ? std::max(ext, g) : std::min(ext, g);
        }
        return ext;
    }
};

}  // namespace detail

/// Infimum of Q~_T over a barrier set by joint optimization over (f, g).
/// Hitting sets (up_in/down_in) use an escalating exact-penalty schedule
/// followed by feasibility restoration (the g path is scaled onto the barrier
/// and f is re-optimized), so the reported value is attained by a feasible g.
inline RateResult qtilde_pathset_inf(const ModelSpec& spec, const BarrierSetSpec& set_spec,
                                     const TimeGrid& grid, const OptimizerConfig& cfg) {
    if (!spec.coefficients.sigma_strictly_positive)
        throw std::invalid_argument("qtilde_pathset_inf: requires strictly positive sigma");
    const bool up = (set_spec.kind == BarrierKind::up_in || set_spec.kind == BarrierKind::up_out);
    if (up && !(spec.s0 < set_spec.K))
        throw std::invalid_argument("qtilde_pathset_inf: up-type barrier requires s0 < K");
    if (!up && !(set_spec.K < spec.s0))
        throw std::invalid_argument("qtilde_pathset_inf: down-type barrier requires K < s0");

    const double level = std::log(set_spec.K) - spec.x0();  // barrier in centered log space
    const std::size_t n = grid.n_steps();
    const double dt = grid.dt();
    detail::JointObjective joint{spec, grid};

    RateResult res(grid);
    const bool hitting =
        (set_spec.kind == BarrierKind::up_in || set_spec.kind == BarrierKind::down_in);

    if (!hitting) {
        // Open avoiding set: the natural drift path g*(t) = int b(s, fhat0) ds
        // with f = 0 costs zero; if it stays strictly inside, the infimum is 0.
        std::vector<double> z(2 * n, 0.0);
        const Path fhat0 = hat_map(spec.coefficients, spec.y0, Control::zero(grid));
        for (std::size_t k = 0; k < n; ++k)
            z[n + k] = spec.coefficients.b(grid.node(k), fhat0.values[k]);
        const double ext = joint.g_extreme(z, up);
        const bool feasible = up ? (ext < level) : (ext > level);
        if (feasible) {
            res.value = joint.base(z);
            std::vector<double> gvals(n + 1, 0.0);
            for (std::size_t k = 0; k < n; ++k) gvals[k + 1] = gvals[k] + dt * z[n + k];
            res.minimizer_g = Path(grid, std::move(gvals));
            res.minimizer_f = Control::zero(grid);
            res.n_starts = 1;
            res.converged_starts = 1;
            res.best_gradient_norm = 0.0;
            return res;
        }
        // Otherwise search the interior with a one-sided penalty keeping a
        // small margin inside the open set.
        const double margin = 1e-6 * std::max(1.0, std::abs(level));
        Objective obj = [&](const std::vector<double>& zz) {
            const double e = joint.g_extreme(zz, up);
            const double viol = up ? std::max(0.0, e - (level - margin))
                                   : std::max(0.0, (level + margin) - e);
            return joint.base(zz) + 1e6 * viol * viol;
        };
        MultiStartResult ms = multistart_minimize(obj, 2 * n, cfg);
        res.n_starts = ms.n_starts;
        res.converged_starts = ms.converged_starts;
        res.best_gradient_norm = ms.best.gradient_norm;
        if (!std::isfinite(ms.best.value)) {
            res.infinite = true;
            return res;
        }
        res.value = joint.base(ms.best.x);
        res.minimizer_f = Control(grid, std::vector<double>(ms.best.x.begin(), ms.best.x.begin() + n));
        std::vector<double> gvals(n + 1, 0.0);
        for (std::size_t k = 0; k < n; ++k) gvals[k + 1] = gvals[k] + dt * ms.best.x[n + k];
        res.minimizer_g = Path(grid, std::move(gvals));
        return res;
    }

    // Hitting set: penalty schedule, warm-started across stages.
    std::vector<double> penalties = cfg.constraint_penalty_schedule;
    if (penalties.empty()) penalties = {1e2, 1e4, 1e6};
    std::vector<double> best_z;
    double best_penalized = kInfinity;
    std::size_t converged = 0, starts = 0;
    double gradient_norm = kInfinity;
    for (std::size_t stage = 0; stage < penalties.size(); ++stage) {
        const double pen = penalties[stage];
        Objective obj = [&](const std::vector<double>& zz) {
            const double e = joint.g_extreme(zz, up);
            const double viol = up ? std::max(0.0, level - e) : std::max(0.0, e - level);
            return joint.base(zz) + pen * viol * viol;
        };
        if (stage == 0) {
            MultiStartResult ms = multistart_minimize(obj, 2 * n, cfg);
            starts = ms.n_starts;
            converged = ms.converged_starts;
            gradient_norm = ms.best.gradient_norm;
            best_z = ms.best.x;
            best_penalized = ms.best.value;
        } else {
            LocalResult lr = lbfgs_minimize(obj, best_z, cfg);
            if (std::isfinite(lr.value)) {
                best_z = lr.x;
                best_penalized = lr.value;
                gradient_norm = lr.gradient_norm;
                if (lr.converged) ++converged;
            }
        }
    }
    (void)best_penalized;
    if (best_z.empty()) {
        res.infinite = true;
        return res;
    }

    // Feasibility restoration: scale g onto the barrier, then re-optimize f
    // with g fixed. The result is an exact feasible evaluation.
    std::vector<double> gdot(best_z.begin() + n, best_z.end());
    {
        const double ext = joint.g_extreme(best_z, up);
        const bool ok = up ? (ext >= level) : (ext <= level);
        if (!ok) {
            const double denom = up ? std::max(ext, 1e-300) : std::min(ext, -1e-300);
            if ((up && ext > 0.0) || (!up && ext < 0.0)) {
                const double scale = level / denom;
                for (double& d : gdot) d *= scale;
            } else {
                // degenerate iterate: fall back to the straight line to the barrier
                for (double& d : gdot) d = level / spec.T;
            }
        }
    }
    std::vector<double> gvals(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) gvals[k + 1] = gvals[k] + dt * gdot[k];
    const Path g_path(grid, gvals);
    RateResult inner = qtilde(spec, g_path, cfg);

    res.value = inner.value;
    res.infinite = inner.infinite;
    res.minimizer_f = inner.minimizer_f;
    res.minimizer_g = g_path;
    res.n_starts = starts + inner.n_starts;
    res.converged_starts = converged + inner.converged_starts;
    res.best_gradient_norm = std::min(gradient_norm, inner.best_gradient_norm);
    return res;
}

/// Rate function of the unconstrained-process LDP. For strictly positive c
/// the constraint phi = G fdot is inverted exactly by the N operator, so no
/// optimization is involved: J(phi) = (1/2) int (N phi)^2.
inline RateResult j_rate(const CoefficientSet& cs, double y0, const Path& target) {
    RateResult res(target.grid);
    if (!cs.c_strictly_positive) throw std::invalid_argument("j_rate: requires strictly positive c");
    if (std::abs(target.front() - y0) > 1e-12 * std::max(1.0, std::abs(y0))) {
        res.infinite = true;
        return res;
    }
    Control nphi = m_operator(cs, y0, target);
    res.value = control_energy(nphi);
    res.minimizer_f = std::move(nphi);
    res.n_starts = 1;
    res.converged_starts = 1;
    res.best_gradient_norm = 0.0;
    return res;
}

}  // namespace svr
