#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "svr/models.hpp"
#include "svr/paths.hpp"

namespace svr {

/// Solution of the controlled equation: phi starts at y0, reflected = Gamma(phi).
struct ControlledSolution {
    Path phi;
    Path reflected;
    Control control;
};

/// Discrete G map: forward Euler for
///   phi(t) = y0 + int a(s, (Gamma phi)(s)) ds + int c(s, (Gamma phi)(s)) g(s) ds
/// with the reflection computed incrementally from the running minimum.
inline ControlledSolution solve_controlled(const CoefficientSet& cs, double y0, const Control& g) {
    if (y0 < 0.0) throw std::invalid_argument("solve_controlled: y0 must be nonnegative");
    const std::size_t n = g.grid.n_steps();
    const double dt = g.grid.dt();
    std::vector<double> phi(n + 1), refl(n + 1);
    phi[0] = y0;
    double run_min = std::min(phi[0], 0.0);
    refl[0] = phi[0] - run_min;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = g.grid.node(k);
        phi[k + 1] = phi[k] + (cs.a(t, refl[k]) + cs.c(t, refl[k]) * g.derivative[k]) * dt;
        if (!std::isfinite(phi[k + 1]))
            throw std::runtime_error("solve_controlled: non-finite state at step " + std::to_string(k));
        run_min = std::min(run_min, std::min(phi[k + 1], 0.0));
        refl[k + 1] = phi[k + 1] - run_min;
    }
    return ControlledSolution{Path(g.grid, std::move(phi)), Path(g.grid, std::move(refl)), g};
}

/// f-hat = Gamma(G fdot): the reflected skeleton volatility induced by f.
inline Path hat_map(const CoefficientSet& cs, double y0, const Control& f) {
    return solve_controlled(cs, y0, f).reflected;
}

/// Discrete N operator: (phidot(k) - a(t_k, Gamma(phi)(k))) / c(t_k, Gamma(phi)(k))
/// with forward differences for phidot, matching the forward-Euler G so that
/// m_operator(solve_controlled(g).phi) == g in exact arithmetic. The returned
/// Control carries the N samples; its integral is M(phi).
inline Control m_operator(const CoefficientSet& cs, double y0, const Path& phi) {
    if (!cs.c_strictly_positive)
        throw std::invalid_argument("m_operator: requires strictly positive c");
    if (std::abs(phi.front() - y0) > 1e-12 * std::max(1.0, std::abs(y0)))
        throw std::invalid_argument("m_operator: phi(0) must equal y0");
    const Path refl = skorokhod_map(phi);
    const std::size_t n = phi.grid.n_steps();
    const double dt = phi.grid.dt();
    std::vector<double> deriv(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = phi.grid.node(k);
        const double cv = cs.c(t, refl.values[k]);
        if (!(cv > 0.0)) throw std::runtime_error("m_operator: c evaluated nonpositive");
        const double phidot = (phi.values[k + 1] - phi.values[k]) / dt;
        deriv[k] = (phidot - cs.a(t, refl.values[k])) / cv;
    }
    return Control(phi.grid, std::move(deriv));
}

}  // namespace svr
