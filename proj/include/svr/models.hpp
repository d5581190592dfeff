#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace svr {

enum class Family {
    reflected_ou,
    reflected_bm_drift,
    constant_vol,
    exponential_vol,
};

inline std::string family_name(Family f) {
    switch (f) {
        case Family::reflected_ou: return "reflected_ou";
        case Family::reflected_bm_drift: return "reflected_bm_drift";
        case Family::constant_vol: return "constant_vol";
        case Family::exponential_vol: return "exponential_vol";
    }
    return "unknown";
}

/// Model coefficients: (a, c) drive the reflecting volatility process,
/// (b, sigma) drive the asset. Coefficients are registered evaluators keyed
/// by family + parameters so model specs round-trip through text config.
struct CoefficientSet {
    Family family = Family::reflected_ou;

    // reflected_ou: a(t,x) = q(m - x), c = xi
    double q = 0.0;
    double m = 0.0;
    double xi = 1.0;
    // reflected_bm_drift: a(t,x) = drift_a, c = xi
    double drift_a = 0.0;
    // constant_vol: sigma = sigma0
    double sigma0 = 0.0;
    // exponential_vol: sigma(t,x) = exp(x - k_offset), dynamics from vol_dynamics
    double k_offset = 0.0;
    Family vol_dynamics = Family::reflected_bm_drift;

    // asset log-drift b(t,x) = mu (set to r for risk-neutral pricing runs)
    double mu = 0.0;

    bool c_strictly_positive = false;
    bool sigma_strictly_positive = false;

    // sanity-check hints consumed by validate_coefficients only
    double lipschitz_constant_hint = 1.0;
    double growth_constant_hint = 1.0;

    double a(double /*t*/, double x) const {
        switch (family == Family::exponential_vol ? vol_dynamics : family) {
            case Family::reflected_ou: return q * (m - x);
            case Family::reflected_bm_drift: return drift_a;
            default: return 0.0;
        }
    }

    double c(double /*t*/, double /*x*/) const {
        switch (family == Family::exponential_vol ? vol_dynamics : family) {
            case Family::reflected_ou: return xi;
            case Family::reflected_bm_drift: return xi;
            default: return 1.0;
        }
    }

    double b(double /*t*/, double /*x*/) const { return mu; }

    double sigma(double /*t*/, double x) const {
        switch (family) {
            case Family::constant_vol: return sigma0;
            case Family::exponential_vol: return std::exp(x - k_offset);
            default: return std::max(x, 0.0);  // sigma(t,x) = x on [0,inf), 0 below
        }
    }
};

/// Reflected OU volatility dynamics (third face of the S&S model):
/// a(t,x) = q(m - x), c = xi, b = mu, sigma(t,x) = max(x, 0).
inline CoefficientSet make_reflected_ou(double q, double m, double xi, double mu) {
    if (!(xi > 0.0)) throw std::invalid_argument("make_reflected_ou: xi must be positive");
    if (q < 0.0 || m < 0.0) throw std::invalid_argument("make_reflected_ou: q, m must be nonnegative");
    CoefficientSet cs;
    cs.family = Family::reflected_ou;
    cs.q = q;
    cs.m = m;
    cs.xi = xi;
    cs.mu = mu;
    cs.c_strictly_positive = true;
    cs.sigma_strictly_positive = false;
    cs.lipschitz_constant_hint = std::max(q, 1e-12);
    cs.growth_constant_hint = 2.0 * std::max(q * m + q, xi);
    return cs;
}

/// Reflecting Brownian motion with drift: a(t,x) = drift_a, c = xi.
inline CoefficientSet make_reflected_bm_drift(double drift_a, double xi, double mu) {
    if (!(xi > 0.0)) throw std::invalid_argument("make_reflected_bm_drift: xi must be positive");
    if (drift_a < 0.0) throw std::invalid_argument("make_reflected_bm_drift: drift_a must be nonnegative");
    CoefficientSet cs;
    cs.family = Family::reflected_bm_drift;
    cs.drift_a = drift_a;
    cs.xi = xi;
    cs.mu = mu;
    cs.c_strictly_positive = true;
    cs.sigma_strictly_positive = false;
    cs.lipschitz_constant_hint = 1e-12;
    cs.growth_constant_hint = 2.0 * std::max(drift_a, xi);
    return cs;
}

/// Degenerate Black-Scholes coefficients (constant volatility, inert
/// volatility process); used as an exact oracle.
inline CoefficientSet make_constant_vol(double sigma0, double r) {
    if (!(sigma0 > 0.0)) throw std::invalid_argument("make_constant_vol: sigma0 must be positive");
    CoefficientSet cs;
    cs.family = Family::constant_vol;
    cs.sigma0 = sigma0;
    cs.mu = r;
    cs.c_strictly_positive = true;
    cs.sigma_strictly_positive = true;
    cs.lipschitz_constant_hint = 1e-12;
    cs.growth_constant_hint = 2.0;
    return cs;
}

/// Strictly positive exponential volatility map sigma(t,x) = exp(x - k) on
/// top of the volatility dynamics of a supplied reflected family.
inline CoefficientSet make_exponential_vol(double k, double mu, const CoefficientSet& dynamics) {
    if (!std::isfinite(k)) throw std::invalid_argument("make_exponential_vol: k must be finite");
    if (dynamics.family != Family::reflected_ou && dynamics.family != Family::reflected_bm_drift)
        throw std::invalid_argument("make_exponential_vol: dynamics must come from a reflected family");
    CoefficientSet cs = dynamics;
    cs.family = Family::exponential_vol;
    cs.vol_dynamics = dynamics.family;
    cs.k_offset = k;
    cs.mu = mu;
    cs.c_strictly_positive = true;
    cs.sigma_strictly_positive = true;
    return cs;
}

/// Full model: coefficients + initial states, correlation, rate, horizon.
struct ModelSpec {
    CoefficientSet coefficients;
    double y0 = 0.0;   // initial volatility-process state, >= 0
    double s0 = 1.0;   // initial asset price, > 0
    double rho = 0.0;  // correlation, |rho| < 1
    double r = 0.0;    // interest rate
    double T = 1.0;    // horizon

    ModelSpec(CoefficientSet cs, double y0_, double s0_, double rho_, double r_, double T_)
        : coefficients(cs), y0(y0_), s0(s0_), rho(rho_), r(r_), T(T_) {
        if (y0 < 0.0) throw std::invalid_argument("ModelSpec: y0 must be nonnegative");
        if (!(s0 > 0.0)) throw std::invalid_argument("ModelSpec: s0 must be positive");
        if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("ModelSpec: |rho| must be < 1");
        if (r < 0.0) throw std::invalid_argument("ModelSpec: r must be nonnegative");
        if (!(T > 0.0)) throw std::invalid_argument("ModelSpec: T must be positive");
    }

    double x0() const { return std::log(s0); }
    double rho_bar() const { return std::sqrt(1.0 - rho * rho); }
};

struct ValidationReport {
    double lipschitz_estimate = 0.0;  // max sampled quotient of |a|+|c| differences
    double growth_estimate = 0.0;     // max sampled (|a|+|c|)/(1+|x|)
    bool lipschitz_violation = false;
    bool growth_violation = false;
    bool ok() const { return !lipschitz_violation && !growth_violation; }
};

/// Sampling-based sanity check of the local Lipschitz and sublinear growth
/// conditions on [0,T] x [0, box_radius]. Not a proof.
inline ValidationReport validate_coefficients(const CoefficientSet& cs, double box_radius,
                                              std::size_t grid_points, double horizon = 1.0) {
    if (!(box_radius > 0.0)) throw std::invalid_argument("validate_coefficients: box_radius must be positive");
    if (grid_points < 2) throw std::invalid_argument("validate_coefficients: need at least 2 grid points");
    ValidationReport rep;
    for (std::size_t it = 0; it < grid_points; ++it) {
        const double t = horizon * static_cast<double>(it) / static_cast<double>(grid_points - 1);
        double prev_x = 0.0, prev_val = 0.0;
        for (std::size_t ix = 0; ix < grid_points; ++ix) {
            const double x = box_radius * static_cast<double>(ix) / static_cast<double>(grid_points - 1);
            const double av = cs.a(t, x), cv = cs.c(t, x);
            if (!std::isfinite(av) || !std::isfinite(cv))
                throw std::runtime_error("validate_coefficients: non-finite coefficient evaluation");
            const double val = std::abs(av) + std::abs(cv);
            rep.growth_estimate = std::max(rep.growth_estimate, val / (1.0 + std::abs(x)));
            if (ix > 0) {
                const double quot =
                    (std::abs(cs.a(t, x) - cs.a(t, prev_x)) + std::abs(cs.c(t, x) - cs.c(t, prev_x))) /
                    (x - prev_x);
                rep.lipschitz_estimate = std::max(rep.lipschitz_estimate, quot);
            }
            prev_x = x;
            prev_val = val;
            (void)prev_val;
        }
    }
    rep.lipschitz_violation = rep.lipschitz_estimate > 2.0 * cs.lipschitz_constant_hint;
    rep.growth_violation = rep.growth_estimate > 2.0 * cs.growth_constant_hint;
    return rep;
}

}  // namespace svr
