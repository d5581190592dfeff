#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "svr/models.hpp"
#include "svr/rate.hpp"
#include "svr/simulate.hpp"

namespace svr {

enum class OptionKind {
    binary_up_in,
    binary_up_out,
    binary_down_in,
    binary_down_out,
    digital_call,
    vanilla_call,
};

inline std::string option_kind_name(OptionKind k) {
    switch (k) {
        case OptionKind::binary_up_in: return "binary_up_in";
        case OptionKind::binary_up_out: return "binary_up_out";
        case OptionKind::binary_down_in: return "binary_down_in";
        case OptionKind::binary_down_out: return "binary_down_out";
        case OptionKind::digital_call: return "digital_call";
        case OptionKind::vanilla_call: return "vanilla_call";
    }
    return "unknown";
}

struct OptionSpec {
    OptionKind kind;
    double K;             // barrier or strike
    double G_cash = 1.0;  // binary payout
};

inline bool is_binary_barrier(OptionKind k) {
    return k == OptionKind::binary_up_in || k == OptionKind::binary_up_out ||
           k == OptionKind::binary_down_in || k == OptionKind::binary_down_out;
}

inline void validate_option(const ModelSpec& spec, const OptionSpec& opt) {
    if (!(opt.K > 0.0)) throw std::invalid_argument("option: K must be positive");
    if (!(opt.G_cash > 0.0)) throw std::invalid_argument("option: G must be positive");
    if (opt.kind == OptionKind::binary_up_in || opt.kind == OptionKind::binary_up_out) {
        if (!(spec.s0 < opt.K)) throw std::invalid_argument("option: up-type binary requires s0 < K");
    }
    if (opt.kind == OptionKind::binary_down_in || opt.kind == OptionKind::binary_down_out) {
        if (!(opt.K < spec.s0)) throw std::invalid_argument("option: down-type binary requires K < s0");
    }
}

inline void require_risk_neutral(const ModelSpec& spec) {
    if (spec.coefficients.mu != spec.r)
        throw std::invalid_argument("pricing: requires the risk-neutral drift b == r");
}

/// Discounted payoff of one simulated replica. Barrier monitoring is
/// node-wise on the log-price path (no continuity correction).
inline PathStatistic option_payoff_statistic(const ModelSpec& spec, const OptionSpec& opt) {
    const double disc = std::exp(-spec.r * spec.T);
    const double log_k = std::log(opt.K);
    switch (opt.kind) {
        case OptionKind::binary_up_in:
            return [=](const SimulatedTriple& s) {
                for (double x : s.X.values)
                    if (x >= log_k) return opt.G_cash * disc;
                return 0.0;
            };
        case OptionKind::binary_up_out:
            return [=](const SimulatedTriple& s) {
                for (double x : s.X.values)
                    if (x >= log_k) return 0.0;
                return opt.G_cash * disc;
            };
        case OptionKind::binary_down_in:
            return [=](const SimulatedTriple& s) {
                for (double x : s.X.values)
                    if (x <= log_k) return opt.G_cash * disc;
                return 0.0;
            };
        case OptionKind::binary_down_out:
            return [=](const SimulatedTriple& s) {
                for (double x : s.X.values)
                    if (x <= log_k) return 0.0;
                return opt.G_cash * disc;
            };
        case OptionKind::digital_call:
            return [=](const SimulatedTriple& s) {
                return s.X.back() >= log_k ? opt.G_cash * disc : 0.0;
            };
        case OptionKind::vanilla_call:
            return [=](const SimulatedTriple& s) {
                return disc * std::max(std::exp(s.X.back()) - opt.K, 0.0);
            };
    }
    throw std::logic_error("unreachable");
}

inline MCEstimate mc_option_price(const ModelSpec& spec, const OptionSpec& opt, double eps,
                                  std::size_t n_replicas, std::uint64_t seed, TimeGrid grid,
                                  unsigned n_workers = 0) {
    validate_option(spec, opt);
    require_risk_neutral(spec);
    return batch_estimate(spec, eps, n_replicas, seed, option_payoff_statistic(spec, opt), grid,
                          n_workers);
}

struct LdpPoint {
    double eps;
    double p_hat;     // normalized probability (or raw call price)
    double stderr_;
    double eps_log_p;  // eps * log(p_hat); meaningless when censored
    bool censored;     // zero MC hits
};

struct LdpReport {
    std::string option;
    std::vector<LdpPoint> points;
    double extrapolated_slope = 0.0;  // weighted LS intercept of eps*log(p) at eps = 0
    double variational_value = 0.0;
    double relative_gap = 0.0;        // |slope + variational| / max(variational, tiny)
    std::size_t censored_count = 0;
};

/// Weighted least squares of y = eps*log(p) against eps, extrapolated to
/// eps = 0. Weights are delta-method variances of eps*log(p).
inline double extrapolate_slope(const std::vector<LdpPoint>& pts) {
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    std::size_t used = 0;
    for (const auto& p : pts) {
        if (p.censored) continue;
        const double rel = p.stderr_ / p.p_hat;
        const double var = std::max(p.eps * p.eps * rel * rel, 1e-12);
        const double w = 1.0 / var;
        sw += w;
        swx += w * p.eps;
        swy += w * p.eps_log_p;
        swxx += w * p.eps * p.eps;
        swxy += w * p.eps * p.eps_log_p;
        ++used;
    }
    if (used < 2) throw std::runtime_error("extrapolate_slope: need at least 2 uncensored points");
    const double det = sw * swxx - swx * swx;
    return (swy * swxx - swx * swxy) / det;  // intercept at eps = 0
}

inline void fill_relative_gap(LdpReport& rep) {
    const double denom = std::max(std::abs(rep.variational_value), 1e-12);
    rep.relative_gap = std::abs(rep.extrapolated_slope + rep.variational_value) / denom;
}

/// MC decay-rate ladder vs. the variational barrier-set infimum.
/// MC prices are normalized by G*exp(-rT) so only the probability decays.
inline LdpReport barrier_ldp_report(const ModelSpec& spec, const OptionSpec& opt,
                                    const std::vector<double>& eps_ladder, std::size_t n_replicas,
                                    std::uint64_t seed, const OptimizerConfig& optcfg,
                                    TimeGrid mc_grid, TimeGrid rate_grid, unsigned n_workers = 0) {
    if (!is_binary_barrier(opt.kind)) throw std::invalid_argument("barrier_ldp_report: binary kinds only");
    if (!spec.coefficients.sigma_strictly_positive)
        throw std::invalid_argument("barrier_ldp_report: requires strictly positive sigma");
    for (std::size_t i = 1; i < eps_ladder.size(); ++i)
        if (!(eps_ladder[i] < eps_ladder[i - 1]))
            throw std::invalid_argument("barrier_ldp_report: eps ladder must be strictly decreasing");
    validate_option(spec, opt);
    require_risk_neutral(spec);

    LdpReport rep;
    rep.option = option_kind_name(opt.kind);
    const double norm = opt.G_cash * std::exp(-spec.r * spec.T);
    for (double eps : eps_ladder) {
        MCEstimate est = mc_option_price(spec, opt, eps, n_replicas, seed, mc_grid, n_workers);
        LdpPoint pt;
        pt.eps = eps;
        pt.p_hat = est.mean / norm;
        pt.stderr_ = est.stderr_ / norm;
        pt.censored = !(pt.p_hat > 0.0);
        pt.eps_log_p = pt.censored ? 0.0 : eps * std::log(pt.p_hat);
        if (pt.censored) ++rep.censored_count;
        rep.points.push_back(pt);
    }

    BarrierKind bk;
    switch (opt.kind) {
        case OptionKind::binary_up_in: bk = BarrierKind::up_in; break;
        case OptionKind::binary_up_out: bk = BarrierKind::up_out; break;
        case OptionKind::binary_down_in: bk = BarrierKind::down_in; break;
        default: bk = BarrierKind::down_out; break;
    }
    RateResult rr = qtilde_pathset_inf(spec, BarrierSetSpec{bk, opt.K}, rate_grid, optcfg);
    rep.variational_value = rr.value;
    rep.extrapolated_slope = extrapolate_slope(rep.points);
    fill_relative_gap(rep);
    return rep;
}

/// Call-price decay rate: MC vanilla-call ladder vs. the infimum of the
/// terminal rate function over the half-line [log K - x0, inf), scanned on an
/// x-grid whose span covers the quadratic wings.
inline LdpReport call_ldp_report(const ModelSpec& spec, double K,
                                 const std::vector<double>& eps_ladder, std::size_t n_replicas,
                                 std::uint64_t seed, const OptimizerConfig& optcfg, TimeGrid mc_grid,
                                 TimeGrid rate_grid, std::size_t x_grid_points = 64,
                                 unsigned n_workers = 0) {
    const auto family = spec.coefficients.family;
    if (family != Family::reflected_ou && family != Family::constant_vol)
        throw std::invalid_argument("call_ldp_report: reflected_ou (or the constant_vol oracle) only");
    require_risk_neutral(spec);
    if (family == Family::reflected_ou && spec.y0 == 0.0 && !(K > spec.s0 * std::exp(spec.r * spec.T)))
        throw std::invalid_argument("call_ldp_report: y0 = 0 requires an out-of-the-money strike");

    LdpReport rep;
    rep.option = "vanilla_call";
    const OptionSpec opt{OptionKind::vanilla_call, K, 1.0};
    for (double eps : eps_ladder) {
        MCEstimate est = mc_option_price(spec, opt, eps, n_replicas, seed, mc_grid, n_workers);
        LdpPoint pt;
        pt.eps = eps;
        pt.p_hat = est.mean;
        pt.stderr_ = est.stderr_;
        pt.censored = !(pt.p_hat > 0.0);
        pt.eps_log_p = pt.censored ? 0.0 : eps * std::log(pt.p_hat);
        if (pt.censored) ++rep.censored_count;
        rep.points.push_back(pt);
    }

    const double lo = std::log(K) - spec.x0();
    const double vol_scale = (family == Family::constant_vol)
                                 ? spec.coefficients.sigma0
                                 : spec.coefficients.m + spec.y0 + spec.coefficients.xi * std::sqrt(spec.T);
    const double span = 5.0 * vol_scale * std::sqrt(spec.T);
    double best = kInfinity;
    for (std::size_t i = 0; i < x_grid_points; ++i) {
        const double x = lo + span * static_cast<double>(i) / static_cast<double>(x_grid_points - 1);
        OptimizerConfig cfg = optcfg;
        if (i > 0) cfg.n_starts = std::max<std::size_t>(2, optcfg.n_starts / 2);
        RateResult rr = itilde(spec, x, rate_grid, cfg);
        if (!rr.infinite) best = std::min(best, rr.value);
        if (i > 0 && !rr.infinite && rr.value > 4.0 * best && rr.value > best + 2.0) break;  // deep in the wing
    }
    rep.variational_value = best;
    rep.extrapolated_slope = extrapolate_slope(rep.points);
    fill_relative_gap(rep);
    return rep;
}

struct MartingaleReport {
    MCEstimate discounted_price;  // mean of exp(-rT) S_T at eps = 1
    bool pass = false;            // |mean - s0| <= 3 stderr
    MCEstimate exp_moment;        // E[exp(alpha * max_t Y_t^2)]
    double alpha = 0.0;
};

/// Martingale diagnostic for the discounted asset price, plus the
/// exponential-moment stability check for the reflected volatility.
inline MartingaleReport martingale_check(const ModelSpec& spec, std::size_t n_replicas,
                                         std::uint64_t seed, TimeGrid grid, unsigned n_workers = 0) {
    require_risk_neutral(spec);
    MartingaleReport rep;
    const double disc = std::exp(-spec.r * spec.T);
    rep.discounted_price = batch_estimate(
        spec, 1.0, n_replicas, seed,
        [disc](const SimulatedTriple& s) { return disc * std::exp(s.X.back()); }, grid, n_workers);
    rep.pass = std::abs(rep.discounted_price.mean - spec.s0) <= 3.0 * rep.discounted_price.stderr_;

    const auto& cs = spec.coefficients;
    const double q = (cs.family == Family::reflected_ou) ? cs.q : 0.0;
    const double xi = (cs.family == Family::constant_vol) ? 1.0 : cs.xi;
    rep.alpha = 1.0 / (16.0 * xi * xi * std::exp(4.0 * q * spec.T) * spec.T);
    const double alpha = rep.alpha;
    const std::size_t n_emoment = std::min<std::size_t>(n_replicas, 20000);
    rep.exp_moment = batch_estimate(
        spec, 1.0, n_emoment, seed + 1,
        [alpha](const SimulatedTriple& s) {
            const double m = sup_norm(s.Y);
            return std::exp(alpha * m * m);
        },
        grid, n_workers);
    return rep;
}

}  // namespace svr
