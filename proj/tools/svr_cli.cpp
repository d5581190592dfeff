// svr: configuration-driven runner for the reflected-volatility toolkit.
//
// Subcommands: simulate, rate, price, ldp-check, selftest.
// Exit codes: 0 success, 2 validation/config error, 3 numerical failure
// (aborted replicas, optimizer non-convergence, infinite rate).
// All diagnostics go to stderr; all data goes to files under --out.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "svr/config.hpp"
#include "svr/control.hpp"
#include "svr/models.hpp"
#include "svr/paths.hpp"
#include "svr/pricing.hpp"
#include "svr/rate.hpp"
#include "svr/simulate.hpp"

namespace {

constexpr const char* kVersion = "svr 0.1.0";
constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunContext {
    svr::RunConfig config;
    std::filesystem::path out_dir;
    std::size_t workers = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> artifacts;
};

std::uint64_t resolve_seed(const svr::RunConfig& cfg, const CLI::Option* seed_opt,
                           std::uint64_t seed_flag) {
    if (seed_opt->count() > 0) return seed_flag;
    return cfg.get_uint("mc.seed", 0);
}

std::ofstream open_artifact(RunContext& ctx, const std::string& name) {
    const std::filesystem::path p = ctx.out_dir / name;
    std::ofstream os(p);
    if (!os) throw svr::ConfigError("cannot open output file '" + p.string() + "'");
    ctx.artifacts.push_back(name);
    return os;
}

void write_manifest(RunContext& ctx, const std::string& subcommand, double walltime_seconds) {
    nlohmann::json j;
    j["subcommand"] = subcommand;
    j["version"] = kVersion;
    j["seed"] = ctx.seed;
    j["workers"] = ctx.workers;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : ctx.config.entries()) cfg[k] = v;
    j["config"] = cfg;
    if (ctx.config.has("model.T")) {
        const svr::TimeGrid g = ctx.config.mc_grid();
        j["grid"] = {{"T", g.horizon()}, {"n_steps", g.n_steps()}};
    }
    j["artifacts"] = ctx.artifacts;
    j["walltime_seconds"] = walltime_seconds;
    std::ofstream os(ctx.out_dir / "manifest.json");
    os << j.dump(2) << "\n";
}

svr::PathStatistic resolve_statistic(const svr::RunConfig& cfg, const svr::ModelSpec& spec) {
    const std::string name = cfg.get_string("mc.statistic", "terminal_logprice");
    if (name == "constant_one") return svr::stat_constant_one();
    if (name == "terminal_logprice") return svr::stat_terminal_logprice();
    if (name == "terminal_indicator")
        return svr::stat_terminal_indicator(spec.x0(), cfg.get_double("mc.threshold"));
    if (name == "sup_volatility") return svr::stat_sup_volatility();
    if (name == "sup_volatility_indicator")
        return svr::stat_sup_volatility_indicator(cfg.get_double("mc.threshold"));
    throw svr::ConfigError("config: unknown mc.statistic '" + name + "'");
}

void write_estimate_row(std::ostream& os, const svr::MCEstimate& est) {
    os << svr::format_double(est.eps) << "," << svr::format_double(est.mean) << ","
       << svr::format_double(est.stderr_) << "," << est.n_replicas << "," << est.aborted << "\n";
}

// --- simulate -------------------------------------------------------------
void run_simulate(RunContext& ctx) {
    const svr::ModelSpec spec = ctx.config.build_model();
    const svr::TimeGrid grid = ctx.config.mc_grid();
    const svr::PathStatistic stat = resolve_statistic(ctx.config, spec);
    const std::size_t replicas = static_cast<std::size_t>(ctx.config.get_uint("mc.replicas"));
    const std::vector<double> ladder = ctx.config.get_list("mc.eps");

    std::ofstream csv = open_artifact(ctx, "simulate.csv");
    csv << "eps,mean,stderr,n,aborted\n";
    std::size_t aborted_total = 0;
    for (double eps : ladder) {
        const svr::MCEstimate est =
            svr::batch_estimate(spec, eps, replicas, ctx.seed, stat, grid, ctx.workers);
        write_estimate_row(csv, est);
        aborted_total += est.aborted;
    }
    csv.close();
    if (aborted_total > 0)
        throw NumericalFailure("simulate: " + std::to_string(aborted_total) + " aborted replicas");
}

// --- rate -----------------------------------------------------------------
void run_rate(RunContext& ctx) {
    const svr::ModelSpec spec = ctx.config.build_model();
    const svr::TimeGrid grid = ctx.config.rate_grid();
    const svr::OptimizerConfig ocfg = ctx.config.optimizer();

    svr::RateResult res(grid);
    std::string target_desc;
    if (ctx.config.has("option.kind")) {
        const svr::OptionSpec opt = ctx.config.option();
        if (!svr::is_binary_barrier(opt.kind))
            throw svr::ConfigError("rate: option.kind must be a binary barrier for path-set rates");
        svr::BarrierKind bk = svr::BarrierKind::up_in;
        if (opt.kind == svr::OptionKind::binary_up_out) bk = svr::BarrierKind::up_out;
        if (opt.kind == svr::OptionKind::binary_down_in) bk = svr::BarrierKind::down_in;
        if (opt.kind == svr::OptionKind::binary_down_out) bk = svr::BarrierKind::down_out;
        res = svr::qtilde_pathset_inf(spec, {bk, opt.K}, grid, ocfg);
        target_desc = "barrier K=" + svr::format_double(opt.K);
    } else {
        const double x = ctx.config.get_double("rate.x");
        res = svr::itilde(spec, x, grid, ocfg);
        target_desc = "terminal x=" + svr::format_double(x);
    }

    std::string minimizer_csv;
    if (res.minimizer_f) {
        minimizer_csv = "minimizer.csv";
        std::ofstream mos = open_artifact(ctx, minimizer_csv);
        const svr::Path f = svr::integrate_control(*res.minimizer_f);
        mos << "t,f" << (res.minimizer_g ? ",g" : "") << "\n";
        for (std::size_t k = 0; k <= grid.n_steps(); ++k) {
            mos << svr::format_double(grid.node(k)) << "," << svr::format_double(f[k]);
            if (res.minimizer_g) mos << "," << svr::format_double((*res.minimizer_g)[k]);
            mos << "\n";
        }
    }

    nlohmann::json j;
    j["target"] = target_desc;
    j["value"] = res.value;
    j["infinite"] = res.infinite;
    j["n_starts"] = res.n_starts;
    j["converged_starts"] = res.converged_starts;
    j["best_gradient_norm"] = res.best_gradient_norm;
    if (res.branch_l1) j["branch_l1"] = *res.branch_l1;
    if (res.branch_l2) j["branch_l2"] = *res.branch_l2;
    j["minimizer_csv"] = minimizer_csv;
    std::ofstream os = open_artifact(ctx, "rate.json");
    os << j.dump(2) << "\n";
    os.close();

    if (res.infinite) throw NumericalFailure("rate: infimum is infinite for this target");
    if (res.converged_starts == 0) throw NumericalFailure("rate: no optimizer start converged");
}

// --- price ----------------------------------------------------------------
void run_price(RunContext& ctx) {
    const svr::ModelSpec spec = ctx.config.build_model();
    const svr::TimeGrid grid = ctx.config.mc_grid();
    const svr::OptionSpec opt = ctx.config.option();
    const std::size_t replicas = static_cast<std::size_t>(ctx.config.get_uint("mc.replicas"));
    const std::vector<double> ladder = ctx.config.get_list("mc.eps");

    std::ofstream csv = open_artifact(ctx, "price.csv");
    csv << "eps,mean,stderr,n,aborted\n";
    std::size_t aborted_total = 0;
    for (double eps : ladder) {
        const svr::MCEstimate est =
            svr::mc_option_price(spec, opt, eps, replicas, ctx.seed, grid, ctx.workers);
        write_estimate_row(csv, est);
        aborted_total += est.aborted;
    }
    csv.close();
    if (aborted_total > 0)
        throw NumericalFailure("price: " + std::to_string(aborted_total) + " aborted replicas");
}

// --- ldp-check --------------------------------------------------------------
void run_ldp_check(RunContext& ctx) {
    const svr::ModelSpec spec = ctx.config.build_model();
    const svr::TimeGrid mc_grid = ctx.config.mc_grid();
    const svr::TimeGrid rate_grid = ctx.config.rate_grid();
    const svr::OptimizerConfig ocfg = ctx.config.optimizer();
    const svr::OptionSpec opt = ctx.config.option();
    const std::size_t replicas = static_cast<std::size_t>(ctx.config.get_uint("mc.replicas"));
    const std::vector<double> ladder = ctx.config.get_list("mc.eps");

    svr::LdpReport rep;
    if (opt.kind == svr::OptionKind::vanilla_call) {
        const std::size_t xg = static_cast<std::size_t>(ctx.config.get_uint("rate.x_grid_points", 64));
        rep = svr::call_ldp_report(spec, opt.K, ladder, replicas, ctx.seed, ocfg, mc_grid,
                                   rate_grid, xg, ctx.workers);
    } else if (svr::is_binary_barrier(opt.kind)) {
        rep = svr::barrier_ldp_report(spec, opt, ladder, replicas, ctx.seed, ocfg, mc_grid,
                                      rate_grid, ctx.workers);
    } else {
        throw svr::ConfigError("ldp-check: option.kind must be a binary barrier or vanilla_call");
    }

    nlohmann::json j;
    j["option"] = {{"kind", svr::option_kind_name(opt.kind)}, {"K", opt.K}, {"G", opt.G_cash}};
    j["eps_ladder"] = ladder;
    nlohmann::json pts = nlohmann::json::array();
    nlohmann::json censored = nlohmann::json::array();
    for (const svr::LdpPoint& p : rep.points) {
        if (p.censored) {
            censored.push_back(p.eps);
            continue;
        }
        pts.push_back({{"eps", p.eps},
                       {"p_hat", p.p_hat},
                       {"stderr", p.stderr_},
                       {"eps_log_p", p.eps_log_p}});
    }
    j["mc_points"] = pts;
    j["slope"] = rep.extrapolated_slope;
    j["variational_value"] = rep.variational_value;
    j["relative_gap"] = rep.relative_gap;
    j["censored"] = censored;
    std::ofstream os = open_artifact(ctx, "ldp_check.json");
    os << j.dump(2) << "\n";
    os.close();

    // Plot data: eps*log of the one-stderr band around p_hat, plus the
    // variational prediction -I as the constant reference line.
    std::ofstream csv = open_artifact(ctx, "ldp_plot.csv");
    csv << "eps,eps_log_p,band_lo,band_hi,variational_value\n";
    for (const svr::LdpPoint& p : rep.points) {
        if (p.censored) continue;
        const double lo = std::max(p.p_hat - p.stderr_, 1e-300);
        const double hi = p.p_hat + p.stderr_;
        csv << svr::format_double(p.eps) << "," << svr::format_double(p.eps_log_p) << ","
            << svr::format_double(p.eps * std::log(lo)) << ","
            << svr::format_double(p.eps * std::log(hi)) << ","
            << svr::format_double(-rep.variational_value) << "\n";
    }
    csv.close();

    if (!std::isfinite(rep.variational_value))
        throw NumericalFailure("ldp-check: variational value is not finite");
    if (rep.censored_count + 2 > rep.points.size())
        throw NumericalFailure("ldp-check: too many censored ladder points for a slope fit");
}

// --- selftest ---------------------------------------------------------------
void run_selftest(RunContext& ctx) {
    // Exact reflection and round-trip properties on deterministic inputs.
    const svr::TimeGrid g(1.0, 64);
    const svr::CoefficientSet cs = svr::make_reflected_ou(1.0, 0.5, 0.4, 0.0);
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 50; ++i) {
        std::vector<double> vals(g.n_steps() + 1, 0.0);
        std::vector<double> fdot(g.n_steps());
        for (std::size_t k = 0; k < g.n_steps(); ++k) {
            vals[k + 1] = vals[k] + std::sqrt(g.dt()) * svr::counter_gaussian(99, i, k, 5);
            fdot[k] = svr::counter_gaussian(99, i, k, 6);
        }
        const svr::Path p(g, std::move(vals));
        const svr::Path q = svr::skorokhod_map(p);
        const svr::Path qq = svr::skorokhod_map(q);
        for (std::size_t k = 0; k <= g.n_steps(); ++k) {
            worst = std::max(worst, -q[k]);
            worst = std::max(worst, std::abs(qq[k] - q[k]));
        }
        const svr::Control ctl(g, std::move(fdot));
        const svr::ControlledSolution sol = svr::solve_controlled(cs, 0.3, ctl);
        const svr::Control back = svr::m_operator(cs, 0.3, sol.phi);
        for (std::size_t k = 0; k < g.n_steps(); ++k)
            worst = std::max(worst, std::abs(back.derivative[k] - ctl.derivative[k]));
    }
    if (worst > 1e-10) throw NumericalFailure("selftest: exact-property residual " +
                                              svr::format_double(worst));
    std::ofstream os = open_artifact(ctx, "selftest.json");
    nlohmann::json j;
    j["worst_residual"] = worst;
    j["ok"] = true;
    os << j.dump(2) << "\n";
    std::cerr << "selftest: ok (worst residual " << svr::format_double(worst) << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reflected-volatility small-noise toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::size_t workers = 0;
    std::uint64_t seed_flag = 0;
    CLI::Option* seed_opt = nullptr;

    std::vector<std::pair<std::string, void (*)(RunContext&)>> handlers = {
        {"simulate", run_simulate}, {"rate", run_rate},         {"price", run_price},
        {"ldp-check", run_ldp_check}, {"selftest", run_selftest},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, fn] : handlers) {
        CLI::App* sub = app.add_subcommand(name);
        if (name != "selftest")
            sub->add_option("--config", config_path, "run configuration file")->required();
        else
            sub->add_option("--config", config_path, "run configuration file");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--workers", workers, "worker threads (0 = hardware)");
        CLI::Option* so = sub->add_option("--seed", seed_flag, "override mc.seed");
        if (!seed_opt) seed_opt = so;
        subs.push_back(sub);
        (void)fn;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    const auto start = std::chrono::steady_clock::now();
    RunContext ctx;
    std::string subcommand;
    try {
        for (std::size_t i = 0; i < handlers.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            subcommand = handlers[i].first;
            // the parsed subcommand's --seed instance is the one to consult
            seed_opt = subs[i]->get_option("--seed");
            ctx.config = config_path.empty() ? svr::RunConfig()
                                             : svr::RunConfig::parse_file(config_path);
            ctx.out_dir = out_dir;
            std::filesystem::create_directories(ctx.out_dir);
            ctx.workers = workers;
            ctx.seed = resolve_seed(ctx.config, seed_opt, seed_flag);
            handlers[i].second(ctx);
        }
    } catch (const NumericalFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        write_manifest(ctx, subcommand,
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        return kExitNumerical;
    } catch (const svr::DegenerateDenominator& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const svr::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    write_manifest(ctx, subcommand,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    return kExitOk;
}
