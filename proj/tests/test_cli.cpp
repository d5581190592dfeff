// End-to-end tests of the command-line runner: exit codes, artifact files,
// oracle values, and byte-identical determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#ifndef SVR_CLI_PATH
#error "SVR_CLI_PATH must be defined"
#endif

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SVR_CLI_PATH) + " " + args + " 2> /dev/null";
    const int status = std::system(cmd.c_str());
#ifdef _WIN32
    return status;
#else
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#endif
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("svr_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    os << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    REQUIRE(static_cast<bool>(is));
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

const char* kRateOracleConfig =
    "model.family = constant_vol\n"
    "model.sigma0 = 0.3\n"
    "model.rho = 0.5\n"
    "model.T = 1\n"
    "rate.x = 0.09\n"
    "rate.n_steps = 100\n";

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("selftest exits zero and writes its artifact") {
        const fs::path dir = fresh_dir("selftest");
        CHECK(run_cli("selftest --out " + dir.string()) == 0);
        const auto j = nlohmann::json::parse(slurp(dir / "selftest.json"));
        CHECK(j.at("ok").get<bool>());
        const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
        CHECK(m.at("subcommand").get<std::string>() == "selftest");
        CHECK(m.at("version").get<std::string>() == "svr 0.1.0");
    }

    TEST_CASE("rate subcommand reproduces the constant-vol oracle") {
        const fs::path dir = fresh_dir("rate");
        write_file(dir / "run.cfg", kRateOracleConfig);
        CHECK(run_cli("rate --config " + (dir / "run.cfg").string() + " --out " + dir.string()) == 0);
        const auto j = nlohmann::json::parse(slurp(dir / "rate.json"));
        CHECK(std::abs(j.at("value").get<double>() - 0.045) < 1e-6);
        CHECK(j.at("converged_starts").get<std::size_t>() > 0);
        CHECK_FALSE(j.at("infinite").get<bool>());
        const std::string mcsv = slurp(dir / j.at("minimizer_csv").get<std::string>());
        CHECK(mcsv.rfind("t,f", 0) == 0);
    }

    TEST_CASE("simulate writes the ladder CSV and is byte-identical across runs") {
        const std::string cfg =
            "model.family = reflected_ou\n"
            "model.q = 1\nmodel.m = 0.5\nmodel.xi = 0.4\n"
            "model.y0 = 0.3\nmodel.T = 1\n"
            "grid.n_steps = 50\n"
            "mc.eps = 0.5, 0.25\n"
            "mc.replicas = 2000\n"
            "mc.seed = 77\n"
            "mc.statistic = terminal_logprice\n";
        const fs::path d1 = fresh_dir("sim1"), d2 = fresh_dir("sim2");
        write_file(d1 / "run.cfg", cfg);
        CHECK(run_cli("simulate --config " + (d1 / "run.cfg").string() + " --out " + d1.string() +
                      " --workers 1") == 0);
        CHECK(run_cli("simulate --config " + (d1 / "run.cfg").string() + " --out " + d2.string() +
                      " --workers 4") == 0);
        const std::string c1 = slurp(d1 / "simulate.csv");
        CHECK(c1.rfind("eps,mean,stderr,n,aborted\n", 0) == 0);
        CHECK(c1 == slurp(d2 / "simulate.csv"));
    }

    TEST_CASE("seed override changes the data; config errors exit 2") {
        const fs::path dir = fresh_dir("seed");
        write_file(dir / "run.cfg",
                   "model.family = constant_vol\nmodel.sigma0 = 0.3\nmodel.T = 1\n"
                   "grid.n_steps = 20\nmc.eps = 1\nmc.replicas = 500\nmc.seed = 1\n");
        CHECK(run_cli("simulate --config " + (dir / "run.cfg").string() + " --out " +
                      dir.string() + " --workers 1") == 0);
        const std::string base = slurp(dir / "simulate.csv");
        CHECK(run_cli("simulate --config " + (dir / "run.cfg").string() + " --out " +
                      dir.string() + " --workers 1 --seed 2") == 0);
        CHECK(base != slurp(dir / "simulate.csv"));

        write_file(dir / "bad.cfg", "model.bogus = 1\n");
        CHECK(run_cli("simulate --config " + (dir / "bad.cfg").string() + " --out " +
                      dir.string()) == 2);
        CHECK(run_cli("rate --out " + dir.string()) == 2);  // missing --config
    }

    TEST_CASE("aborted replicas exit 3") {
        const fs::path dir = fresh_dir("abort");
        write_file(dir / "run.cfg",
                   "model.family = exponential_vol\nmodel.k = -700\nmodel.mu = 0\n"
                   "model.vol_dynamics = reflected_bm_drift\nmodel.a = 0\nmodel.xi = 1\n"
                   "model.T = 1\ngrid.n_steps = 20\nmc.eps = 1\nmc.replicas = 16\nmc.seed = 3\n");
        CHECK(run_cli("simulate --config " + (dir / "run.cfg").string() + " --out " +
                      dir.string() + " --workers 1") == 3);
    }

    TEST_CASE("ldp-check emits the report JSON and plot CSV") {
        const fs::path dir = fresh_dir("ldp");
        write_file(dir / "run.cfg",
                   "model.family = constant_vol\nmodel.sigma0 = 1\nmodel.T = 1\n"
                   "grid.n_steps = 50\n"
                   "option.kind = binary_up_in\noption.K = 2.7182818284590452\noption.G = 1\n"
                   "mc.eps = 0.6, 0.5, 0.4\nmc.replicas = 20000\nmc.seed = 5\n"
                   "rate.n_steps = 50\nrate.n_starts = 4\n");
        CHECK(run_cli("ldp-check --config " + (dir / "run.cfg").string() + " --out " +
                      dir.string() + " --workers 1") == 0);
        const auto j = nlohmann::json::parse(slurp(dir / "ldp_check.json"));
        CHECK(j.at("option").at("kind").get<std::string>() == "binary_up_in");
        CHECK(j.at("eps_ladder").size() == 3);
        CHECK(j.at("mc_points").size() + j.at("censored").size() == 3);
        CHECK(j.at("variational_value").get<double>() == doctest::Approx(0.5).epsilon(0.01));
        CHECK(std::isfinite(j.at("slope").get<double>()));
        CHECK(j.at("relative_gap").get<double>() >= 0.0);
        const std::string plot = slurp(dir / "ldp_plot.csv");
        CHECK(plot.rfind("eps,eps_log_p,band_lo,band_hi,variational_value\n", 0) == 0);
        for (const auto& pt : j.at("mc_points"))
            CHECK(pt.at("eps_log_p").get<double>() ==
                  doctest::Approx(pt.at("eps").get<double>() *
                                  std::log(pt.at("p_hat").get<double>())));
    }

    TEST_CASE("price subcommand writes the ladder CSV") {
        const fs::path dir = fresh_dir("price");
        write_file(dir / "run.cfg",
                   "model.family = constant_vol\nmodel.sigma0 = 0.3\nmodel.r = 0.02\n"
                   "model.T = 1\ngrid.n_steps = 20\n"
                   "option.kind = vanilla_call\noption.K = 1\n"
                   "mc.eps = 1\nmc.replicas = 5000\nmc.seed = 9\n");
        CHECK(run_cli("price --config " + (dir / "run.cfg").string() + " --out " + dir.string() +
                      " --workers 1") == 0);
        const std::string csv = slurp(dir / "price.csv");
        CHECK(csv.rfind("eps,mean,stderr,n,aborted\n", 0) == 0);
        CHECK(csv.find(",0\n") != std::string::npos);  // no aborted replicas
    }
}
