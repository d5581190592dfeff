#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "svr/models.hpp"
#include "svr/optimize.hpp"
#include "svr/paths.hpp"
#include "svr/pricing.hpp"

namespace svr {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Structured key-value run configuration ("section.key = value" lines,
/// '#' comments). Unknown keys are rejected with the offending key named;
/// every field is validated before any computation starts.
class RunConfig {
public:
    static const std::set<std::string>& known_keys() {
        static const std::set<std::string> keys = {
            "model.family", "model.q", "model.m", "model.xi", "model.mu", "model.a",
            "model.sigma0", "model.k", "model.y0", "model.s0", "model.rho", "model.r",
            "model.T", "model.vol_dynamics",
            "grid.T", "grid.n_steps",
            "mc.eps", "mc.replicas", "mc.seed", "mc.statistic", "mc.threshold",
            "rate.x", "rate.n_steps", "rate.n_starts", "rate.max_iterations",
            "rate.gradient_tolerance", "rate.finite_difference_step", "rate.start_scale",
            "rate.penalty_schedule", "rate.x_grid_points",
            "option.kind", "option.K", "option.G",
            "output.directory", "output.formats",
        };
        return keys;
    }

    static RunConfig parse_string(const std::string& text) {
        RunConfig cfg;
        std::istringstream is(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (!known_keys().count(key))
                throw ConfigError("config: unknown key '" + key + "'");
            if (cfg.kv_.count(key))
                throw ConfigError("config: duplicate key '" + key + "'");
            cfg.kv_[key] = value;
        }
        return cfg;
    }

    static RunConfig parse_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("config: cannot open '" + path + "'");
        std::ostringstream buf;
        buf << is.rdbuf();
        return parse_string(buf.str());
    }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    const std::string& get_string(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError("config: missing required key '" + key + "'");
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = kv_.find(key);
        return it == kv_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    std::uint64_t get_uint(const std::string& key) const {
        const std::string& s = get_string(key);
        try {
            if (s.find('-') != std::string::npos) throw std::invalid_argument(s);
            std::size_t pos = 0;
            const unsigned long long v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' is not a nonnegative integer: '" + s + "'");
        }
    }
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? get_uint(key) : fallback;
    }

    std::vector<double> get_list(const std::string& key) const {
        std::vector<double> out;
        std::istringstream is(get_string(key));
        std::string tok;
        while (std::getline(is, tok, ',')) out.push_back(to_double(key, trim(tok)));
        if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
        return out;
    }

    CoefficientSet build_coefficients() const {
        const std::string family = get_string("model.family");
        if (family == "reflected_ou")
            return make_reflected_ou(get_double("model.q"), get_double("model.m"),
                                     get_double("model.xi"), get_double("model.mu", 0.0));
        if (family == "reflected_bm_drift")
            return make_reflected_bm_drift(get_double("model.a"), get_double("model.xi"),
                                           get_double("model.mu", 0.0));
        if (family == "constant_vol")
            return make_constant_vol(get_double("model.sigma0"), get_double("model.r", 0.0));
        if (family == "exponential_vol") {
            const std::string dyn = get_string("model.vol_dynamics");
            CoefficientSet inner;
            if (dyn == "reflected_ou")
                inner = make_reflected_ou(get_double("model.q"), get_double("model.m"),
                                          get_double("model.xi"), 0.0);
            else if (dyn == "reflected_bm_drift")
                inner = make_reflected_bm_drift(get_double("model.a"), get_double("model.xi"), 0.0);
            else
                throw ConfigError("config: model.vol_dynamics must be reflected_ou or reflected_bm_drift");
            return make_exponential_vol(get_double("model.k"), get_double("model.mu", 0.0), inner);
        }
        throw ConfigError("config: unknown model.family '" + family + "'");
    }

    ModelSpec build_model() const {
        try {
            return ModelSpec(build_coefficients(), get_double("model.y0", 0.0),
                             get_double("model.s0", 1.0), get_double("model.rho", 0.0),
                             get_double("model.r", 0.0), get_double("model.T"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }

    TimeGrid mc_grid() const {
        const double T = get_double("model.T");
        if (has("grid.T") && get_double("grid.T") != T)
            throw ConfigError("config: grid.T must equal model.T");
        const auto n = get_uint("grid.n_steps", 200);
        if (n < 1) throw ConfigError("config: grid.n_steps must be >= 1");
        return TimeGrid(T, static_cast<std::size_t>(n));
    }

    TimeGrid rate_grid() const {
        const auto n = get_uint("rate.n_steps", 100);
        if (n < 1) throw ConfigError("config: rate.n_steps must be >= 1");
        return TimeGrid(get_double("model.T"), static_cast<std::size_t>(n));
    }

    OptimizerConfig optimizer() const {
        OptimizerConfig cfg;
        cfg.n_starts = static_cast<std::size_t>(get_uint("rate.n_starts", cfg.n_starts));
        cfg.max_iterations = static_cast<std::size_t>(get_uint("rate.max_iterations", cfg.max_iterations));
        cfg.gradient_tolerance = get_double("rate.gradient_tolerance", cfg.gradient_tolerance);
        cfg.finite_difference_step = get_double("rate.finite_difference_step", cfg.finite_difference_step);
        cfg.start_scale = get_double("rate.start_scale", cfg.start_scale);
        if (has("rate.penalty_schedule")) cfg.constraint_penalty_schedule = get_list("rate.penalty_schedule");
        if (cfg.n_starts < 1 || cfg.max_iterations < 1 || !(cfg.gradient_tolerance > 0.0) ||
            !(cfg.finite_difference_step > 0.0) || !(cfg.start_scale > 0.0))
            throw ConfigError("config: optimizer fields must be positive");
        for (std::size_t i = 1; i < cfg.constraint_penalty_schedule.size(); ++i)
            if (!(cfg.constraint_penalty_schedule[i] > cfg.constraint_penalty_schedule[i - 1]))
                throw ConfigError("config: rate.penalty_schedule must be strictly increasing");
        return cfg;
    }

    OptionSpec option() const {
        const std::string kind = get_string("option.kind");
        OptionSpec opt{OptionKind::vanilla_call, get_double("option.K"), get_double("option.G", 1.0)};
        if (kind == "binary_up_in") opt.kind = OptionKind::binary_up_in;
        else if (kind == "binary_up_out") opt.kind = OptionKind::binary_up_out;
        else if (kind == "binary_down_in") opt.kind = OptionKind::binary_down_in;
        else if (kind == "binary_down_out") opt.kind = OptionKind::binary_down_out;
        else if (kind == "digital_call") opt.kind = OptionKind::digital_call;
        else if (kind == "vanilla_call") opt.kind = OptionKind::vanilla_call;
        else throw ConfigError("config: unknown option.kind '" + kind + "'");
        return opt;
    }

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static double to_double(const std::string& key, const std::string& s) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' is not a number: '" + s + "'");
        }
    }

    std::map<std::string, std::string> kv_;
};

}  // namespace svr
