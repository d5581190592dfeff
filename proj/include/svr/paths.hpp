#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace svr {

/// Uniform grid on [0, T] with n_steps subintervals (n_steps + 1 nodes).
/// Nodes are computed as k*T/n_steps so that node(n_steps) == T exactly.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n_steps)
        : horizon_(horizon), n_steps_(n_steps) {
        if (!(horizon > 0.0)) throw std::invalid_argument("TimeGrid: horizon must be positive");
        if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
    }

    double horizon() const { return horizon_; }
    std::size_t n_steps() const { return n_steps_; }
    double dt() const { return horizon_ / static_cast<double>(n_steps_); }
    double node(std::size_t k) const { return static_cast<double>(k) * horizon_ / static_cast<double>(n_steps_); }

    bool operator==(const TimeGrid& other) const {
        return horizon_ == other.horizon_ && n_steps_ == other.n_steps_;
    }
    bool operator!=(const TimeGrid& other) const { return !(*this == other); }

private:
    double horizon_;
    std::size_t n_steps_;
};

/// Continuous path sampled on a uniform grid; values between nodes are
/// understood as linear interpolation.
struct Path {
    TimeGrid grid;
    std::vector<double> values;

    Path(TimeGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.n_steps() + 1)
            throw std::invalid_argument("Path: values must have n_steps + 1 entries");
        for (double x : values)
            if (!std::isfinite(x)) throw std::invalid_argument("Path: non-finite value");
    }

    static Path zero(TimeGrid g) { return Path(g, std::vector<double>(g.n_steps() + 1, 0.0)); }
    static Path constant(TimeGrid g, double level) {
        return Path(g, std::vector<double>(g.n_steps() + 1, level));
    }

    double operator[](std::size_t k) const { return values[k]; }
    double front() const { return values.front(); }
    double back() const { return values.back(); }
    std::size_t n_nodes() const { return values.size(); }

    /// Linear interpolation at an arbitrary time in [0, T].
    double at(double t) const {
        const double dt = grid.dt();
        if (t <= 0.0) return values.front();
        if (t >= grid.horizon()) return values.back();
        const double u = t / dt;
        const auto k = static_cast<std::size_t>(u);
        const double w = u - static_cast<double>(k);
        return values[k] * (1.0 - w) + values[k + 1] * w;
    }
};

/// Element of the Cameron-Martin space represented by piecewise-constant
/// derivative samples; the path itself is piecewise linear with f(0) = 0.
struct Control {
    TimeGrid grid;
    std::vector<double> derivative;

    Control(TimeGrid g, std::vector<double> d) : grid(g), derivative(std::move(d)) {
        if (derivative.size() != grid.n_steps())
            throw std::invalid_argument("Control: derivative must have n_steps entries");
        for (double x : derivative)
            if (!std::isfinite(x)) throw std::invalid_argument("Control: non-finite derivative");
    }

    static Control zero(TimeGrid g) { return Control(g, std::vector<double>(g.n_steps(), 0.0)); }
};

/// Discrete Skorokhod map: out(k) = in(k) - min_{j<=k}(min(in(j), 0)).
/// Single pass carrying the running minimum.
inline Path skorokhod_map(const Path& input) {
    std::vector<double> out(input.values.size());
    double run_min = 0.0;
    for (std::size_t k = 0; k < input.values.size(); ++k) {
        run_min = std::min(run_min, std::min(input.values[k], 0.0));
        out[k] = input.values[k] - run_min;
    }
    return Path(input.grid, std::move(out));
}

inline double sup_norm(const Path& p) {
    double m = 0.0;
    for (double v : p.values) m = std::max(m, std::abs(v));
    return m;
}

/// Max of |p(t) - p(s)| over |t - s| <= delta. For piecewise-linear paths the
/// extremal pairs are attained on node pairs or on windows [t_k, t_k + delta];
/// both families are scanned.
inline double modulus_of_continuity(const Path& p, double delta) {
    if (!(delta > 0.0) || delta > p.grid.horizon())
        throw std::invalid_argument("modulus_of_continuity: require 0 < delta <= T");
    const double dt = p.grid.dt();
    const std::size_t n = p.grid.n_steps();
    double mod = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double ti = p.grid.node(i);
        for (std::size_t j = i + 1; j <= n; ++j) {
            if (p.grid.node(j) - ti > delta + 1e-15 * p.grid.horizon()) break;
            mod = std::max(mod, std::abs(p.values[j] - p.values[i]));
        }
        // off-node window endpoints t_i + delta and t_i - delta
        if (ti + delta <= p.grid.horizon())
            mod = std::max(mod, std::abs(p.at(ti + delta) - p.values[i]));
        if (ti - delta >= 0.0)
            mod = std::max(mod, std::abs(p.values[i] - p.at(ti - delta)));
    }
    (void)dt;
    return mod;
}

/// Energy (1/2) * integral of fdot^2, left-endpoint rule (exact here since
/// fdot is piecewise constant).
inline double control_energy(const Control& f) {
    double s = 0.0;
    for (double d : f.derivative) s += d * d;
    return 0.5 * f.grid.dt() * s;
}

/// Antiderivative of the piecewise-constant derivative: f(node k) = dt * sum_{j<k} fdot(j).
inline Path integrate_control(const Control& f) {
    std::vector<double> v(f.grid.n_steps() + 1);
    v[0] = 0.0;
    const double dt = f.grid.dt();
    for (std::size_t k = 0; k < f.grid.n_steps(); ++k) v[k + 1] = v[k] + dt * f.derivative[k];
    return Path(f.grid, std::move(v));
}

/// Shortest round-trip decimal formatting for doubles.
inline std::string format_double(double x) {
    for (int prec = 1; prec <= 17; ++prec) {
        std::ostringstream os;
        os.precision(prec);
        os << x;
        if (std::stod(os.str()) == x) return os.str();
    }
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

inline void write_path_csv(const Path& p, std::ostream& os) {
    os << "t,value\n";
    for (std::size_t k = 0; k < p.n_nodes(); ++k)
        os << format_double(p.grid.node(k)) << ',' << format_double(p.values[k]) << '\n';
}

inline void write_path_csv(const Path& p, const std::string& filename) {
    std::ofstream os(filename);
    if (!os) throw std::runtime_error("cannot open " + filename);
    write_path_csv(p, os);
}

}  // namespace svr
