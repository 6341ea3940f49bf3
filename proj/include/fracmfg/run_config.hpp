#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracmfg/grids.hpp"
#include "fracmfg/mfg.hpp"

namespace fracmfg {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` run configuration with # comments. Every numeric
/// range is validated at parse time; messages carry file:line context.
struct RunConfig {
    double beta = 0.5;
    double T = 1.0;
    int nt = 64;
    int nx = 64;
    int dim = 1;

    std::string coupling = "zero"; // zero | linear | power
    double coupling_p = 1.0;
    double coupling_a0 = 1.0;
    double coupling_a1 = 0.0;

    std::string m0 = "uniform"; // uniform | cosine | gaussian
    double m0_amplitude = 0.5;
    double m0_width = 0.1;

    std::string uT = "constant"; // constant | cosine
    double uT_value = 0.0;
    double uT_amplitude = 0.0;

    std::string drift = "zero"; // zero | sin | cos (v = A sin/cos(2 pi x))
    double drift_amplitude = 0.0;

    long particles = 10000;
    uint64_t seed = 12345;
    double internal_step = 0.0; // 0 -> subordinator default 0.1 dt^{1/beta}
    int mc_nt = 16;             // external snapshot nodes for simulate-ctrw

    double damping = 0.5;
    double picard_tol = 1e-6;
    int picard_max_iter = 120;
    double duality_ratio_max = 0.05;
    int n_perturbations = 20;

    int threads = 1;
    std::string out_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct RawEntry {
    std::string value;
    int line;
};

} // namespace detail

inline RunConfig parse_run_config(std::istream& in, const std::string& origin = "<config>") {
    std::map<std::string, detail::RawEntry> raw;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected `key = value`, got `" + line + "`");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key or value");
        if (raw.count(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key `" + key +
                              "` (first at line " + std::to_string(raw[key].line) + ")");
        raw[key] = {value, lineno};
    }

    RunConfig cfg;
    auto where = [&](const std::string& key) {
        return origin + ":" + std::to_string(raw[key].line) + ": " + key;
    };
    auto take_string = [&](const std::string& key, std::string& dst,
                           const std::vector<std::string>& allowed) {
        auto it = raw.find(key);
        if (it == raw.end()) return;
        for (const auto& a : allowed)
            if (it->second.value == a) {
                dst = it->second.value;
                raw.erase(it);
                return;
            }
        std::string opts;
        for (const auto& a : allowed) opts += (opts.empty() ? "" : " | ") + a;
        throw ConfigError(where(key) + " = `" + it->second.value + "` is not one of: " + opts);
    };
    auto take_double = [&](const std::string& key, double& dst, double lo, double hi,
                           bool lo_strict = false, bool hi_strict = false) {
        auto it = raw.find(key);
        if (it == raw.end()) return;
        double v;
        try {
            size_t pos = 0;
            v = std::stod(it->second.value, &pos);
            if (pos != it->second.value.size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw ConfigError(where(key) + " = `" + it->second.value + "` is not a number");
        }
        const bool ok = (lo_strict ? v > lo : v >= lo) && (hi_strict ? v < hi : v <= hi);
        if (!ok || !std::isfinite(v))
            throw ConfigError(where(key) + " = " + it->second.value + " out of range " +
                              (lo_strict ? "(" : "[") + std::to_string(lo) + ", " +
                              std::to_string(hi) + (hi_strict ? ")" : "]"));
        dst = v;
        raw.erase(it);
    };
    auto take_long = [&](const std::string& key, auto& dst, long lo, long hi) {
        auto it = raw.find(key);
        if (it == raw.end()) return;
        long v;
        try {
            size_t pos = 0;
            v = std::stol(it->second.value, &pos);
            if (pos != it->second.value.size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw ConfigError(where(key) + " = `" + it->second.value + "` is not an integer");
        }
        if (v < lo || v > hi)
            throw ConfigError(where(key) + " = " + it->second.value + " out of range [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
        dst = static_cast<std::decay_t<decltype(dst)>>(v);
        raw.erase(it);
    };
    auto take_seed = [&](const std::string& key, uint64_t& dst) {
        auto it = raw.find(key);
        if (it == raw.end()) return;
        try {
            size_t pos = 0;
            dst = std::stoull(it->second.value, &pos);
            if (pos != it->second.value.size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw ConfigError(where(key) + " = `" + it->second.value +
                              "` is not an unsigned integer");
        }
        raw.erase(it);
    };
    auto take_path = [&](const std::string& key, std::string& dst) {
        auto it = raw.find(key);
        if (it == raw.end()) return;
        dst = it->second.value;
        raw.erase(it);
    };

    take_double("beta", cfg.beta, 0.0, 1.0, /*lo_strict=*/true);
    take_double("T", cfg.T, 0.0, 1e6, /*lo_strict=*/true);
    take_long("nt", cfg.nt, 2, 1 << 20);
    take_long("nx", cfg.nx, 8, 1 << 16);
    take_long("dim", cfg.dim, 1, 2);
    take_string("coupling", cfg.coupling, {"zero", "linear", "power"});
    take_double("coupling_p", cfg.coupling_p, 1.0, 16.0);
    take_double("coupling_a0", cfg.coupling_a0, 0.0, 1e6, /*lo_strict=*/true);
    take_double("coupling_a1", cfg.coupling_a1, -1e6, 1e6);
    take_string("m0", cfg.m0, {"uniform", "cosine", "gaussian"});
    take_double("m0_amplitude", cfg.m0_amplitude, 0.0, 1.0, false, /*hi_strict=*/true);
    take_double("m0_width", cfg.m0_width, 1e-3, 10.0);
    take_string("uT", cfg.uT, {"constant", "cosine"});
    take_double("uT_value", cfg.uT_value, -1e9, 1e9);
    take_double("uT_amplitude", cfg.uT_amplitude, -1e9, 1e9);
    take_string("drift", cfg.drift, {"zero", "sin", "cos"});
    take_double("drift_amplitude", cfg.drift_amplitude, -1e6, 1e6);
    take_long("particles", cfg.particles, 1, 100000000L);
    take_seed("seed", cfg.seed);
    take_double("internal_step", cfg.internal_step, 0.0, 1.0);
    take_long("mc_nt", cfg.mc_nt, 2, 1 << 20);
    take_double("damping", cfg.damping, 0.0, 1.0, /*lo_strict=*/true);
    take_double("picard_tol", cfg.picard_tol, 0.0, 1.0, /*lo_strict=*/true);
    take_long("picard_max_iter", cfg.picard_max_iter, 1, 100000);
    take_double("duality_ratio_max", cfg.duality_ratio_max, 0.0, 10.0, /*lo_strict=*/true);
    take_long("n_perturbations", cfg.n_perturbations, 1, 10000);
    take_long("threads", cfg.threads, 1, 256);
    take_path("out_dir", cfg.out_dir);

    if (!raw.empty()) {
        const auto& first = *raw.begin();
        throw ConfigError(origin + ":" + std::to_string(first.second.line) + ": unknown key `" +
                          first.first + "`");
    }
    if (cfg.coupling == "power" && !(cfg.coupling_a0 - std::abs(cfg.coupling_a1) > 0.0))
        throw ConfigError(origin + ": coupling_a0 - |coupling_a1| must stay positive");
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file `" + path + "`");
    return parse_run_config(in, path);
}

// --- analytic data families ------------------------------------------------

inline std::vector<double> build_m0(const RunConfig& cfg, const SpaceGrid& sg) {
    std::vector<double> m(sg.cells(), 1.0);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (cfg.m0 == "cosine") {
        for (int j = 0; j < sg.cells(); ++j)
            m[j] = 1.0 + cfg.m0_amplitude * std::cos(two_pi * sg.center(j % sg.cells_per_axis));
    } else if (cfg.m0 == "gaussian") {
        const double s2 = 2.0 * cfg.m0_width * cfg.m0_width;
        for (int j = 0; j < sg.cells(); ++j) {
            const double x = sg.center(j % sg.cells_per_axis);
            double v = 0.0;
            for (int k = -5; k <= 5; ++k) v += std::exp(-(x - 0.5 + k) * (x - 0.5 + k) / s2);
            m[j] = v;
        }
    }
    double mass = 0.0;
    for (double v : m) mass += v;
    mass *= sg.cell_volume();
    for (auto& v : m) v /= mass;
    return m;
}

inline std::vector<double> build_uT(const RunConfig& cfg, const SpaceGrid& sg) {
    std::vector<double> u(sg.cells(), cfg.uT_value);
    if (cfg.uT == "cosine") {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        for (int j = 0; j < sg.cells(); ++j)
            u[j] = cfg.uT_amplitude * std::cos(two_pi * sg.center(j % sg.cells_per_axis));
    }
    return u;
}

/// Edge drift field for the named analytic family.
inline Field build_drift_edges(const RunConfig& cfg, const TimeGrid& tg, const SpaceGrid& sg) {
    Field v(tg.nodes(), sg.cells());
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (int n = 0; n < tg.nodes(); ++n) {
        for (int j = 0; j < sg.cells(); ++j) {
            const double x = sg.edge(j);
            double val = 0.0;
            if (cfg.drift == "sin") val = cfg.drift_amplitude * std::sin(two_pi * x);
            else if (cfg.drift == "cos") val = cfg.drift_amplitude * std::cos(two_pi * x);
            v.at(n, j) = val;
        }
    }
    return v;
}

inline CouplingSpec build_coupling(const RunConfig& cfg) {
    if (cfg.coupling == "linear") return CouplingSpec::linear();
    if (cfg.coupling == "power")
        return CouplingSpec::power(cfg.coupling_p, cfg.coupling_a0, cfg.coupling_a1);
    return CouplingSpec::zero();
}

} // namespace fracmfg
