#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gmcf/errors.hpp"
#include "gmcf/field.hpp"
#include "gmcf/stats.hpp"

namespace gmcf {

struct FboundConfig {
    long n = 256;
    double t = 12.0;
    double delta = 0.2;
    double A = 8.0;
    double dt = 0.01;
    std::size_t paths = 100000;
    std::size_t pilot_paths = 10000;
    std::size_t grid_points = 20;
    double C = 0.0;  // 0 = calibrate from the pilot pass

    bool operator==(const FboundConfig&) const = default;
};

struct ExperimentConfig {
    std::string kernel = "triangle";
    double gamma = kSqrt2;
    double delta = 0.2;
    double A = 8.0;
    double t = 9.0;
    double layer_width = 0.25;
    std::size_t N = std::size_t{1} << 16;
    std::vector<long> n_list = {8, 16, 32, 64, 128, 256, 512};
    std::size_t replicas = 2000;
    std::uint64_t seed = 20260808;
    std::string out_dir = "out";
    std::size_t workers = 0;  // 0 = machine parallelism
    double quadrature_tol = 1e-10;
    // Pilot-calibrate A before measure experiments: smallest A with good-event
    // frequency >= 0.9 at every configured n (the configured A is the cap).
    bool calibrate_A = false;
    FboundConfig fbound;

    bool operator==(const ExperimentConfig&) const = default;

    void validate() const {
        if (kernel != "triangle" && kernel != "bspline3")
            throw ConfigError("kernel: must be 'triangle' or 'bspline3'");
        if (!(gamma > 0.0) || gamma > kSqrt2 + 1e-12)
            throw ConfigError("gamma: must lie in (0, 1.4142135623730951]");
        if (!(delta > 0.0 && delta < 0.25)) throw ConfigError("delta: must satisfy 0 < delta < 0.25");
        if (!(A > 0.0)) throw ConfigError("A: must be > 0");
        if (!(t > 0.0)) throw ConfigError("t: must be > 0");
        if (!(layer_width > 0.0 && layer_width <= t))
            throw ConfigError("layer_width: must satisfy 0 < layer_width <= t");
        if (!is_pow2(N)) throw ConfigError("N: must be a power of two");
        if (1.0 / static_cast<double>(N) > std::exp(-t) * (1.0 + 1e-12))
            throw ConfigError("N: grid too coarse for t=" + format_double(t) +
                              "; need N >= " + std::to_string(required_grid_points(t)));
        if (n_list.empty()) throw ConfigError("n_list: must be nonempty");
        for (long n : n_list) {
            if (n < 2) throw ConfigError("n_list: every n must be >= 2");
            if (static_cast<std::size_t>(n) >= N / 2)
                throw ConfigError("n_list: every n must be < N/2");
        }
        if (replicas == 0) throw ConfigError("replicas: must be >= 1");
        if (!(quadrature_tol > 0.0)) throw ConfigError("quadrature_tol: must be > 0");
        if (fbound.n < 2) throw ConfigError("fbound.n: must be >= 2");
        if (!(fbound.delta > 0.0 && fbound.delta < 0.25))
            throw ConfigError("fbound.delta: must satisfy 0 < delta < 0.25");
        const double r_n = fbound.delta * std::log(static_cast<double>(fbound.n));
        if (!(fbound.t >= r_n + 1.0)) throw ConfigError("fbound.t: must be >= delta log n + 1");
        if (!(fbound.dt > 0.0 && fbound.dt <= 0.01))
            throw ConfigError("fbound.dt: must satisfy 0 < dt <= 0.01");
        if (fbound.paths == 0 || fbound.pilot_paths == 0)
            throw ConfigError("fbound.paths: must be >= 1");
        if (fbound.grid_points < 2) throw ConfigError("fbound.grid_points: must be >= 2");
        if (fbound.C < 0.0) throw ConfigError("fbound.C: must be >= 0 (0 = calibrate)");
    }

    static std::string format_double(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return r;
    } catch (const std::exception&) {
        throw ConfigError(key + ": cannot parse '" + v + "' as a number");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        unsigned long long r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return r;
    } catch (const std::exception&) {
        throw ConfigError(key + ": cannot parse '" + v + "' as an unsigned integer");
    }
}

inline std::vector<long> parse_long_list(const std::string& key, const std::string& v) {
    std::vector<long> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<long>(parse_u64(key, item)));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

}  // namespace detail

// Flat INI-style config; keys outside any section belong to [experiment].
// Unknown sections or keys are rejected by name.
inline ExperimentConfig parse_config(const std::string& text,
                                     const ExperimentConfig& base = ExperimentConfig{}) {
    ExperimentConfig cfg = base;
    std::string section = "experiment";
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("malformed section header: " + s);
            section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
            if (section != "experiment" && section != "fbound")
                throw ConfigError("unknown section [" + section + "]");
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value', got: " + s);
        const std::string key = detail::trim(std::string_view(s).substr(0, eq));
        const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
        if (section == "experiment") {
            if (key == "kernel") cfg.kernel = value;
            else if (key == "gamma") cfg.gamma = detail::parse_double(key, value);
            else if (key == "delta") cfg.delta = detail::parse_double(key, value);
            else if (key == "A") cfg.A = detail::parse_double(key, value);
            else if (key == "t") cfg.t = detail::parse_double(key, value);
            else if (key == "layer_width") cfg.layer_width = detail::parse_double(key, value);
            else if (key == "N") cfg.N = detail::parse_u64(key, value);
            else if (key == "n_list") cfg.n_list = detail::parse_long_list(key, value);
            else if (key == "replicas") cfg.replicas = detail::parse_u64(key, value);
            else if (key == "seed") cfg.seed = detail::parse_u64(key, value);
            else if (key == "out_dir") cfg.out_dir = value;
            else if (key == "workers") cfg.workers = detail::parse_u64(key, value);
            else if (key == "quadrature_tol") cfg.quadrature_tol = detail::parse_double(key, value);
            else if (key == "calibrate_A") cfg.calibrate_A = detail::parse_u64(key, value) != 0;
            else throw ConfigError("unknown key '" + key + "' in section [experiment]");
        } else {
            if (key == "n") cfg.fbound.n = static_cast<long>(detail::parse_u64(key, value));
            else if (key == "t") cfg.fbound.t = detail::parse_double(key, value);
            else if (key == "delta") cfg.fbound.delta = detail::parse_double(key, value);
            else if (key == "A") cfg.fbound.A = detail::parse_double(key, value);
            else if (key == "dt") cfg.fbound.dt = detail::parse_double(key, value);
            else if (key == "paths") cfg.fbound.paths = detail::parse_u64(key, value);
            else if (key == "pilot_paths") cfg.fbound.pilot_paths = detail::parse_u64(key, value);
            else if (key == "grid_points") cfg.fbound.grid_points = detail::parse_u64(key, value);
            else if (key == "C") cfg.fbound.C = detail::parse_double(key, value);
            else throw ConfigError("unknown key '" + key + "' in section [fbound]");
        }
    }
    cfg.validate();
    return cfg;
}

// Canonical text with every effective value; parse(echo(cfg)) == cfg.
inline std::string echo_config(const ExperimentConfig& cfg) {
    std::ostringstream o;
    auto d = [](double v) { return ExperimentConfig::format_double(v); };
    o << "[experiment]\n";
    o << "kernel = " << cfg.kernel << "\n";
    o << "gamma = " << d(cfg.gamma) << "\n";
    o << "delta = " << d(cfg.delta) << "\n";
    o << "A = " << d(cfg.A) << "\n";
    o << "t = " << d(cfg.t) << "\n";
    o << "layer_width = " << d(cfg.layer_width) << "\n";
    o << "N = " << cfg.N << "\n";
    o << "n_list = ";
    for (std::size_t i = 0; i < cfg.n_list.size(); ++i)
        o << (i ? "," : "") << cfg.n_list[i];
    o << "\n";
    o << "replicas = " << cfg.replicas << "\n";
    o << "seed = " << cfg.seed << "\n";
    o << "out_dir = " << cfg.out_dir << "\n";
    o << "workers = " << cfg.workers << "\n";
    o << "quadrature_tol = " << d(cfg.quadrature_tol) << "\n";
    o << "calibrate_A = " << (cfg.calibrate_A ? 1 : 0) << "\n";
    o << "\n[fbound]\n";
    o << "n = " << cfg.fbound.n << "\n";
    o << "t = " << d(cfg.fbound.t) << "\n";
    o << "delta = " << d(cfg.fbound.delta) << "\n";
    o << "A = " << d(cfg.fbound.A) << "\n";
    o << "dt = " << d(cfg.fbound.dt) << "\n";
    o << "paths = " << cfg.fbound.paths << "\n";
    o << "pilot_paths = " << cfg.fbound.pilot_paths << "\n";
    o << "grid_points = " << cfg.fbound.grid_points << "\n";
    o << "C = " << d(cfg.fbound.C) << "\n";
    return o.str();
}

}  // namespace gmcf
