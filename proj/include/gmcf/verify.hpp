#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "gmcf/brownian.hpp"
#include "gmcf/harness.hpp"

namespace gmcf {

struct CheckLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct VerifyReport {
    std::string command;
    std::vector<CheckLine> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    void add(const std::string& name, bool pass, const std::string& detail) {
        checks.push_back({name, pass, detail});
    }

    json to_json(const ExperimentConfig& cfg) const {
        json out;
        out["schema"] = "gmcf-1";
        out["command"] = command;
        out["config_echo"] = echo_config(cfg);
        json lines = json::array();
        for (const auto& c : checks)
            lines.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        out["checks"] = lines;
        out["all_pass"] = all_pass();
        return out;
    }
};

inline std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0,
                       double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
    return buf;
}

// Kernel estimate sweeps for both built-in kernels plus the K' bound.
inline VerifyReport verify_kernel(const ExperimentConfig& cfg) {
    VerifyReport report;
    report.command = "verify-kernel";
    std::vector<double> r_list;
    for (int r = 1; r <= 12; ++r) r_list.push_back(r);
    for (const char* name : {"triangle", "bspline3"}) {
        ScaleCovariance cov{SeedKernel::from_name(name), cfg.quadrature_tol};
        auto est = verify_estimates(cov, r_list);
        double worst_K = 0.0, worst_layer = 0.0;
        for (const auto& row : est.rows) {
            worst_K = std::max(worst_K, row.max_dev_K);
            worst_layer = std::max(worst_layer, row.max_dev_layer);
        }
        report.add(std::string(name) + " estimate sweep r=1..12", est.all_pass,
                   fmt("max |K_r - r| = %.4g, max layer dev = %.4g, bound = %.4g", worst_K,
                       worst_layer, est.rows.front().bound));

        // |K'(t, D)| <= e^t ||k'||_inf on a (t, D) grid.
        bool bound_ok = true;
        double worst_ratio = 0.0;
        for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            for (int i = 1; i <= 200; ++i) {
                const double d = 1.2 * i / 200.0;
                const double kp = std::abs(K_prime(cov, t, d));
                const double cap = std::exp(t) * cov.kernel.deriv_sup;
                worst_ratio = std::max(worst_ratio, kp / cap);
                if (kp > cap * (1.0 + 1e-12)) bound_ok = false;
            }
        }
        report.add(std::string(name) + " K' bound", bound_ok,
                   fmt("max |K'| / (e^t ||k'||) = %.4g", worst_ratio));

        // K_t(D) in [0, t], nonincreasing in D, exact at D = 0.
        bool range_ok = true;
        for (double t : {1.0, 3.0, 6.0}) {
            double prev = K_eval(cov, t, 0.0);
            if (prev != t) range_ok = false;
            for (int i = 1; i <= 100; ++i) {
                const double v = K_eval(cov, t, 1.1 * i / 100.0);
                if (v < -1e-12 || v > t + 1e-12 || v > prev + 1e-9) range_ok = false;
                prev = v;
            }
        }
        report.add(std::string(name) + " K range/monotone", range_ok, "K in [0,t], nonincreasing");
    }
    return report;
}

// Covariance fidelity: empirical Cov(X_t(0), X_t(lag)) against K_eval at
// log-spaced lags, 4 standard errors each.
inline VerifyReport verify_covariance(const ExperimentConfig& cfg) {
    cfg.validate();
    VerifyReport report;
    report.command = "verify-covariance";
    const ScaleCovariance cov{SeedKernel::from_name(cfg.kernel), cfg.quadrature_tol};
    const TimeGrid tg = TimeGrid::uniform(cfg.t, cfg.layer_width);
    const SpatialGrid grid(cfg.N);
    const LayerSpectra spectra = LayerSpectra::build(cov, tg, grid);

    // 20 distinct log-spaced grid lags in [1, N/2].
    std::vector<std::size_t> lags;
    for (int i = 0; i < 64 && lags.size() < 20; ++i) {
        const double f = static_cast<double>(i) / 63.0;
        auto lag = static_cast<std::size_t>(
            std::llround(std::exp(std::log(1.0) + f * std::log(static_cast<double>(cfg.N) / 2.0))));
        lag = std::max<std::size_t>(lag, 1);
        if (lags.empty() || lag > lags.back()) lags.push_back(lag);
    }

    const std::size_t workers = resolve_workers(cfg.workers);
    std::vector<std::vector<double>> products(lags.size(),
                                              std::vector<double>(cfg.replicas, 0.0));
    std::vector<std::unique_ptr<FieldWorkspace>> ws;
    for (std::size_t w = 0; w < workers; ++w) ws.push_back(std::make_unique<FieldWorkspace>(cfg.N));
    parallel_for(cfg.replicas, workers, [&](std::size_t r, std::size_t w) {
        auto sample = sample_field(cov, tg, grid, cfg.seed, r, &spectra, ws[w].get());
        auto x = sample.final_field();
        for (std::size_t l = 0; l < lags.size(); ++l) products[l][r] = x[0] * x[lags[l]];
    });

    bool all_ok = true;
    double worst_sigma = 0.0;
    for (std::size_t l = 0; l < lags.size(); ++l) {
        MeanVar acc;
        for (double p : products[l]) acc.add(p);
        const double expected = K_eval(cov, cfg.t, grid.gap_distance(lags[l]));
        const double dev = std::abs(acc.mean() - expected);
        const double sigma = dev / std::max(acc.stderr_mean(), 1e-300);
        worst_sigma = std::max(worst_sigma, sigma);
        if (dev > 4.0 * acc.stderr_mean()) all_ok = false;
    }
    report.add("covariance fidelity at 20 log-spaced lags", all_ok,
               fmt("worst deviation = %.2f standard errors (replicas %.0f)", worst_sigma,
                   static_cast<double>(cfg.replicas)));
    return report;
}

// Brownian closed forms against the random-walk oracle plus the explicit
// constant-3 bound sweeps.
inline VerifyReport verify_brownian(const ExperimentConfig& cfg) {
    VerifyReport report;
    report.command = "verify-brownian";
    const double dt = 1e-3;
    const std::size_t paths = cfg.replicas;
    const double bias_allowance = 0.01;

    {
        const double exact = max_cdf(1.0, 1.0);
        auto mc = mc_barrier({BarrierEvent::max_below, 1.0, 0.0, 1.0}, dt, paths, cfg.seed);
        const double window = 4.0 * mc.stderr_value + bias_allowance;
        report.add("max_cdf(1,1) vs MC", std::abs(mc.value - exact) <= window,
                   fmt("exact %.6f, mc %.6f +- %.6f", exact, mc.value, mc.stderr_value));
    }
    {
        const double exact = barrier_from_e(2.0, 5.0);
        auto mc = mc_barrier({BarrierEvent::max_below_from_e, 2.0, 0.0, 5.0}, dt, paths,
                             hash_combine(cfg.seed, 2));
        const double window = 4.0 * mc.stderr_value + bias_allowance;
        report.add("barrier_from_e(2,5) vs MC", std::abs(mc.value - exact) <= window,
                   fmt("exact %.6f, mc %.6f +- %.6f", exact, mc.value, mc.stderr_value));
    }
    {
        const double exact = bridge_ballot(1.0, 1.0, 2.0);
        auto mc = mc_barrier({BarrierEvent::bridge_positive, 1.0, 1.0, 2.0}, dt, paths,
                             hash_combine(cfg.seed, 3));
        const double window = 4.0 * mc.stderr_value + bias_allowance;
        report.add("bridge_ballot(1,1,2) vs MC", std::abs(mc.value - exact) <= window,
                   fmt("exact %.6f, mc %.6f +- %.6f", exact, mc.value, mc.stderr_value));
    }
    {
        // sup over [e,t] below a: P * (sqrt(t)+1)/(a+1) <= 3.
        bool ok = true;
        double worst = 0.0;
        for (int ia = 0; ia <= 9; ++ia) {
            const double a = 0.5 + 4.5 * ia / 9.0;
            for (int it = 0; it <= 9; ++it) {
                const double t = std::exp(std::log(std::exp(1.0) + 1.0) +
                                          (std::log(1e4) - std::log(std::exp(1.0) + 1.0)) * it / 9.0);
                const double v = barrier_from_e(a, t) * (std::sqrt(t) + 1.0) / (a + 1.0);
                worst = std::max(worst, v);
                if (v > 3.0) ok = false;
            }
        }
        report.add("sup-barrier bound sweep, constant 3", ok, fmt("max ratio %.4f", worst));
    }
    {
        // bridge ballot on [e,t]: P * (t+1)/((a+1)(b+1)) <= 3.
        bool ok = true;
        double worst = 0.0;
        for (int ia = 0; ia <= 4; ++ia) {
            const double a = 0.5 + 4.5 * ia / 4.0;
            for (int ib = 0; ib <= 4; ++ib) {
                const double b = 0.5 + 4.5 * ib / 4.0;
                for (int it = 0; it <= 9; ++it) {
                    const double t =
                        std::exp(std::log(std::exp(1.0) + 1.0) +
                                 (std::log(1e4) - std::log(std::exp(1.0) + 1.0)) * it / 9.0);
                    const double v =
                        bridge_ballot_from_e(a, b, t) * (t + 1.0) / ((a + 1.0) * (b + 1.0));
                    worst = std::max(worst, v);
                    if (v > 3.0) ok = false;
                }
            }
        }
        report.add("bridge-ballot bound sweep, constant 3", ok, fmt("max ratio %.4f", worst));
    }
    {
        // Conditioning-quadrature route reproduces the closed ballot formula.
        const double a = 1.0, b = 2.0, t = 3.0, s = 1.5;
        const double mean = a + s / t * (b - a);
        const double sd = std::sqrt(s * (t - s) / t);
        auto f = [&](double x) {
            return normal_pdf((x - mean) / sd) / sd * (1.0 - std::exp(-2.0 * a * x / s)) *
                   (1.0 - std::exp(-2.0 * x * b / (t - s)));
        };
        const double via_quad = integrate(f, 0.0, mean + 14.0 * sd, 1e-12);
        const double closed = bridge_ballot(a, b, t);
        report.add("ballot via conditioning quadrature", std::abs(via_quad - closed) <= 1e-8,
                   fmt("quadrature %.10f vs closed %.10f", via_quad, closed));
    }
    return report;
}

// Martingale normalizations: mean total mass 1 (subcritical gamma = 1) and
// sqrt(2) (critical) at t = 2.
inline VerifyReport verify_mass_normalization(const ExperimentConfig& cfg) {
    VerifyReport report;
    report.command = "mass-normalization";
    const ScaleCovariance cov{SeedKernel::from_name(cfg.kernel), cfg.quadrature_tol};
    const std::size_t workers = resolve_workers(cfg.workers);
    const double t = 2.0;
    const std::size_t n_pts = 1u << 10;
    const TimeGrid tg = TimeGrid::uniform(t, cfg.layer_width);
    const SpatialGrid grid(n_pts);
    const LayerSpectra spectra = LayerSpectra::build(cov, tg, grid);
    const GmcParams sub(1.0, t);
    const GmcParams crit(kSqrt2, t);
    std::vector<double> mass_sub(cfg.replicas), mass_crit(cfg.replicas);
    std::vector<std::unique_ptr<FieldWorkspace>> ws;
    for (std::size_t w = 0; w < workers; ++w)
        ws.push_back(std::make_unique<FieldWorkspace>(n_pts));
    parallel_for(cfg.replicas, workers, [&](std::size_t r, std::size_t w) {
        auto sample = sample_field(cov, tg, grid, cfg.seed, r, &spectra, ws[w].get());
        mass_sub[r] = total_mass(gmc_weights(sample, sub));
        mass_crit[r] = total_mass(gmc_weights(sample, crit));
    });
    MeanVar acc_sub, acc_crit;
    for (std::size_t r = 0; r < cfg.replicas; ++r) {
        acc_sub.add(mass_sub[r]);
        acc_crit.add(mass_crit[r]);
    }
    report.add("mean total mass, gamma=1, t=2",
               std::abs(acc_sub.mean() - 1.0) <= 4.0 * acc_sub.stderr_mean(),
               fmt("mc %.5f +- %.5f vs 1", acc_sub.mean(), acc_sub.stderr_mean()));
    const double expected = std::sqrt(2.0);
    report.add("mean total mass, critical, t=2",
               std::abs(acc_crit.mean() - expected) <= 4.0 * acc_crit.stderr_mean(),
               fmt("mc %.5f +- %.5f vs %.5f", acc_crit.mean(), acc_crit.stderr_mean(), expected));
    return report;
}

// E|c_n|^2 against the exact quadrature oracle, critical measure at t = 2.
inline VerifyReport verify_second_moment(const ExperimentConfig& cfg) {
    VerifyReport report;
    report.command = "second-moment";
    const ScaleCovariance cov{SeedKernel::from_name(cfg.kernel), cfg.quadrature_tol};
    const std::size_t workers = resolve_workers(cfg.workers);
    {
        const double t = 2.0;
        const TimeGrid tg = TimeGrid::uniform(t, cfg.layer_width);
        const SpatialGrid grid(cfg.N);
        const LayerSpectra spectra = LayerSpectra::build(cov, tg, grid);
        const GmcParams crit(kSqrt2, t);
        long n_max = 0;
        for (long n : cfg.n_list) n_max = std::max(n_max, n);
        std::vector<std::vector<double>> c2(cfg.n_list.size(),
                                            std::vector<double>(cfg.replicas));
        std::vector<std::unique_ptr<FieldWorkspace>> fws;
        std::vector<std::unique_ptr<FourierWorkspace>> ows;
        for (std::size_t w = 0; w < workers; ++w) {
            fws.push_back(std::make_unique<FieldWorkspace>(cfg.N));
            ows.push_back(std::make_unique<FourierWorkspace>(cfg.N));
        }
        parallel_for(cfg.replicas, workers, [&](std::size_t r, std::size_t w) {
            auto sample = sample_field(cov, tg, grid, cfg.seed, r, &spectra, fws[w].get());
            auto weights = gmc_weights(sample, crit);
            auto coeffs = fourier_coeffs(weights, static_cast<std::size_t>(n_max), ows[w].get());
            for (std::size_t i = 0; i < cfg.n_list.size(); ++i)
                c2[i][r] = std::norm(coeffs.c(static_cast<std::size_t>(cfg.n_list[i])));
        });
        for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
            MeanVar acc;
            for (double v : c2[i]) acc.add(v);
            const double exact = exact_second_moment(cov, crit, cfg.n_list[i]);
            const bool ok = std::abs(acc.mean() - exact) <= 4.0 * acc.stderr_mean();
            report.add(fmt("E|c_n|^2 vs oracle, n=%.0f", static_cast<double>(cfg.n_list[i])), ok,
                       fmt("mc %.6g +- %.2g vs exact %.6g", acc.mean(), acc.stderr_mean(), exact));
        }
    }
    return report;
}

}  // namespace gmcf
