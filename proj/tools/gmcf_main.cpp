// gmcf: simulation and verification workbench for star-scale invariant
// log-correlated fields and their critical/subcritical chaos measures on the
// circle.
//
// Subcommands: verify-kernel, verify-brownian, verify-covariance,
// second-moment, tightness, conjecture, scale-decomp, fbound-sweep.
//
// Exit codes: 0 pass, 1 verification failure or runtime error, 2 usage/config
// error. GMCF_SEED is the seed fallback when neither --seed nor the config
// provides one.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gmcf/gmcf.hpp"

namespace {

using gmcf::ExperimentConfig;

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw gmcf::ConfigError("cannot read config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Baked-in defaults per subcommand; a config file and flags overlay these.
ExperimentConfig command_defaults(const std::string& cmd) {
    ExperimentConfig cfg;
    if (cmd == "verify-covariance") {
        cfg.N = 4096;
        cfg.t = 6.0;
        cfg.replicas = 20000;
        cfg.n_list = {2};
    } else if (cmd == "verify-brownian") {
        cfg.replicas = 1000000;
        cfg.N = 4096;
        cfg.t = 6.0;
        cfg.n_list = {2};
    } else if (cmd == "second-moment") {
        cfg.N = 4096;
        cfg.t = 2.0;
        cfg.replicas = 100000;
        cfg.n_list = {1, 4, 16, 64};
    } else if (cmd == "scale-decomp") {
        cfg.N = 4096;
        cfg.t = 7.0;
        cfg.replicas = 400;
        cfg.n_list = {64, 256, 1024};
    } else if (cmd == "conjecture") {
        cfg.gamma = 1.0;
    }
    return cfg;
}

struct CliOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> workers;
};

ExperimentConfig load_config(const std::string& cmd, const CliOptions& opt) {
    ExperimentConfig cfg = command_defaults(cmd);
    if (const char* env = std::getenv("GMCF_SEED")) {
        cfg.seed = gmcf::detail::parse_u64("GMCF_SEED", env);
    }
    if (!opt.config_path.empty()) cfg = gmcf::parse_config(read_file(opt.config_path), cfg);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.out_dir) cfg.out_dir = *opt.out_dir;
    if (opt.workers) cfg.workers = *opt.workers;
    cfg.validate();
    return cfg;
}

int emit_verify_report(const gmcf::VerifyReport& report, const ExperimentConfig& cfg,
                       const std::string& file_stem) {
    for (const auto& c : report.checks)
        std::printf("%s  %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    gmcf::write_text_atomic(std::filesystem::path(cfg.out_dir) / (file_stem + "_report.json"),
                            report.to_json(cfg).dump(2) + "\n");
    std::printf("%s: %s\n", report.command.c_str(), report.all_pass() ? "all pass" : "FAILURES");
    return report.all_pass() ? 0 : 1;
}

void emit_experiment(const gmcf::ExperimentResult& result, const ExperimentConfig& cfg,
                     const std::string& stem) {
    namespace fs = std::filesystem;
    gmcf::write_text_atomic(fs::path(cfg.out_dir) / (stem + "_rows.csv"),
                            gmcf::rows_to_csv(result.rows));
    gmcf::write_text_atomic(fs::path(cfg.out_dir) / (stem + "_summary.json"),
                            result.summary.dump(2) + "\n");
    std::printf("%s: wrote %zu rows to %s\n", stem.c_str(), result.rows.size(),
                (fs::path(cfg.out_dir) / (stem + "_rows.csv")).c_str());
}

int dispatch(const std::string& cmd, const CliOptions& opt) {
    ExperimentConfig cfg = load_config(cmd, opt);
    std::printf("effective config:\n%s\n", gmcf::echo_config(cfg).c_str());
    if (cmd == "verify-kernel") {
        return emit_verify_report(gmcf::verify_kernel(cfg), cfg, "verify_kernel");
    }
    if (cmd == "verify-covariance") {
        return emit_verify_report(gmcf::verify_covariance(cfg), cfg, "verify_covariance");
    }
    if (cmd == "verify-brownian") {
        return emit_verify_report(gmcf::verify_brownian(cfg), cfg, "verify_brownian");
    }
    if (cmd == "second-moment") {
        auto report = gmcf::verify_mass_normalization(cfg);
        auto oracle = gmcf::verify_second_moment(cfg);
        for (const auto& c : oracle.checks) report.checks.push_back(c);
        report.command = "second-moment";
        return emit_verify_report(report, cfg, "second_moment");
    }
    if (cmd == "tightness") {
        auto result = gmcf::run_tightness_experiment(cfg);
        emit_experiment(result, cfg, "tightness");
        return 0;
    }
    if (cmd == "conjecture") {
        auto result = gmcf::run_conjecture_experiment(cfg);
        emit_experiment(result, cfg, "conjecture");
        return 0;
    }
    if (cmd == "scale-decomp") {
        auto table = gmcf::run_scale_decomposition(cfg);
        gmcf::write_text_atomic(std::filesystem::path(cfg.out_dir) / "scale_decomp_summary.json",
                                table.dump(2) + "\n");
        std::printf("scale-decomp: wrote %s\n",
                    (std::filesystem::path(cfg.out_dir) / "scale_decomp_summary.json").c_str());
        return 0;
    }
    if (cmd == "fbound-sweep") {
        auto sweep = gmcf::run_fbound_sweep(cfg);
        if (sweep.calibrated_here)
            std::printf("pilot calibration: C = %.6g\n", sweep.C);
        for (const auto& row : sweep.rows)
            std::printf("%s  gap %.3e: F = %.4g +- %.2g, bound = %.4g%s\n",
                        row.covered ? "PASS" : "FAIL", row.gap, row.estimate, row.stderr_value,
                        row.bound, row.unstable ? "  [unstable]" : "");
        if (sweep.slope_points >= 3)
            std::printf("slope of log(D*F) vs log(r_D - r_n) over %s: %.3f +- %.3f (%zu points)\n",
                        sweep.slope_window.c_str(), sweep.slope_fit.slope,
                        sweep.slope_fit.slope_stderr, sweep.slope_points);
        gmcf::write_text_atomic(std::filesystem::path(cfg.out_dir) / "fbound_sweep_summary.json",
                                sweep.summary.dump(2) + "\n");
        std::printf("fbound-sweep: %s\n", sweep.all_covered ? "all covered" : "COVERAGE FAILURES");
        return sweep.all_covered ? 0 : 1;
    }
    throw gmcf::ConfigError("unknown subcommand: " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"star-scale invariant field / critical GMC workbench"};
    app.require_subcommand(1);

    const char* names[] = {"verify-kernel", "verify-brownian", "verify-covariance",
                           "second-moment", "tightness",       "conjecture",
                           "scale-decomp",  "fbound-sweep"};
    const char* descs[] = {
        "kernel estimate sweeps for both built-in kernels",
        "Brownian barrier formulas vs random-walk oracle and bound sweeps",
        "field covariance fidelity against K_eval",
        "martingale normalizations and E|c_n|^2 vs the quadrature oracle",
        "critical-measure tightness experiment ((log n)|c_n| on the good event)",
        "subcritical conjecture experiment (scaled |c_n| statistic)",
        "restricted pair-energy split by branching-time band",
        "two-point F estimates against the calibrated bound"};

    struct SubOptions {
        std::string config_path;
        std::uint64_t seed = 0;
        std::string out_dir;
        std::size_t workers = 0;
        CLI::Option* seed_opt = nullptr;
        CLI::Option* out_opt = nullptr;
        CLI::Option* workers_opt = nullptr;
    };
    SubOptions sub_opts[8];
    std::string chosen;
    std::size_t chosen_index = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        auto* sub = app.add_subcommand(names[i], descs[i]);
        auto& so = sub_opts[i];
        sub->add_option("--config", so.config_path, "INI config file (flat key = value)");
        so.seed_opt = sub->add_option("--seed", so.seed, "seed override");
        so.out_opt = sub->add_option("--out", so.out_dir, "output directory");
        so.workers_opt =
            sub->add_option("--workers", so.workers, "worker pool size (0 = machine parallelism)");
        sub->callback([&chosen, &chosen_index, i, name = std::string(names[i])]() {
            chosen = name;
            chosen_index = i;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CliOptions opt;
    const auto& so = sub_opts[chosen_index];
    opt.config_path = so.config_path;
    if (so.seed_opt->count() > 0) opt.seed = so.seed;
    if (so.out_opt->count() > 0) opt.out_dir = so.out_dir;
    if (so.workers_opt->count() > 0) opt.workers = so.workers;

    try {
        return dispatch(chosen, opt);
    } catch (const gmcf::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
