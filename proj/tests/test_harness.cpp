#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "gmcf/gmcf.hpp"

using namespace gmcf;

namespace {

// Reduced-scale config that exercises the full pipeline quickly.
ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.N = 1024;
    cfg.t = 5.0;
    cfg.replicas = 60;
    cfg.n_list = {8, 32, 128};
    cfg.seed = 555;
    cfg.workers = 1;
    return cfg;
}

}  // namespace

TEST_CASE("config defaults validate and round-trip") {
    ExperimentConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    auto echoed = echo_config(cfg);
    auto parsed = parse_config(echoed);
    CHECK(parsed == cfg);

    // Echo contains every effective value even for a minimal input.
    auto minimal = parse_config("kernel = bspline3\nt = 4\nN = 2048\n");
    CHECK(minimal.kernel == "bspline3");
    CHECK(minimal.t == 4.0);
    CHECK(minimal.N == 2048);
    auto echo = echo_config(minimal);
    CHECK(echo.find("delta = ") != std::string::npos);
    CHECK(echo.find("replicas = ") != std::string::npos);
    CHECK(echo.find("[fbound]") != std::string::npos);
    CHECK(parse_config(echo) == minimal);
}

TEST_CASE("config rejections name the key and constraint") {
    CHECK_THROWS_WITH_AS(parse_config("delta = 0.3\n"), doctest::Contains("delta"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("delta = 0.3\n"), doctest::Contains("0.25"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("bogus = 1\n"), doctest::Contains("unknown key 'bogus'"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("[weird]\nx = 1\n"), doctest::Contains("unknown section"),
                         ConfigError);
    // Resolution rule names the required minimum N.
    CHECK_THROWS_WITH_AS(parse_config("t = 9\nN = 1024\n"), doctest::Contains("need N >="),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("N = 100\n"), doctest::Contains("power of two"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("gamma = 1.6\n"), doctest::Contains("gamma"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config("replicas = frog\n"), doctest::Contains("replicas"),
                         ConfigError);
}

TEST_CASE("atomic writer leaves no partial file at the target") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "gmcf_atomic_test";
    fs::remove_all(dir);
    const auto path = dir / "x.csv";
    write_text_atomic(path, "hello\n");
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    CHECK(line == "hello");
    // No leftover temp file.
    std::size_t count = 0;
    for (auto& p : fs::directory_iterator(dir)) {
        (void)p;
        ++count;
    }
    CHECK(count == 1);
    fs::remove_all(dir);
}

TEST_CASE("csv writer format") {
    std::vector<ResultRow> rows(1);
    rows[0].n = 8;
    rows[0].replica = 3;
    rows[0].c_n = {0.25, -0.5};
    rows[0].good = true;
    rows[0].total_mass = 1.5;
    rows[0].seed = 42;
    auto csv = rows_to_csv(rows);
    CHECK(csv.find("n,replica,re_c,im_c,good,total_mass,re_cI,im_cI,re_cII,im_cII,seed\n") == 0);
    CHECK(csv.find("8,3,0.25,-0.5,1,1.5,0,0,0,0,42\n") != std::string::npos);
}

TEST_CASE("fit_log_slope contract") {
    std::vector<double> xs = {0.0, 1.0, 2.0};
    std::vector<double> ys = {0.0, 2.0, 4.0};
    auto fit = fit_log_slope(xs, ys);
    CHECK(fit.slope == doctest::Approx(2.0));
    CHECK(fit.slope_stderr == doctest::Approx(0.0));
    std::vector<double> bad = {1.0, 1.0, 1.0};
    CHECK_THROWS_AS(fit_log_slope(bad, ys), std::invalid_argument);
    std::vector<double> two = {1.0, 2.0};
    CHECK_THROWS_AS(fit_log_slope(two, two), std::invalid_argument);
}

TEST_CASE("tightness experiment: determinism, exchangeability, row layout") {
    auto cfg = small_config();
    auto a = run_tightness_experiment(cfg);
    auto b = run_tightness_experiment(cfg);
    CHECK(rows_to_csv(a.rows) == rows_to_csv(b.rows));
    CHECK(a.rows.size() == cfg.n_list.size() * cfg.replicas);

    // Bit-identical rerun is byte-identical CSV; different seed differs.
    auto cfg2 = cfg;
    cfg2.seed = 556;
    auto c = run_tightness_experiment(cfg2);
    CHECK(rows_to_csv(a.rows) != rows_to_csv(c.rows));

    // Shuffling replica order changes no summary (order-independent reducer).
    auto shuffled = a.rows;
    std::mt19937 gen(4);
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    auto s1 = summarize_rows(a.rows, cfg, false);
    auto s2 = summarize_rows(shuffled, cfg, false);
    CHECK(s1.dump() == s2.dump());

    // Multi-worker run merges to the identical rows.
    auto cfg_mt = cfg;
    cfg_mt.workers = 3;
    auto d = run_tightness_experiment(cfg_mt);
    CHECK(rows_to_csv(a.rows) == rows_to_csv(d.rows));

    // Summary carries the full effective config and the quantile block.
    CHECK(a.summary["schema"] == "gmcf-1");
    CHECK(a.summary["config_echo"].get<std::string>().find("seed = 555") != std::string::npos);
    const auto& first = a.summary["results"][0];
    CHECK(first["n"] == 8);
    CHECK(first.contains("mean_c2_good"));
    CHECK(first.contains("logn_cn_good_quantiles"));
    CHECK(first.contains("p_logn_cn_above_K_good"));
}

TEST_CASE("tightness requires the critical gamma") {
    auto cfg = small_config();
    cfg.gamma = 1.0;
    CHECK_THROWS_AS(run_tightness_experiment(cfg), ConfigError);
}

TEST_CASE("conjecture experiment scaling metadata") {
    auto cfg = small_config();
    cfg.gamma = 1.0;
    auto result = run_conjecture_experiment(cfg);
    CHECK(result.summary["scaling"]["n_exponent"].get<double>() ==
          doctest::Approx((kSqrt2 - 1.0) * (kSqrt2 - 1.0) / 2.0).epsilon(1e-12));
    CHECK(result.summary["scaling"]["n_exponent"].get<double>() ==
          doctest::Approx(0.08578643762690485).epsilon(1e-12));
    CHECK(result.summary["results"][0].contains("scaled_statistic_quantiles"));

    cfg.gamma = 1.0 / kSqrt2;
    auto r2 = run_conjecture_experiment(cfg);
    CHECK(r2.summary["scaling"]["n_exponent"].get<double>() == doctest::Approx(0.25));
    CHECK(r2.summary["scaling"]["logn_exponent"].get<double>() == doctest::Approx(0.25));

    cfg.gamma = kSqrt2;  // critical is out of range for the conjectures
    CHECK_THROWS_AS(run_conjecture_experiment(cfg), ConfigError);
    cfg.gamma = 0.5;
    CHECK_THROWS_AS(run_conjecture_experiment(cfg), ConfigError);
}

TEST_CASE("scale decomposition partitions the region split") {
    auto cfg = small_config();
    cfg.replicas = 30;
    auto table = run_scale_decomposition(cfg);
    for (const auto& entry : table["scale_decomposition"]) {
        double band_total = 0.0;
        for (const auto& band : entry["bands"])
            band_total += band["mean_contribution"].get<double>();
        CHECK(band_total ==
              doctest::Approx(entry["mean_total"].get<double>()).epsilon(1e-9));
        CHECK(entry["mean_far_energy_fraction"].get<double>() >= 0.0);
        CHECK(entry["mean_far_energy_fraction"].get<double>() <= 1.0);
    }
}

TEST_CASE("far-scale energy fraction decreases with n") {
    // Qualitative content of the leading-order remark at unit-test scale.
    auto cfg = small_config();
    cfg.N = 4096;
    cfg.t = 7.0;
    cfg.replicas = 150;
    cfg.n_list = {64, 256, 1024};
    auto table = run_scale_decomposition(cfg);
    std::vector<double> fracs;
    for (const auto& entry : table["scale_decomposition"])
        fracs.push_back(entry["mean_far_energy_fraction"].get<double>());
    REQUIRE(fracs.size() == 3);
    CHECK(fracs[0] > fracs[2]);
}

TEST_CASE("fbound sweep at reduced scale") {
    ExperimentConfig cfg;
    cfg.N = 256;  // validation only; the sweep uses the two-point sampler
    cfg.t = 5.0;
    cfg.n_list = {8, 16};
    cfg.seed = 777;
    cfg.workers = 1;
    cfg.fbound.n = 64;
    cfg.fbound.t = 6.0;
    cfg.fbound.paths = 4000;
    cfg.fbound.pilot_paths = 1500;
    cfg.fbound.grid_points = 8;
    auto sweep = run_fbound_sweep(cfg);
    CHECK(sweep.calibrated_here);
    CHECK(sweep.C > 0.0);
    CHECK(sweep.rows.size() == 8);
    CHECK(sweep.all_covered);
    for (const auto& row : sweep.rows) {
        CHECK(row.gap >= std::exp(-6.0) * 0.999);
        CHECK(row.estimate >= 0.0);
        CHECK(row.bound >= 0.0);
    }
    CHECK(sweep.summary["all_covered"].get<bool>());

    // A pinned C skips calibration.
    cfg.fbound.C = sweep.C;
    auto sweep2 = run_fbound_sweep(cfg);
    CHECK_FALSE(sweep2.calibrated_here);
    CHECK(sweep2.C == sweep.C);
}

TEST_CASE("pilot calibration of A is reported and capped") {
    auto cfg = small_config();
    cfg.calibrate_A = true;
    cfg.A = 6.0;
    auto result = run_tightness_experiment(cfg);
    const double a_eff = result.summary["A_effective"].get<double>();
    CHECK(a_eff > 0.0);
    CHECK(a_eff <= 6.0);
    CHECK(result.summary.contains("A_calibration"));
    const auto& freqs = result.summary["A_calibration"]["min_good_frequency_by_A"];
    CHECK(freqs[ExperimentConfig::format_double(a_eff)].get<double>() >= 0.9);
    // Round trip of the calibrate flag.
    auto parsed = parse_config(echo_config(cfg));
    CHECK(parsed == cfg);
    // Calibration is deterministic.
    auto again = run_tightness_experiment(cfg);
    CHECK(again.summary["A_effective"] == result.summary["A_effective"]);
}

TEST_CASE("summary second moment matches the quadrature oracle at small t") {
    // Short horizon keeps the critical tails mild enough for a unit-sized MC;
    // the acceptance suite covers t = 2 at 1e5 replicas.
    ExperimentConfig cfg;
    cfg.N = 512;
    cfg.t = 1.0;
    cfg.replicas = 20000;
    cfg.n_list = {4, 16};
    cfg.seed = 31337;
    cfg.workers = 1;
    auto result = run_tightness_experiment(cfg);
    const ScaleCovariance tri{SeedKernel::triangle()};
    const GmcParams crit(kSqrt2, 1.0);
    for (const auto& e : result.summary["results"]) {
        const long n = e["n"].get<long>();
        const double mc = e["mean_c2_all"].get<double>();
        const double se = e["stderr_c2_all"].get<double>();
        const double exact = exact_second_moment(tri, crit, n);
        CHECK(std::abs(mc - exact) <= 4.0 * se);
    }
}
