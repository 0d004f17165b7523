#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "gmcf/twopoint.hpp"

using namespace gmcf;

namespace {
const ScaleCovariance kTri{SeedKernel::triangle()};
const double kE = std::exp(1.0);
const double kInf = std::numeric_limits<double>::infinity();
}  // namespace

TEST_CASE("branching time") {
    // Minimum saturates for microscopic gaps.
    CHECK(branching_time(20.0, 256, 0.2, std::exp(-25.0)) == 20.0);
    // At Delta_n = e n^{-delta}: log(1/Delta_n) = r_n - 1 < r_n, so the max clamps.
    const double r_n = 0.2 * std::log(256.0);
    const double delta_n = kE * std::pow(256.0, -0.2);
    CHECK(branching_time(20.0, 256, 0.2, delta_n) == doctest::Approx(r_n).epsilon(1e-14));
    // Plain middle regime: t=20, r_n=2 (delta=0.2, n=e^10), gap=e^-5 -> 5.
    const long n_e10 = static_cast<long>(std::llround(std::exp(10.0)));
    CHECK(branching_time(20.0, n_e10, 0.2, std::exp(-5.0)) == doctest::Approx(5.0).epsilon(1e-4));
    CHECK_THROWS_AS(branching_time(20.0, 256, 0.2, 0.0), std::invalid_argument);
}

TEST_CASE("slope value, limit, and barrier endpoint identity") {
    const double at_e = slope(kE + 2.0, 2.0);
    CHECK(at_e == doctest::Approx(kSqrt2 - 1.0 / (2.0 * kSqrt2 * kE)).epsilon(1e-14));
    CHECK(at_e == doctest::Approx(1.284148538617373).epsilon(1e-10));
    CHECK(slope(1e9, 0.0) == doctest::Approx(kSqrt2).epsilon(1e-7));
    CHECK_THROWS_AS(slope(2.5, 0.0), std::domain_error);

    // U(g) = alpha g + (4/sqrt2) log log g exactly at the endpoint g.
    for (double g : {kE, 10.0, 100.0}) {
        const double alpha = slope(g + 1.0, 1.0);
        const double rhs = alpha * g + 4.0 / kSqrt2 * std::log(std::log(g));
        CHECK(U_of_t(g) == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("girsanov shift") {
    CHECK(girsanov_shift(kTri, 2.0, 0.0) == doctest::Approx(2.0 * kSqrt2 * 2.0).epsilon(1e-14));
    CHECK(girsanov_shift(kTri, 2.0, 1.5) == doctest::Approx(kSqrt2 * 2.0).epsilon(1e-14));
    const double expected = kSqrt2 * (2.0 + 1.0 + std::exp(-2.0));
    CHECK(girsanov_shift(kTri, 2.0, std::exp(-2.0)) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(girsanov_shift(kTri, 2.0, std::exp(-2.0)) ==
          doctest::Approx(4.4340336801401072).epsilon(1e-10));
}

TEST_CASE("bivariate indicator probability") {
    // gp with r_n very close to 3.
    GoodEventParams gp(2.0, 0.2, static_cast<long>(std::llround(std::exp(15.0))));
    const double r_n = gp.r_n;
    CHECK(r_n == doctest::Approx(3.0).epsilon(1e-6));
    // Independence at a fully decorrelated gap.
    {
        const double q = Q_indicator_prob(kTri, gp, 1.5);
        const double H = -1.5 / kSqrt2 * std::log(r_n) + gp.A;
        CHECK(K_eval(kTri, r_n, 1.5) == 0.0);
        const double phi = normal_cdf(H / std::sqrt(r_n));
        CHECK(q == doctest::Approx(phi * phi).epsilon(1e-10));
    }
    // Perfect correlation at zero gap.
    {
        const double q = Q_indicator_prob(kTri, gp, 0.0);
        const double K = r_n;
        const double H = -kSqrt2 * K - 1.5 / kSqrt2 * std::log(r_n) + gp.A;
        CHECK(q == doctest::Approx(normal_cdf(H / std::sqrt(r_n))).epsilon(1e-10));
    }
    // Generic gap against a 1e7-draw MC oracle.
    {
        const double gap = std::exp(-1.7);
        const double K = K_eval(kTri, r_n, gap);
        CHECK(K > 0.1);
        CHECK(K < r_n);
        const double H = -kSqrt2 * K - 1.5 / kSqrt2 * std::log(r_n) + gp.A;
        RngStream g(321);
        const double rho = K / r_n;
        const double c = std::sqrt(1.0 - rho * rho);
        std::size_t hits = 0;
        const std::size_t draws = 10000000;
        for (std::size_t i = 0; i < draws; ++i) {
            const double z1 = g.gaussian();
            const double z2 = g.gaussian();
            const double x1 = std::sqrt(r_n) * z1;
            const double x2 = std::sqrt(r_n) * (rho * z1 + c * z2);
            if (x1 <= H && x2 <= H) ++hits;
        }
        const double p_mc = static_cast<double>(hits) / static_cast<double>(draws);
        const double se = std::sqrt(p_mc * (1.0 - p_mc) / static_cast<double>(draws));
        CHECK(std::abs(Q_indicator_prob(kTri, gp, gap) - p_mc) <= 4.0 * se);
    }
    // Nondecreasing in A, exactly.
    {
        double prev = 0.0;
        for (double A : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            GoodEventParams g2(A, 0.2, static_cast<long>(std::llround(std::exp(15.0))));
            const double q = Q_indicator_prob(kTri, g2, 0.05);
            CHECK(q >= prev - 1e-15);
            prev = q;
        }
    }
}

TEST_CASE("estimate_F with no barrier reduces to the lognormal moment") {
    GoodEventParams gp(kInf, 0.2, 256);
    const double t = 4.0, gap = std::exp(-2.0);
    auto est = estimate_F(kTri, gp, t, gap, 0.01, 2000, 5);
    CHECK(est.successes == 2000);
    CHECK(est.stderr_value == 0.0);
    const double expected = t * std::exp(2.0 * K_eval(kTri, t, gap));
    CHECK(est.value == doctest::Approx(expected).epsilon(1e-9));

    // Product-of-marginals at a decorrelated gap: weight is t exactly.
    auto far = estimate_F(kTri, gp, t, 1.0, 0.01, 500, 6);
    CHECK(far.value == doctest::Approx(t).epsilon(1e-12));
}

TEST_CASE("tilted estimator agrees with the raw estimator where both work") {
    // Moderate horizon so that both the tilted indicator mean and the raw
    // exponential-weight mean are estimable.
    GoodEventParams gp(4.0, 0.2, 64);
    const double t = 2.0, gap = std::exp(-1.0), dt = 0.01;
    auto tilted = estimate_F(kTri, gp, t, gap, dt, 100000, 7);

    const auto steps = static_cast<std::size_t>(std::llround(t / dt));
    const auto r_idx = static_cast<std::size_t>(std::floor(gp.r_n / dt + 1e-12));
    const double r_used = static_cast<double>(r_idx) * dt;
    const double m_bar = m_of_t(r_used) + gp.A;
    MeanVar raw;
    for (std::size_t rep = 0; rep < 400000; ++rep) {
        auto p = sample_two_point(kTri, gap, dt, t, stream_key(8, rep));
        bool good = true;
        double bx = 0.0, by = 0.0;
        for (std::size_t k = 1; k <= steps && good; ++k) {
            if (k == r_idx) {
                if (p.x[k] > m_bar || p.y[k] > m_bar) good = false;
                bx = p.x[k];
                by = p.y[k];
            } else if (k > r_idx) {
                const double s_rel = static_cast<double>(k) * dt - r_used;
                const double bar = U_of_t(s_rel) + gp.A;
                if (std::isfinite(bar) && (p.x[k] - bx > bar || p.y[k] - by > bar)) good = false;
            }
        }
        const double w =
            good ? t * std::exp(-2.0 * t + kSqrt2 * (p.x.back() + p.y.back())) : 0.0;
        raw.add(w);
    }
    const double window = 4.0 * (tilted.stderr_value + raw.stderr_mean());
    CHECK(std::abs(tilted.value - raw.mean()) <= window);
}

TEST_CASE("estimate_F indicator grows with A pathwise") {
    const double t = 3.0, gap = std::exp(-1.5);
    double prev = -1.0;
    for (double A : {1.0, 2.0, 4.0, 8.0}) {
        GoodEventParams gp(A, 0.2, 256);
        auto est = estimate_F(kTri, gp, t, gap, 0.01, 5000, 99);  // same seed set
        CHECK(est.value >= prev);
        prev = est.value;
    }
}

TEST_CASE("estimate_F flags unstable estimates") {
    // Tiny A makes the good event rare under the tilt.
    GoodEventParams gp(0.05, 0.2, 256);
    auto est = estimate_F(kTri, gp, 6.0, std::exp(-3.0), 0.01, 300, 17);
    CHECK(est.successes < 100);
    CHECK(est.unstable);
}

TEST_CASE("branching context and F bound") {
    auto ctx = BranchingContext::make(256, 12.0, 0.2, std::exp(-12.0));
    CHECK(ctx.r_delta == 12.0);
    CHECK(ctx.alpha.has_value());
    // Middle factor hits t at the microscopic end.
    FBoundParams fb{2.0};
    CHECK(F_bound(ctx, fb) == doctest::Approx(fb.C * F_bound_shape(ctx)).epsilon(1e-14));
    CHECK(F_bound(ctx, fb) ==
          doctest::Approx(fb.C / (ctx.r_n * ctx.r_n) * 12.0 *
                          (std::pow(std::log(12.0 - ctx.r_n), 5) /
                           ((12.0 - ctx.r_n) * (12.0 - ctx.r_n))) /
                          ctx.gap)
              .epsilon(1e-12));

    // Clamp active near Delta_n: r_delta = r_n.
    const double delta_n = std::exp(1.0) * std::pow(256.0, -0.2);
    auto near = BranchingContext::make(256, 12.0, 0.2, delta_n * 0.999);
    CHECK(near.r_delta == doctest::Approx(near.r_n).epsilon(1e-6));
    CHECK_FALSE(near.alpha.has_value());
    const double expected_near = fb.C / (near.r_n * near.r_n) *
                                 (12.0 / (12.0 - near.r_delta + 1.0)) / near.gap;
    CHECK(F_bound(near, fb) == doctest::Approx(expected_near).epsilon(1e-9));

    // Halving the gap deep inside the range roughly doubles the bound.
    auto a = BranchingContext::make(256, 12.0, 0.2, 2e-3);
    auto b = BranchingContext::make(256, 12.0, 0.2, 1e-3);
    const double ratio = F_bound(b, fb) / F_bound(a, fb);
    CHECK(ratio > 1.5);
    CHECK(ratio < 2.7);

    CHECK_THROWS_AS(F_bound(BranchingContext::make(256, 12.0, 0.2, 0.95), fb),
                    std::invalid_argument);
}

TEST_CASE("heuristic scale integral") {
    for (double n : {8.0, 512.0}) {
        const double lo = std::log(n), hi = 100.0 * std::log(n);
        const double closed = 0.5 * (1.0 / (lo * lo) - 1.0 / (hi * hi));
        const double quad = integrate([](double u) { return 1.0 / (u * u * u); }, lo, hi, 1e-14);
        CHECK(quad == doctest::Approx(closed).epsilon(1e-10));
    }
}
