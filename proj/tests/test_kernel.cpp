#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gmcf/kernel.hpp"

using namespace gmcf;

namespace {

// Independent oracle: closed-form antiderivative of k(u d)/u for the rescaled
// cubic B-spline, used only to cross-check the quadrature path.
//   inner piece (u d <= 1/2):  log u - 3 d^2 u^2 + 2 d^3 u^3
//   outer piece (1/2 <= u d <= 1): 2 log u - 6 d u + 3 d^2 u^2 - (2/3) d^3 u^3
double bspline3_K_oracle(double t, double d) {
    if (d <= 0.0) return t;
    auto inner = [&](double u) { return std::log(u) - 3.0 * d * d * u * u + 2.0 * d * d * d * u * u * u; };
    auto outer = [&](double u) {
        return 2.0 * std::log(u) - 6.0 * d * u + 3.0 * d * d * u * u -
               2.0 / 3.0 * d * d * d * u * u * u;
    };
    const double hi = std::min(std::exp(t), 1.0 / d);
    if (hi <= 1.0) return 0.0;
    const double mid = 0.5 / d;
    double total = 0.0;
    if (mid >= hi) {
        total = inner(hi) - inner(1.0);
    } else if (mid <= 1.0) {
        total = outer(hi) - outer(1.0);
    } else {
        total = inner(mid) - inner(1.0) + outer(hi) - outer(mid);
    }
    return total;
}

}  // namespace

TEST_CASE("seed kernels: values, parity, support") {
    auto tri = SeedKernel::triangle();
    CHECK(k_eval(tri, 0.0) == 1.0);
    CHECK(k_eval(tri, 0.5) == 0.5);
    CHECK(k_eval(tri, -0.5) == 0.5);
    CHECK(k_eval(tri, 1.0) == 0.0);
    CHECK(k_eval(tri, 1.2) == 0.0);

    auto bs = SeedKernel::bspline3();
    CHECK(k_eval(bs, 0.0) == 1.0);
    CHECK(k_eval(bs, 1.2) == 0.0);
    CHECK(k_eval(bs, 0.5) == doctest::Approx(0.25).epsilon(1e-15));
    for (double x : {0.1, 0.3, 0.45, 0.7, 0.95})
        CHECK(k_eval(bs, x) == doctest::Approx(k_eval(bs, -x)).epsilon(1e-15));
    // C^1 across the piece boundary.
    CHECK(bs.deriv(0.5 - 1e-9) == doctest::Approx(bs.deriv(0.5 + 1e-9)).epsilon(1e-6));
}

TEST_CASE("deriv_sup constants recomputed by dense search") {
    for (auto kernel : {SeedKernel::triangle(), SeedKernel::bspline3()}) {
        double sup = 0.0;
        for (int i = 0; i <= 2000000; ++i) {
            const double x = 1.0 * i / 2000000.0;
            sup = std::max(sup, std::abs(kernel.deriv(x)));
        }
        CHECK(sup == doctest::Approx(kernel.deriv_sup).epsilon(1e-9));
    }
    // Finite-difference check that deriv matches eval for the spline.
    auto bs = SeedKernel::bspline3();
    for (double x : {0.1, 0.3, 0.6, 0.9}) {
        const double h = 1e-6;
        const double fd = (bs.eval(x + h) - bs.eval(x - h)) / (2.0 * h);
        CHECK(fd == doctest::Approx(bs.deriv(x)).epsilon(1e-5));
    }
}

TEST_CASE("K_eval closed form and exactness at zero gap") {
    ScaleCovariance tri{SeedKernel::triangle()};
    CHECK(K_eval(tri, 2.0, 0.0) == 2.0);
    CHECK(K_eval(tri, 2.0, std::exp(-2.0)) ==
          doctest::Approx(1.0 + std::exp(-2.0)).epsilon(1e-14));
    CHECK(K_eval(tri, 2.0, std::exp(-2.0)) == doctest::Approx(1.1353352832366127).epsilon(1e-14));
    CHECK(K_eval(tri, 1.0, 1.0) == 0.0);
    CHECK(K_eval(tri, 5.0, 2.0) == 0.0);
    CHECK_THROWS_AS(K_eval(tri, -1.0, 0.1), std::invalid_argument);
}

TEST_CASE("K_eval quadrature vs closed-form oracle for bspline3") {
    ScaleCovariance bs{SeedKernel::bspline3()};
    for (double t : {0.5, 1.0, 2.0, 4.0, 7.0}) {
        CHECK(K_eval(bs, t, 0.0) == t);
        for (double d : {1e-4, 1e-3, 0.01, 0.05, 0.2, 0.5, 0.9, 1.1}) {
            CHECK(K_eval(bs, t, d) == doctest::Approx(bspline3_K_oracle(t, d)).epsilon(1e-9));
        }
    }
}

TEST_CASE("K_layer") {
    ScaleCovariance tri{SeedKernel::triangle()};
    CHECK(K_layer(tri, 1.0, 3.0, 0.0) == 2.0);
    CHECK(K_layer(tri, 0.0, 2.0, 0.3) == doctest::Approx(K_eval(tri, 2.0, 0.3)).epsilon(1e-14));
    CHECK_THROWS_AS(K_layer(tri, 3.0, 1.0, 0.1), std::invalid_argument);

    // Kestimate2 window: expected value near s ^ (log 1/D - r) = 1.
    const double v = K_layer(tri, 2.0, 5.0, std::exp(-3.0));
    CHECK(std::abs(v - 1.0) <= std::exp(1.0) * tri.kernel.deriv_sup);

    ScaleCovariance bs{SeedKernel::bspline3()};
    for (double d : {0.001, 0.02, 0.3}) {
        const double direct = K_layer(bs, 1.0, 2.5, d);
        const double via_diff = bspline3_K_oracle(2.5, d) - bspline3_K_oracle(1.0, d);
        CHECK(direct == doctest::Approx(via_diff).epsilon(1e-9));
        CHECK(direct >= 0.0);
    }
}

TEST_CASE("K_prime identity, bound, and edge cases") {
    ScaleCovariance tri{SeedKernel::triangle()};
    CHECK(K_prime(tri, 2.0, 0.5) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK_THROWS_AS(K_prime(tri, 1.0, 0.0), std::domain_error);

    ScaleCovariance bs{SeedKernel::bspline3()};
    CHECK(K_prime(bs, 1.0, 2.0) == 0.0);  // support empty on both ends
    CHECK(K_prime(bs, 1.0, 0.0) == 0.0);

    // Derivative consistency against central differences of K_eval.
    for (double t : {1.0, 3.0}) {
        for (double d : {0.05, 0.1, 0.3, 0.7}) {
            const double h = 1e-5;
            const double fd = (K_eval(bs, t, d + h) - K_eval(bs, t, d - h)) / (2.0 * h);
            CHECK(K_prime(bs, t, d) == doctest::Approx(fd).epsilon(1e-5));
        }
    }

    // |K'| <= e^t ||k'||_inf everywhere; K' odd.
    for (auto cov : {tri, bs}) {
        for (double t : {0.5, 2.0, 5.0}) {
            for (int i = 1; i <= 300; ++i) {
                const double d = 1.3 * i / 300.0;
                const double kp = K_prime(cov, t, d);
                CHECK(std::abs(kp) <= std::exp(t) * cov.kernel.deriv_sup * (1.0 + 1e-12));
                CHECK(K_prime(cov, t, -d) == doctest::Approx(-kp));
            }
        }
    }
}

TEST_CASE("verify_estimates sweeps") {
    std::vector<double> r_list;
    for (int r = 0; r <= 12; ++r) r_list.push_back(r);
    for (auto kernel : {SeedKernel::triangle(), SeedKernel::bspline3()}) {
        ScaleCovariance cov{kernel};
        auto report = verify_estimates(cov, r_list);
        CHECK(report.all_pass);
        CHECK(report.rows.size() == r_list.size());
        // r = 0 row: K_0(0) - 0 = 0 deviation at the origin is included.
        CHECK(report.rows.front().max_dev_K <= report.rows.front().bound);
        for (const auto& row : report.rows) {
            CHECK(row.max_dev_K <= row.bound);
            CHECK(row.max_dev_layer <= row.bound);
        }
    }
    // The specific window from the layer estimate: bspline3, r=6, s=3, D=e^-8.
    ScaleCovariance bs{SeedKernel::bspline3()};
    const double dev = std::abs(K_layer(bs, 6.0, 9.0, std::exp(-8.0)) - 2.0);
    CHECK(dev <= std::exp(1.0) * bs.kernel.deriv_sup);
}

TEST_CASE("K monotone in t and in gap") {
    for (auto kernel : {SeedKernel::triangle(), SeedKernel::bspline3()}) {
        ScaleCovariance cov{kernel};
        for (double d : {0.0, 0.01, 0.2}) {
            double prev = 0.0;
            for (double t : {0.5, 1.0, 2.0, 4.0}) {
                const double v = K_eval(cov, t, d);
                CHECK(v >= prev - 1e-12);
                CHECK(v <= t + 1e-12);
                prev = v;
            }
        }
        double prev = K_eval(cov, 3.0, 0.0);
        for (int i = 1; i <= 200; ++i) {
            const double v = K_eval(cov, 3.0, 1.2 * i / 200.0);
            CHECK(v <= prev + 1e-9);
            prev = v;
        }
    }
}
