#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gmcf/quadrature.hpp"
#include "gmcf/stats.hpp"

namespace gmcf {

enum class KernelName { triangle, bspline3 };

inline std::string to_string(KernelName n) {
    return n == KernelName::triangle ? "triangle" : "bspline3";
}

namespace detail {

inline double triangle_eval(double x) {
    double a = std::abs(x);
    return a < 1.0 ? 1.0 - a : 0.0;
}

inline double triangle_deriv(double x) {
    if (x == 0.0 || std::abs(x) >= 1.0) return 0.0;  // a.e. choice at the kinks
    return x > 0.0 ? -1.0 : 1.0;
}

// Cubic B-spline rescaled to support [-1,1] and normalized to 1 at the origin:
//   |x| <= 1/2 : 1 - 6x^2 + 6|x|^3
//   1/2 <= |x| <= 1 : 2(1-|x|)^3
// C^2, nonnegative, and an autocorrelation, hence positive definite.
inline double bspline3_eval(double x) {
    double a = std::abs(x);
    if (a >= 1.0) return 0.0;
    if (a <= 0.5) return 1.0 + 6.0 * a * a * (a - 1.0);
    double u = 1.0 - a;
    return 2.0 * u * u * u;
}

inline double bspline3_deriv(double x) {
    double a = std::abs(x);
    if (a >= 1.0) return 0.0;
    double d;
    if (a <= 0.5)
        d = 18.0 * a * a - 12.0 * a;
    else {
        double u = 1.0 - a;
        d = -6.0 * u * u;
    }
    return x >= 0.0 ? d : -d;
}

}  // namespace detail

// Seed kernel k: even, k(0)=1, supported in [-1,1].
struct SeedKernel {
    KernelName name;
    double (*eval)(double);
    double (*deriv)(double);
    double deriv_sup;  // sup |k'|; exact for triangle, dense-search constant for bspline3

    static SeedKernel triangle() {
        return {KernelName::triangle, &detail::triangle_eval, &detail::triangle_deriv, 1.0};
    }

    static SeedKernel bspline3() {
        // |k'| peaks at x = 1/3 with value 2 (verified by dense search in tests).
        return {KernelName::bspline3, &detail::bspline3_eval, &detail::bspline3_deriv, 2.0};
    }

    static SeedKernel from_name(std::string_view s) {
        if (s == "triangle") return triangle();
        if (s == "bspline3") return bspline3();
        throw std::invalid_argument("unknown kernel '" + std::string(s) +
                                    "' (expected triangle or bspline3)");
    }
};

inline double k_eval(const SeedKernel& k, double x) { return k.eval(x); }

// Scale covariance K_t(D) = int_1^{e^t} k(u D)/u du.
struct ScaleCovariance {
    SeedKernel kernel;
    double quadrature_tol = 1e-10;
};

// K_t(D). Closed form for the triangle kernel, adaptive quadrature otherwise.
// Exactly t at D = 0.
inline double K_eval(const ScaleCovariance& cov, double t, double delta) {
    if (t < 0.0) throw std::invalid_argument("K_eval: t must be >= 0");
    const double d = std::abs(delta);
    if (d == 0.0) return t;
    // Integrand support ends at u = 1/d.
    const double log_hi = std::min(t, -std::log(d));
    if (log_hi <= 0.0) return 0.0;
    const double hi = std::exp(log_hi);
    if (cov.kernel.name == KernelName::triangle) {
        // int_1^U (1/u - d) du = log U - d (U - 1)
        return log_hi - d * (hi - 1.0);
    }
    auto f = [&](double u) { return cov.kernel.eval(u * d) / u; };
    // Piece boundary of the spline at u = 1/(2d).
    const double mid = 0.5 / d;
    if (mid > 1.0 && mid < hi) {
        double pts[3] = {1.0, mid, hi};
        return integrate_panels(f, pts, cov.quadrature_tol);
    }
    return integrate(f, 1.0, hi, cov.quadrature_tol);
}

// Layer covariance K_t - K_s, integrated directly over [e^s, e^t].
inline double K_layer(const ScaleCovariance& cov, double s, double t, double delta) {
    if (s < 0.0 || s > t) throw std::invalid_argument("K_layer: need 0 <= s <= t");
    const double d = std::abs(delta);
    if (d == 0.0) return t - s;
    const double log_hi = std::min(t, -std::log(d));
    if (log_hi <= s) return 0.0;
    const double lo = std::exp(s);
    const double hi = std::exp(log_hi);
    if (cov.kernel.name == KernelName::triangle) {
        return (log_hi - s) - d * (hi - lo);
    }
    auto f = [&](double u) { return cov.kernel.eval(u * d) / u; };
    const double mid = 0.5 / d;
    if (mid > lo && mid < hi) {
        double pts[3] = {lo, mid, hi};
        return integrate_panels(f, pts, cov.quadrature_tol);
    }
    return integrate(f, lo, hi, cov.quadrature_tol);
}

// d/dD K_t(D) = int_1^{e^t} k'(uD) du = (k(e^t D) - k(D)) / D, exact for any
// seed kernel. Odd in D; |K'| <= e^t ||k'||_inf.
inline double K_prime(const ScaleCovariance& cov, double t, double delta) {
    if (t < 0.0) throw std::invalid_argument("K_prime: t must be >= 0");
    if (delta == 0.0) {
        if (cov.kernel.name == KernelName::triangle)
            throw std::domain_error("K_prime: triangle kernel is not differentiable at 0");
        return 0.0;  // smooth even kernel
    }
    const double d = std::abs(delta);
    const double k_at_top = (t >= -std::log(d)) ? 0.0 : cov.kernel.eval(std::exp(t) * d);
    const double v = (k_at_top - cov.kernel.eval(d)) / d;
    return delta > 0.0 ? v : -v;
}

// One row of the kernel-estimate sweep at scale r.
struct EstimateSweepRow {
    double r = 0.0;
    double max_dev_K = 0.0;      // max |K_r(D) - r| over D in [0, e^{-r+1}]
    double max_dev_layer = 0.0;  // max |K_{r+s}(D)-K_r(D) - s ^ (log 1/D - r)_+| over D, s
    double bound = 0.0;          // e * ||k'||_inf
    bool pass = false;
};

struct EstimateReport {
    std::vector<EstimateSweepRow> rows;
    bool all_pass = true;
};

// Sweeps the uniform-in-D kernel estimates over dense grids. The predicted
// layer value min(s, max(log(1/D) - r, 0)) is exact (zero) for D >= e^{-r},
// where the integrand support is exhausted.
inline EstimateReport verify_estimates(const ScaleCovariance& cov, std::span<const double> r_list,
                                       std::span<const double> s_list_in = {},
                                       std::size_t grid_points = 512) {
    static const double default_s[] = {0.5, 1.0, 2.0, 3.0, 5.0, 8.0};
    std::span<const double> s_list =
        s_list_in.empty() ? std::span<const double>(default_s) : s_list_in;
    EstimateReport report;
    const double bound = std::exp(1.0) * cov.kernel.deriv_sup;
    for (double r : r_list) {
        if (r < 0.0) throw std::invalid_argument("verify_estimates: r must be >= 0");
        EstimateSweepRow row;
        row.r = r;
        row.bound = bound;
        const double d_max = std::exp(-r + 1.0);
        for (std::size_t i = 0; i < grid_points; ++i) {
            const double d = d_max * static_cast<double>(i) / static_cast<double>(grid_points - 1);
            row.max_dev_K = std::max(row.max_dev_K, std::abs(K_eval(cov, r, d) - r));
            for (double s : s_list) {
                const double measured = K_layer(cov, r, r + s, d);
                const double predicted =
                    d == 0.0 ? s : std::min(s, std::max(-std::log(d) - r, 0.0));
                row.max_dev_layer = std::max(row.max_dev_layer, std::abs(measured - predicted));
            }
        }
        row.pass = row.max_dev_K <= bound && row.max_dev_layer <= bound;
        report.all_pass = report.all_pass && row.pass;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace gmcf
