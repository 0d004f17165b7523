#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gmcf/errors.hpp"

namespace gmcf {

namespace detail {

template <class F>
double simpson_adapt(F& f, double a, double fa, double m, double fm, double b, double fb,
                     double whole, double tol, int depth, double& worst) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double err = left + right - whole;
    if (std::abs(err) <= 15.0 * tol || depth <= 0) {
        if (depth <= 0 && std::abs(err) > 15.0 * tol) worst = std::max(worst, std::abs(err) / 15.0);
        return left + right + err / 15.0;
    }
    return simpson_adapt(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1, worst) +
           simpson_adapt(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1, worst);
}

}  // namespace detail

// Adaptive Simpson with absolute tolerance. Throws QuadratureError if the
// depth limit is hit before the local error estimate meets the tolerance.
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-10, int max_depth = 48) {
    if (a == b) return 0.0;
    double sign = 1.0;
    if (b < a) {
        std::swap(a, b);
        sign = -1.0;
    }
    const double fa = f(a);
    const double fb = f(b);
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double worst = 0.0;
    double r = detail::simpson_adapt(f, a, fa, m, fm, b, fb, whole, abs_tol, max_depth, worst);
    if (worst > 0.0)
        throw QuadratureError("adaptive Simpson did not converge", worst, abs_tol);
    return sign * r;
}

// Integrate across explicit breakpoints (kinks, support edges, oscillation
// panels); each panel gets an equal share of the tolerance.
template <class F>
double integrate_panels(F&& f, std::span<const double> breakpoints, double abs_tol = 1e-10,
                        int max_depth = 48) {
    double total = 0.0;
    if (breakpoints.size() < 2) return total;
    const double per_panel = abs_tol / static_cast<double>(breakpoints.size() - 1);
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        if (breakpoints[i + 1] > breakpoints[i])
            total += integrate(f, breakpoints[i], breakpoints[i + 1], per_panel, max_depth);
    }
    return total;
}

// Breakpoint builder: [a,b] cut at the given interior points plus enough
// uniform panels to resolve an oscillation of the given frequency (cycles per
// unit length).
inline std::vector<double> oscillation_breakpoints(double a, double b, double cycles_per_unit,
                                                   std::span<const double> interior = {}) {
    std::vector<double> pts{a, b};
    for (double x : interior)
        if (x > a && x < b) pts.push_back(x);
    const double period = cycles_per_unit > 0 ? 1.0 / cycles_per_unit : (b - a);
    const double panel = std::max(period / 2.0, (b - a) / 4096.0);
    for (double x = a + panel; x < b; x += panel) pts.push_back(x);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

}  // namespace gmcf
