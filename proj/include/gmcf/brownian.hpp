#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gmcf/quadrature.hpp"
#include "gmcf/rng.hpp"
#include "gmcf/stats.hpp"

namespace gmcf {

// P(sup_{s <= t} B_s <= a) = 2 Phi(a/sqrt(t)) - 1 by reflection.
inline double max_cdf(double a, double t) {
    if (a < 0.0) throw std::invalid_argument("max_cdf: a must be >= 0");
    if (t <= 0.0) throw std::invalid_argument("max_cdf: t must be > 0");
    return 2.0 * normal_cdf(a / std::sqrt(t)) - 1.0;
}

// P(sup_{s in [e,t]} B_s <= a), integrating the reflection formula over B_e.
inline double barrier_from_e(double a, double t, double abs_tol = 1e-12) {
    const double e = std::exp(1.0);
    if (a <= 0.0) throw std::invalid_argument("barrier_from_e: a must be > 0");
    if (t <= e) throw std::invalid_argument("barrier_from_e: t must exceed e");
    const double sd_e = std::sqrt(e);
    if (t - e < 1e-12) return normal_cdf(a / sd_e);
    const double sd_rest = std::sqrt(t - e);
    auto f = [&](double x) {
        return normal_pdf(x / sd_e) / sd_e * (2.0 * normal_cdf((a - x) / sd_rest) - 1.0);
    };
    return integrate(f, a - 14.0 * sd_e, a, abs_tol);
}

// Ballot problem for a Brownian bridge from a to b of length t:
// P(B_s >= 0 for all s in [0,t]) = 1 - e^{-2ab/t}.
inline double bridge_ballot(double a, double b, double t) {
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("bridge_ballot: need a, b > 0");
    if (t <= 0.0) throw std::invalid_argument("bridge_ballot: t must be > 0");
    return 1.0 - std::exp(-2.0 * a * b / t);
}

// [e,t] variant: positivity is only required from time e on; condition on the
// bridge value at e and apply the ballot formula on [e,t].
inline double bridge_ballot_from_e(double a, double b, double t, double abs_tol = 1e-12) {
    const double e = std::exp(1.0);
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("bridge_ballot_from_e: need a, b > 0");
    if (t <= e) throw std::invalid_argument("bridge_ballot_from_e: t must exceed e");
    const double mean = a + e / t * (b - a);
    const double sd = std::sqrt(e * (t - e) / t);
    auto f = [&](double x) {
        return normal_pdf((x - mean) / sd) / sd * (1.0 - std::exp(-2.0 * x * b / (t - e)));
    };
    return integrate(f, std::max(0.0, mean - 14.0 * sd), mean + 14.0 * sd, abs_tol);
}

enum class BarrierEvent { max_below, max_below_from_e, bridge_positive, bridge_positive_from_e };

struct BarrierQuery {
    BarrierEvent event = BarrierEvent::max_below;
    double a = 0.0;
    double b = 0.0;
    double t = 0.0;
};

struct McEstimate {
    double value = 0.0;
    double stderr_value = 0.0;
    std::size_t replicas = 0;
};

namespace detail {

// Survival probability of one step against an upper barrier: given grid values
// u = barrier - x_k and v = barrier - x_{k+1} (both must stay positive), the
// in-between crossing has probability e^{-2uv/dt}.
inline double step_survival(double u, double v, double dt) {
    if (u <= 0.0 || v <= 0.0) return 0.0;
    const double ex = -2.0 * u * v / dt;
    return ex < -745.0 ? 1.0 : 1.0 - std::exp(ex);
}

}  // namespace detail

// Random-walk oracle for the closed forms above. Paths are Euler walks on the
// dt-grid; each step multiplies in the exact Brownian crossing probability
// between grid points, so the grid bias stays well under the documented
// O(sqrt(dt)) budget.
inline McEstimate mc_barrier(const BarrierQuery& q, double dt, std::size_t replicas,
                             std::uint64_t seed) {
    if (dt <= 0.0 || dt > 1e-2) throw std::invalid_argument("mc_barrier: need 0 < dt <= 0.01");
    if (replicas == 0) throw std::invalid_argument("mc_barrier: need replicas > 0");
    const double e = std::exp(1.0);
    const auto steps = static_cast<std::size_t>(std::llround(q.t / dt));
    const double sqrt_dt = std::sqrt(dt);
    const bool from_e =
        q.event == BarrierEvent::max_below_from_e || q.event == BarrierEvent::bridge_positive_from_e;
    const bool bridge =
        q.event == BarrierEvent::bridge_positive || q.event == BarrierEvent::bridge_positive_from_e;
    const std::size_t first_constrained =
        from_e ? static_cast<std::size_t>(std::ceil(e / dt - 1e-9)) : 0;

    MeanVar acc;
    std::vector<double> path(steps + 1);
    for (std::size_t r = 0; r < replicas; ++r) {
        RngStream g(stream_key(seed, r));
        double survival = 1.0;
        if (bridge) {
            path[0] = 0.0;
            for (std::size_t k = 0; k < steps; ++k) path[k + 1] = path[k] + sqrt_dt * g.gaussian();
            const double w_end = path[steps];
            for (std::size_t k = 0; k <= steps; ++k) {
                const double s = static_cast<double>(k) * dt;
                path[k] = q.a + path[k] - s / q.t * (w_end - (q.b - q.a));
            }
            for (std::size_t k = first_constrained; k < steps && survival > 0.0; ++k)
                survival *= detail::step_survival(path[k], path[k + 1], dt);
        } else {
            double x = 0.0;
            for (std::size_t k = 0; k < steps; ++k) {
                const double next = x + sqrt_dt * g.gaussian();
                if (k + 1 > first_constrained) {
                    survival *= detail::step_survival(q.a - x, q.a - next, dt);
                } else if (k + 1 == first_constrained && next > q.a) {
                    survival = 0.0;
                }
                x = next;
                if (survival == 0.0 && k + 1 >= first_constrained) {
                    break;
                }
            }
        }
        acc.add(survival);
    }
    return {acc.mean(), acc.stderr_mean(), replicas};
}

}  // namespace gmcf
