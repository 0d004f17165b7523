#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gmcf/gmc.hpp"
#include "gmcf/kernel.hpp"
#include "gmcf/quadrature.hpp"
#include "gmcf/rng.hpp"
#include "gmcf/stats.hpp"

namespace gmcf {

// Branching time r_D = t ^ (log 1/D v r_n): the scale before which the two
// points are nearly perfectly coupled.
inline double branching_time(double t, long n, double delta, double gap) {
    if (gap <= 0.0) throw std::invalid_argument("branching_time: gap must be > 0");
    const double r_n = delta * std::log(static_cast<double>(n));
    if (t < r_n) throw std::invalid_argument("branching_time: need t >= r_n");
    return std::min(t, std::max(-std::log(gap), r_n));
}

// Slope of the linearized barrier; defined once r_D - r_n >= e (up to roundoff
// in the subtraction).
inline double slope(double r_delta, double r_n) {
    const double gap = r_delta - r_n;
    if (gap < std::exp(1.0) - 1e-12)
        throw std::domain_error("slope: undefined for r_delta - r_n < e");
    return kSqrt2 - std::log(gap) / (2.0 * kSqrt2 * gap);
}

// Mean shift of X_{r_n}(theta_1) under the joint exponential tilt.
inline double girsanov_shift(const ScaleCovariance& cov, double r_n, double delta) {
    if (r_n < 0.0) throw std::invalid_argument("girsanov_shift: r_n must be >= 0");
    return kSqrt2 * (r_n + K_eval(cov, r_n, delta));
}

// P(X1 <= H, X2 <= H) for centered Gaussians with variance r_n and covariance
// K_{r_n}(D), where H = -sqrt(2) K - (3 / 2 sqrt 2) log r_n + A. Evaluated by
// one-dimensional quadrature of the conditional normal CDF.
inline double Q_indicator_prob(const ScaleCovariance& cov, const GoodEventParams& gp,
                               double delta, double abs_tol = 1e-12) {
    const double r_n = gp.r_n;
    if (r_n < 1.0) throw std::invalid_argument("Q_indicator_prob: need r_n >= 1");
    const double K = K_eval(cov, r_n, delta);
    if (std::abs(K) > r_n * (1.0 + 1e-12))
        throw std::invalid_argument("Q_indicator_prob: |K| exceeds the variance");
    const double H = -kSqrt2 * K - 1.5 / kSqrt2 * std::log(r_n) + gp.A;
    const double h = H / std::sqrt(r_n);
    const double rho = std::min(K / r_n, 1.0);
    if (rho > 1.0 - 1e-14) return normal_cdf(h);
    const double cond_sd = std::sqrt(1.0 - rho * rho);
    auto f = [&](double u) { return normal_pdf(u) * normal_cdf((h - rho * u) / cond_sd); };
    if (h <= -14.0) return 0.0;
    return integrate(f, -14.0, h, abs_tol);
}

// Tilted Monte Carlo estimate of F_{n,t}(D).
struct FEstimate {
    double value = 0.0;
    double stderr_value = 0.0;
    std::size_t successes = 0;
    std::size_t replicas = 0;
    bool unstable = false;  // effective sample too small for a stable estimate
};

// F_{n,t}(D) = t e^{-2t} E[ 1{0, D good} e^{sqrt2 (X_t(0)+X_t(D))} ].
// The raw integrand is exponentially rare, so paths are sampled under the
// exact joint Girsanov tilt (per-step mean shift sqrt2 (dt + dK) on both
// coordinates); the tilt turns the weight into the constant t e^{2 K_t(D)},
// leaving only the barrier indicator to average.
inline FEstimate estimate_F(const ScaleCovariance& cov, const GoodEventParams& gp, double t,
                            double delta, double dt, std::size_t replicas, std::uint64_t seed) {
    if (delta <= 0.0 || delta > 1.0) throw std::invalid_argument("estimate_F: need 0 < delta <= 1");
    if (t < gp.r_n + 1.0) throw std::invalid_argument("estimate_F: need t >= r_n + 1");
    if (dt <= 0.0 || dt > 0.01) throw std::invalid_argument("estimate_F: need 0 < dt <= 0.01");
    const auto steps = static_cast<std::size_t>(std::llround(t / dt));
    if (std::abs(t - static_cast<double>(steps) * dt) > 1e-9)
        throw std::invalid_argument("estimate_F: t must be a multiple of dt");

    const auto r_idx = static_cast<std::size_t>(std::floor(gp.r_n / dt + 1e-12));
    const double r_used = static_cast<double>(r_idx) * dt;
    const double m_bar = r_idx > 0 ? m_of_t(r_used) + gp.A : std::numeric_limits<double>::infinity();

    // Per-step Cholesky factors and tilt shifts, plus the barrier by step.
    const double sqrt_dt = std::sqrt(dt);
    std::vector<double> l21(steps), l22(steps), shift(steps), barrier(steps + 1);
    double k_total = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double s = static_cast<double>(k) * dt;
        const double c = K_layer(cov, s, s + dt, delta);
        k_total += c;
        l21[k] = c / sqrt_dt;
        l22[k] = std::sqrt(std::max(dt - l21[k] * l21[k], 0.0));
        shift[k] = kSqrt2 * (dt + c);
    }
    for (std::size_t k = 0; k <= steps; ++k) {
        if (k <= r_idx) {
            barrier[k] = std::numeric_limits<double>::infinity();
        } else {
            const double s_rel = static_cast<double>(k) * dt - r_used;
            barrier[k] = U_of_t(s_rel) + gp.A;
        }
    }

    std::size_t successes = 0;
    for (std::size_t r = 0; r < replicas; ++r) {
        RngStream g(stream_key(seed, r));
        double x = 0.0, y = 0.0, base_x = 0.0, base_y = 0.0;
        bool good = true;
        for (std::size_t k = 0; k < steps; ++k) {
            const double z1 = g.gaussian();
            const double z2 = g.gaussian();
            x += sqrt_dt * z1 + shift[k];
            y += l21[k] * z1 + l22[k] * z2 + shift[k];
            const std::size_t kk = k + 1;
            if (kk == r_idx) {
                if (x > m_bar || y > m_bar) {
                    good = false;
                    break;
                }
                base_x = x;
                base_y = y;
            } else if (kk > r_idx) {
                const double bar = barrier[kk];
                if (std::isfinite(bar) && (x - base_x > bar || y - base_y > bar)) {
                    good = false;
                    break;
                }
            }
        }
        if (good) ++successes;
    }

    const double weight = t * std::exp(2.0 * k_total);
    const double p = static_cast<double>(successes) / static_cast<double>(replicas);
    FEstimate out;
    out.value = weight * p;
    out.stderr_value = weight * std::sqrt(p * (1.0 - p) / static_cast<double>(replicas));
    out.successes = successes;
    out.replicas = replicas;
    out.unstable = successes < 100;
    return out;
}

struct BranchingContext {
    long n = 0;
    double t = 0.0;
    double delta = 0.0;  // barrier parameter delta
    double r_n = 0.0;
    double gap = 0.0;  // the spatial gap D
    double r_delta = 0.0;
    std::optional<double> alpha;

    static BranchingContext make(long n, double t, double delta, double gap) {
        BranchingContext ctx;
        ctx.n = n;
        ctx.t = t;
        ctx.delta = delta;
        ctx.gap = gap;
        ctx.r_n = delta * std::log(static_cast<double>(n));
        ctx.r_delta = branching_time(t, n, delta, gap);
        if (ctx.r_delta - ctx.r_n >= std::exp(1.0)) ctx.alpha = slope(ctx.r_delta, ctx.r_n);
        return ctx;
    }
};

struct FBoundParams {
    double C = 1.0;  // calibration constant; fit once on a pilot grid and frozen
};

// Shape of the F bound without the constant:
//   (1/r_n^2) (t / ((t - r_D)+1)) (min(log(r_D-r_n)^5/(r_D-r_n)^2, 1)) (1/D),
// with the min clamped to 1 when r_D - r_n <= 1 (log of a value below 1 is
// treated as unconstrained, following the log x = inf convention).
inline double F_bound_shape(const BranchingContext& ctx) {
    const double gap = ctx.r_delta - ctx.r_n;
    double middle = ctx.t / ((ctx.t - ctx.r_delta) + 1.0);
    double decay = 1.0;
    if (gap > 1.0) {
        const double lg = std::log(gap);
        decay = std::min(std::pow(lg, 5) / (gap * gap), 1.0);
    }
    return 1.0 / (ctx.r_n * ctx.r_n) * middle * decay / ctx.gap;
}

inline double F_bound(const BranchingContext& ctx, const FBoundParams& fb) {
    if (ctx.gap < std::exp(-ctx.t) * (1.0 - 1e-12) ||
        ctx.gap > std::exp(1.0) * std::pow(static_cast<double>(ctx.n), -ctx.delta) * (1.0 + 1e-12))
        throw std::invalid_argument("F_bound: gap outside [e^{-t}, Delta_n]");
    return fb.C * F_bound_shape(ctx);
}

}  // namespace gmcf
