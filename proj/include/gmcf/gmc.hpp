#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gmcf/field.hpp"
#include "gmcf/stats.hpp"

namespace gmcf {

// Typical size of the running maximum of the field at time t.
inline double m_of_t(double t) {
    if (t <= 0.0) throw std::invalid_argument("m_of_t: t must be > 0");
    return kSqrt2 * t - 1.5 / kSqrt2 * std::log(t);
}

// Upper barrier for whole trajectories; no constraint (+inf) below e.
inline double U_of_t(double t) {
    const double e = std::exp(1.0);
    if (t < e) return std::numeric_limits<double>::infinity();
    return kSqrt2 * t - std::log(t) / (2.0 * kSqrt2) + 4.0 / kSqrt2 * std::log(std::log(t));
}

struct GmcParams {
    double gamma;
    double t;
    bool critical;

    GmcParams(double gamma_in, double t_in) : gamma(gamma_in), t(t_in) {
        if (!(gamma > 0.0) || gamma > kSqrt2 + 1e-12)
            throw std::invalid_argument("GmcParams: gamma must lie in (0, sqrt(2)]");
        if (t < 0.0) throw std::invalid_argument("GmcParams: t must be >= 0");
        critical = std::abs(gamma - kSqrt2) <= 1e-12;
    }

    double normalization() const { return critical ? std::sqrt(t) : 1.0; }
};

struct GoodEventParams {
    double A;
    double delta;
    long n;
    double r_n;

    GoodEventParams(double A_in, double delta_in, long n_in) : A(A_in), delta(delta_in), n(n_in) {
        if (!(A > 0.0)) throw std::invalid_argument("GoodEventParams: A must be > 0");
        if (!(delta > 0.0 && delta < 0.25))
            throw std::invalid_argument("GoodEventParams: delta must lie in (0, 1/4)");
        if (n < 2) throw std::invalid_argument("GoodEventParams: n must be >= 2");
        r_n = delta * std::log(static_cast<double>(n));
    }
};

// Discretized measure: masses[i] = norm * exp(gamma X_t(theta_i) - gamma^2 t/2) / N.
// Computed in log space; exponents clamped at +700 before exponentiation.
inline std::vector<double> gmc_weights(const LayeredFieldSample& sample, const GmcParams& params) {
    if (std::abs(params.t - sample.grid.horizon()) > 1e-9)
        throw std::invalid_argument("gmc_weights: params.t must equal the sample horizon");
    const std::size_t n = sample.n_points;
    std::vector<double> masses = sample.final_field();
    const double log_base = std::log(params.normalization()) -
                            0.5 * params.gamma * params.gamma * params.t -
                            std::log(static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        double ex = params.gamma * masses[i] + log_base;
        if (ex > 700.0) ex = 700.0;
        masses[i] = std::exp(ex);
        if (!std::isfinite(masses[i])) throw std::runtime_error("gmc_weights: non-finite mass");
    }
    return masses;
}

// Good-set mask: X at the (rounded) level r stays below m(r)+A and the shifted
// field stays below U(s)+A at every later grid level. r_n is rounded down to
// the nearest grid level, which must lie within 0.25 of delta log n.
inline std::vector<std::uint8_t> good_set_mask(const LayeredFieldSample& sample,
                                               const GoodEventParams& gp) {
    const TimeGrid& tg = sample.grid;
    if (gp.r_n > tg.horizon() + 1e-12)
        throw std::invalid_argument("good_set_mask: r_n exceeds the sample horizon");
    const std::size_t r_idx = tg.level_at_or_below(gp.r_n);
    const double r_used = tg.levels[r_idx];
    if (gp.r_n - r_used > 0.25 + 1e-9)
        throw std::invalid_argument("good_set_mask: no time-grid level within 0.25 of r_n");

    const std::size_t n = sample.n_points;
    std::vector<std::uint8_t> mask(n, 1);
    std::vector<double> running(n, 0.0);
    std::vector<double> base(n, 0.0);
    const double m_bar = r_idx > 0 ? m_of_t(r_used) + gp.A : std::numeric_limits<double>::infinity();

    for (std::size_t j = 1; j <= tg.layer_count(); ++j) {
        const double* row = sample.increments.data() + (j - 1) * n;
        for (std::size_t i = 0; i < n; ++i) running[i] += row[i];
        if (j == r_idx) {
            for (std::size_t i = 0; i < n; ++i) {
                base[i] = running[i];
                if (running[i] > m_bar) mask[i] = 0;
            }
        } else if (j > r_idx) {
            const double s = tg.levels[j] - r_used;
            const double u_bar = U_of_t(s) + gp.A;
            if (std::isfinite(u_bar)) {
                for (std::size_t i = 0; i < n; ++i)
                    if (running[i] - base[i] > u_bar) mask[i] = 0;
            }
        }
    }
    return mask;
}

inline bool good_event(std::span<const std::uint8_t> mask) {
    for (auto b : mask)
        if (!b) return false;
    return true;
}

// Smallest A for which the good event holds on this sample: the maximum over
// grid points of the barrier excess. good_event(good_set_mask(s, gp)) is
// equivalent to good_event_excess(s, gp) <= gp.A.
inline double good_event_excess(const LayeredFieldSample& sample, const GoodEventParams& gp) {
    const TimeGrid& tg = sample.grid;
    if (gp.r_n > tg.horizon() + 1e-12)
        throw std::invalid_argument("good_event_excess: r_n exceeds the sample horizon");
    const std::size_t r_idx = tg.level_at_or_below(gp.r_n);
    const double r_used = tg.levels[r_idx];
    const std::size_t n = sample.n_points;
    std::vector<double> running(n, 0.0);
    std::vector<double> base(n, 0.0);
    double excess = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j <= tg.layer_count(); ++j) {
        const double* row = sample.increments.data() + (j - 1) * n;
        for (std::size_t i = 0; i < n; ++i) running[i] += row[i];
        if (j == r_idx) {
            const double m_r = m_of_t(r_used);
            for (std::size_t i = 0; i < n; ++i) {
                base[i] = running[i];
                excess = std::max(excess, running[i] - m_r);
            }
        } else if (j > r_idx) {
            const double u = U_of_t(tg.levels[j] - r_used);
            if (std::isfinite(u)) {
                for (std::size_t i = 0; i < n; ++i)
                    excess = std::max(excess, running[i] - base[i] - u);
            }
        }
    }
    return excess;
}

inline std::vector<double> restricted_measure(std::span<const double> w,
                                              std::span<const std::uint8_t> mask) {
    if (w.size() != mask.size())
        throw std::invalid_argument("restricted_measure: length mismatch");
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = mask[i] ? w[i] : 0.0;
    return out;
}

inline double total_mass(std::span<const double> w) {
    double s = 0.0;
    for (double v : w) s += v;
    return s;
}

}  // namespace gmcf
