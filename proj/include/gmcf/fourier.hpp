#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "gmcf/fft.hpp"
#include "gmcf/gmc.hpp"
#include "gmcf/kernel.hpp"
#include "gmcf/quadrature.hpp"

namespace gmcf {

// Coefficients c_n = sum_i e^{+2 pi i n theta_i} masses[i] for n = 0..n_max.
struct FourierCoefficients {
    std::vector<std::complex<double>> values;

    std::complex<double> c(std::size_t n) const { return values.at(n); }
    double total_mass() const { return values.at(0).real(); }
};

struct FourierWorkspace {
    explicit FourierWorkspace(std::size_t n) : fft(n), buf(n), corr(n) {}
    Fft fft;
    std::vector<std::complex<double>> buf;
    std::vector<double> corr;
};

inline FourierCoefficients fourier_coeffs(std::span<const double> masses, std::size_t n_max,
                                          FourierWorkspace* ws = nullptr) {
    const std::size_t n = masses.size();
    if (n_max >= n / 2)
        throw std::invalid_argument("fourier_coeffs: n_max must be < N/2 (aliasing)");
    FourierWorkspace local(n);
    if (!ws) ws = &local;
    for (std::size_t i = 0; i < n; ++i) ws->buf[i] = masses[i];
    ws->fft.inverse(ws->buf.data());  // +i sign convention, unnormalized
    FourierCoefficients out;
    out.values.assign(ws->buf.begin(), ws->buf.begin() + static_cast<std::ptrdiff_t>(n_max + 1));
    return out;
}

// Exact E|c_{n,t}|^2 with no good event:
//   norm^2 * int_0^1 cos(2 pi n D) e^{gamma^2 K_t(d(D))} dD
// evaluated as 2 int_0^{1/2} by the D -> 1-D symmetry of the circle distance.
inline double exact_second_moment(const ScaleCovariance& cov, const GmcParams& params, long n,
                                  double abs_tol = 1e-10) {
    if (n < 0) throw std::invalid_argument("exact_second_moment: n must be >= 0");
    if (params.t == 0.0) return params.critical ? 0.0 : (n == 0 ? 1.0 : 0.0);
    const double g2 = params.gamma * params.gamma;
    auto f = [&](double d) {
        return std::cos(2.0 * kPi * static_cast<double>(n) * d) *
               std::exp(g2 * K_eval(cov, params.t, d));
    };
    const double kink = std::exp(-params.t);
    auto pts = oscillation_breakpoints(0.0, 0.5, 2.0 * static_cast<double>(n),
                                       std::span<const double>(&kink, 1));
    const double norm2 = params.critical ? params.t : 1.0;
    return 2.0 * norm2 * integrate_panels(f, pts, abs_tol);
}

// Contribution split of |c_n|^2 of the mask-restricted measure by circle gap:
// region I is d in [Delta_n, 1/2], region II is d < Delta_n, Delta_n = e n^{-delta}.
struct RegionSplit {
    double delta_n = 0.0;
    std::complex<double> c_I{0.0, 0.0};
    std::complex<double> c_II{0.0, 0.0};
};

// Circular autocorrelation A[g] = sum_i w[i] w[(i+g) mod N] via two transforms.
inline void mass_autocorrelation(std::span<const double> w, FourierWorkspace& ws) {
    const std::size_t n = w.size();
    for (std::size_t i = 0; i < n; ++i) ws.buf[i] = w[i];
    ws.fft.forward(ws.buf.data());
    for (std::size_t k = 0; k < n; ++k) ws.buf[k] = std::norm(ws.buf[k]);
    ws.fft.inverse(ws.buf.data());
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t g = 0; g < n; ++g) ws.corr[g] = ws.buf[g].real() * inv_n;
}

namespace detail {

// Rotor-based sum over gaps of corr[g] e^{+2 pi i n g / N} with a predicate on g;
// the rotor is re-seeded periodically to keep roundoff drift negligible.
template <class Pred>
std::complex<double> gap_weighted_sum(std::span<const double> corr, long n, Pred&& include) {
    const std::size_t size = corr.size();
    const double ang = 2.0 * kPi * static_cast<double>(n) / static_cast<double>(size);
    const std::complex<double> step{std::cos(ang), std::sin(ang)};
    std::complex<double> rotor{1.0, 0.0};
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t g = 0; g < size; ++g) {
        if ((g & 2047u) == 0)
            rotor = std::polar(1.0, ang * static_cast<double>(g));
        if (include(g)) acc += corr[g] * rotor;
        rotor *= step;
    }
    return acc;
}

}  // namespace detail

inline RegionSplit region_contributions(std::span<const double> w,
                                        std::span<const std::uint8_t> mask, long n,
                                        const GoodEventParams& gp,
                                        FourierWorkspace* ws = nullptr) {
    const std::size_t size = w.size();
    if (mask.size() != size) throw std::invalid_argument("region_contributions: length mismatch");
    if (static_cast<std::size_t>(n) >= size / 2)
        throw std::invalid_argument("region_contributions: n must be < N/2");
    FourierWorkspace local(size);
    if (!ws) ws = &local;
    auto restricted = restricted_measure(w, mask);
    mass_autocorrelation(restricted, *ws);

    RegionSplit out;
    out.delta_n = std::exp(1.0) * std::pow(static_cast<double>(n), -gp.delta);
    const SpatialGrid grid(size);
    out.c_I = detail::gap_weighted_sum(ws->corr, n, [&](std::size_t g) {
        return grid.gap_distance(g) >= out.delta_n;
    });
    out.c_II = detail::gap_weighted_sum(ws->corr, n, [&](std::size_t g) {
        return grid.gap_distance(g) < out.delta_n;
    });
    return out;
}

// Pair-sum energy binned by branching time r_D of the gap, bands given by
// their lower edges in r-units (partition of [edges[0], inf)).
inline std::vector<std::complex<double>> gap_band_contributions(
    std::span<const double> corr, long n, double t, double r_n,
    std::span<const double> band_edges) {
    const std::size_t size = corr.size();
    const SpatialGrid grid(size);
    std::vector<std::complex<double>> bands(band_edges.size(), {0.0, 0.0});
    const double ang = 2.0 * kPi * static_cast<double>(n) / static_cast<double>(size);
    const std::complex<double> step{std::cos(ang), std::sin(ang)};
    std::complex<double> rotor{1.0, 0.0};
    for (std::size_t g = 0; g < size; ++g) {
        if ((g & 2047u) == 0) rotor = std::polar(1.0, ang * static_cast<double>(g));
        const double d = grid.gap_distance(g);
        const double r_delta =
            std::min(t, std::max(d > 0.0 ? -std::log(d) : t, r_n));
        std::size_t band = 0;
        for (std::size_t b = 0; b < band_edges.size(); ++b)
            if (r_delta >= band_edges[b]) band = b;
        bands[band] += corr[g] * rotor;
        rotor *= step;
    }
    return bands;
}

}  // namespace gmcf
