#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmcf/errors.hpp"
#include "gmcf/fft.hpp"
#include "gmcf/kernel.hpp"
#include "gmcf/rng.hpp"

namespace gmcf {

// Time axis of the cutoff family: t0 = 0 < t1 < ... < tL.
struct TimeGrid {
    std::vector<double> levels;

    explicit TimeGrid(std::vector<double> lv) : levels(std::move(lv)) {
        if (levels.size() < 2 || levels.front() != 0.0)
            throw std::invalid_argument("TimeGrid: levels must start at 0 and have >= 2 entries");
        for (std::size_t j = 1; j < levels.size(); ++j)
            if (levels[j] <= levels[j - 1])
                throw std::invalid_argument("TimeGrid: levels must be strictly increasing");
    }

    static TimeGrid uniform(double horizon, double width) {
        if (horizon <= 0.0 || width <= 0.0)
            throw std::invalid_argument("TimeGrid: horizon and width must be > 0");
        std::vector<double> lv{0.0};
        for (double t = width; t < horizon - 1e-12; t += width) lv.push_back(t);
        lv.push_back(horizon);
        return TimeGrid(std::move(lv));
    }

    std::size_t layer_count() const { return levels.size() - 1; }
    double horizon() const { return levels.back(); }
    double layer_width(std::size_t j) const { return levels[j + 1] - levels[j]; }

    // Largest level index with levels[idx] <= value.
    std::size_t level_at_or_below(double value) const {
        if (value < 0.0) throw std::invalid_argument("TimeGrid: negative time");
        std::size_t idx = 0;
        for (std::size_t j = 0; j < levels.size(); ++j)
            if (levels[j] <= value + 1e-12) idx = j;
        return idx;
    }
};

// Power-of-two circle grid, points i/N, arc distance in [0, 1/2].
struct SpatialGrid {
    std::size_t n;

    explicit SpatialGrid(std::size_t n_points) : n(n_points) {
        if (!is_pow2(n)) throw std::invalid_argument("SpatialGrid: N must be a power of two");
    }

    double point(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(n); }

    double gap_distance(std::size_t g) const {
        const std::size_t m = g % n;
        return static_cast<double>(std::min(m, n - m)) / static_cast<double>(n);
    }

    double circle_distance(std::size_t i, std::size_t j) const {
        return gap_distance(i >= j ? i - j : j - i);
    }
};

// One joint realization of the layered field: row j holds the increment
// X_{t_{j+1}} - X_{t_j} at every grid point. Rows are independent.
struct LayeredFieldSample {
    TimeGrid grid;
    std::size_t n_points;
    std::vector<double> increments;  // layer-major, layer_count x n_points

    double increment(std::size_t layer, std::size_t i) const {
        return increments[layer * n_points + i];
    }

    std::span<const double> layer_row(std::size_t layer) const {
        return {increments.data() + layer * n_points, n_points};
    }

    // Cumulative field at the final level.
    std::vector<double> final_field() const {
        std::vector<double> x(n_points, 0.0);
        for (std::size_t j = 0; j < grid.layer_count(); ++j) {
            const double* row = increments.data() + j * n_points;
            for (std::size_t i = 0; i < n_points; ++i) x[i] += row[i];
        }
        return x;
    }
};

// Shifted field X^{(r)}_s = X_{s+r} - X_r as a view over the layers after
// r_level; value semantics only, no copies of the layer data.
struct ShiftedFieldView {
    const LayeredFieldSample* sample;
    std::size_t r_level;

    std::size_t levels_after() const { return sample->grid.layer_count() - r_level; }

    double elapsed(std::size_t j) const {
        return sample->grid.levels[r_level + j] - sample->grid.levels[r_level];
    }

    // X^{(r)} at elapsed level j (j = 0 gives zeros).
    std::vector<double> cumulative(std::size_t j) const {
        std::vector<double> x(sample->n_points, 0.0);
        for (std::size_t l = r_level; l < r_level + j; ++l) {
            const double* row = sample->increments.data() + l * sample->n_points;
            for (std::size_t i = 0; i < sample->n_points; ++i) x[i] += row[i];
        }
        return x;
    }
};

inline ShiftedFieldView shifted_view(const LayeredFieldSample& sample, std::size_t r_level) {
    if (r_level > sample.grid.layer_count())
        throw std::invalid_argument("shifted_view: r_level out of range");
    return {&sample, r_level};
}

// DFT eigenvalues of the periodized layer covariance c[j] = K_layer(s,t,d(0,j)).
// Small negative eigenvalues (roundoff) are clamped to zero; anything below
// -tol_neg * max is a genuine positive-definiteness failure.
inline std::vector<double> layer_spectrum(const ScaleCovariance& cov, double s, double t,
                                          const SpatialGrid& grid, double tol_neg = 1e-8) {
    if (s > t) throw std::invalid_argument("layer_spectrum: need s <= t");
    const std::size_t n = grid.n;
    std::vector<double> lambda(n, 0.0);
    if (s == t) return lambda;
    std::vector<std::complex<double>> buf(n);
    for (std::size_t j = 0; j <= n / 2; ++j) {
        const double c = K_layer(cov, s, t, grid.gap_distance(j));
        buf[j] = c;
        if (j > 0 && j < n / 2) buf[n - j] = c;
    }
    Fft fft(n);
    fft.forward(buf);
    double max_eig = 0.0;
    for (std::size_t k = 0; k < n; ++k) max_eig = std::max(max_eig, buf[k].real());
    for (std::size_t k = 0; k < n; ++k) {
        double v = buf[k].real();
        if (v < -tol_neg * max_eig)
            throw SpectrumError("layer covariance is not positive semidefinite", k);
        lambda[k] = std::max(v, 0.0);
    }
    return lambda;
}

inline std::size_t required_grid_points(double horizon) {
    std::size_t n = 1;
    while (static_cast<double>(n) < std::exp(horizon)) n <<= 1;
    return n;
}

// Precomputed per-layer spectra; shared read-only across replicas.
struct LayerSpectra {
    std::vector<std::vector<double>> lambda;

    static LayerSpectra build(const ScaleCovariance& cov, const TimeGrid& tg,
                              const SpatialGrid& grid) {
        LayerSpectra out;
        out.lambda.reserve(tg.layer_count());
        for (std::size_t j = 0; j < tg.layer_count(); ++j)
            out.lambda.push_back(layer_spectrum(cov, tg.levels[j], tg.levels[j + 1], grid));
        return out;
    }
};

// Scratch buffers for one worker; avoids reallocation across replicas.
struct FieldWorkspace {
    explicit FieldWorkspace(std::size_t n) : fft(n), buf(n) {}
    Fft fft;
    std::vector<std::complex<double>> buf;
};

// Draws one replica of the layered field by per-layer circulant synthesis:
// independent Hermitian-symmetrized complex Gaussians scaled by sqrt(lambda),
// inverse transform, 1/sqrt(N) normalization.
inline LayeredFieldSample sample_field(const ScaleCovariance& cov, const TimeGrid& tg,
                                       const SpatialGrid& grid, std::uint64_t seed,
                                       std::uint64_t replica, const LayerSpectra* spectra = nullptr,
                                       FieldWorkspace* ws = nullptr) {
    const std::size_t n = grid.n;
    if (1.0 / static_cast<double>(n) > std::exp(-tg.horizon()) * (1.0 + 1e-12))
        throw std::invalid_argument(
            "sample_field: grid too coarse for horizon; need N >= " +
            std::to_string(required_grid_points(tg.horizon())));
    LayerSpectra local;
    if (!spectra) {
        local = LayerSpectra::build(cov, tg, grid);
        spectra = &local;
    }
    FieldWorkspace local_ws(n);
    if (!ws) ws = &local_ws;

    LayeredFieldSample sample{tg, n, std::vector<double>(tg.layer_count() * n)};
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t j = 0; j < tg.layer_count(); ++j) {
        const auto& lambda = spectra->lambda[j];
        RngStream g(stream_key(seed, replica, j));
        auto& buf = ws->buf;
        buf[0] = std::sqrt(lambda[0]) * g.gaussian();
        buf[n / 2] = std::sqrt(lambda[n / 2]) * g.gaussian();
        for (std::size_t k = 1; k < n / 2; ++k) {
            const double scale = std::sqrt(0.5 * lambda[k]);
            const double re = scale * g.gaussian();
            const double im = scale * g.gaussian();
            buf[k] = {re, im};
            buf[n - k] = {re, -im};
        }
        ws->fft.inverse(buf.data());
        double* row = sample.increments.data() + j * n;
        for (std::size_t i = 0; i < n; ++i) row[i] = buf[i].real() * inv_sqrt_n;
    }
    return sample;
}

// Joint two-point path (X_s(0), X_s(D)) on the dt-grid. Increments are exact
// bivariate Gaussians with variance dt and covariance K_layer(s, s+dt, D).
struct TwoPointPathSample {
    double delta = 0.0;
    double dt = 0.0;
    std::vector<double> x;  // X at gap 0, length steps+1, x[0] = 0
    std::vector<double> y;  // X at gap delta
};

inline TwoPointPathSample sample_two_point(const ScaleCovariance& cov, double delta, double dt,
                                           double horizon, std::uint64_t key) {
    if (delta <= 0.0 || delta > 1.0)
        throw std::invalid_argument("sample_two_point: need 0 < delta <= 1");
    if (dt <= 0.0 || dt > 0.01) throw std::invalid_argument("sample_two_point: need 0 < dt <= 0.01");
    const double steps_real = horizon / dt;
    const auto steps = static_cast<std::size_t>(std::llround(steps_real));
    if (std::abs(steps_real - static_cast<double>(steps)) > 1e-6)
        throw std::invalid_argument("sample_two_point: horizon must be a multiple of dt");

    TwoPointPathSample out;
    out.delta = delta;
    out.dt = dt;
    out.x.assign(steps + 1, 0.0);
    out.y.assign(steps + 1, 0.0);
    RngStream g(key);
    const double sqrt_dt = std::sqrt(dt);
    for (std::size_t k = 0; k < steps; ++k) {
        const double s = static_cast<double>(k) * dt;
        const double c = K_layer(cov, s, s + dt, delta);
        if (c > dt * (1.0 + 1e-9) || c < -1e-12)
            throw std::runtime_error("sample_two_point: step covariance outside [0, dt]");
        const double l21 = c / sqrt_dt;
        const double l22 = std::sqrt(std::max(dt - l21 * l21, 0.0));
        const double z1 = g.gaussian();
        const double z2 = g.gaussian();
        out.x[k + 1] = out.x[k] + sqrt_dt * z1;
        out.y[k + 1] = out.y[k] + l21 * z1 + l22 * z2;
    }
    return out;
}

// Var(Z_s) in the two-point decomposition: s - int_0^s (d/du K_u(D))^2 du,
// with d/du K_u(D) = k(e^u D).
inline double residual_variance(const ScaleCovariance& cov, double delta, double s) {
    if (s < 0.0) throw std::invalid_argument("residual_variance: s must be >= 0");
    if (s == 0.0) return 0.0;
    const double d = std::abs(delta);
    double integral;
    if (d == 0.0) {
        integral = s;
    } else {
        const double hi = std::min(s, std::max(-std::log(d), 0.0));
        auto f = [&](double u) {
            const double v = cov.kernel.eval(std::exp(u) * d);
            return v * v;
        };
        integral = hi > 0.0 ? integrate(f, 0.0, hi, cov.quadrature_tol) : 0.0;
    }
    const double r = s - integral;
    if (r < -1e-8) throw std::runtime_error("residual_variance: negative variance");
    return std::max(r, 0.0);
}

// --- debug dump -------------------------------------------------------------
// Header: magic "GMCF", version u32, N u64, L u64, seed u64, kernel name
// (16 bytes, zero padded), L+1 time levels, then row-major float64 increments.
// Little-endian throughout.

inline void dump_field(const std::string& path, const LayeredFieldSample& sample,
                       KernelName kernel, std::uint64_t seed) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("dump_field: cannot open " + path);
    auto put = [&](const void* p, std::size_t bytes) {
        if (std::fwrite(p, 1, bytes, f) != bytes) {
            std::fclose(f);
            throw std::runtime_error("dump_field: short write to " + path);
        }
    };
    const char magic[4] = {'G', 'M', 'C', 'F'};
    const std::uint32_t version = 1;
    const std::uint64_t n = sample.n_points;
    const std::uint64_t layers = sample.grid.layer_count();
    put(magic, 4);
    put(&version, 4);
    put(&n, 8);
    put(&layers, 8);
    put(&seed, 8);
    char name[16] = {};
    std::snprintf(name, sizeof(name), "%s", to_string(kernel).c_str());
    put(name, 16);
    put(sample.grid.levels.data(), sample.grid.levels.size() * 8);
    put(sample.increments.data(), sample.increments.size() * 8);
    std::fclose(f);
}

struct FieldDump {
    LayeredFieldSample sample;
    std::string kernel_name;
    std::uint64_t seed = 0;
};

inline FieldDump load_field(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_field: cannot open " + path);
    auto get = [&](void* p, std::size_t bytes) {
        if (std::fread(p, 1, bytes, f) != bytes) {
            std::fclose(f);
            throw std::runtime_error("load_field: truncated file " + path);
        }
    };
    char magic[4];
    std::uint32_t version;
    std::uint64_t n, layers, seed;
    char name[16];
    get(magic, 4);
    if (std::memcmp(magic, "GMCF", 4) != 0) {
        std::fclose(f);
        throw std::runtime_error("load_field: bad magic in " + path);
    }
    get(&version, 4);
    get(&n, 8);
    get(&layers, 8);
    get(&seed, 8);
    get(name, 16);
    std::vector<double> levels(layers + 1);
    get(levels.data(), levels.size() * 8);
    std::vector<double> inc(layers * n);
    get(inc.data(), inc.size() * 8);
    std::fclose(f);
    FieldDump out{LayeredFieldSample{TimeGrid(std::move(levels)), static_cast<std::size_t>(n),
                                     std::move(inc)},
                  std::string(name), seed};
    return out;
}

}  // namespace gmcf
