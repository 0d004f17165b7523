#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gmcf {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 transform for power-of-two sizes.
// forward() applies sum_j a[j] e^{-2pi i jk/N}; inverse() applies the +i sign
// convention and is unnormalized (divide by N to invert a forward transform).
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        if (!is_pow2(n)) throw std::invalid_argument("Fft: size must be a power of two");
        rev_.resize(n);
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n) ++log2n;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
            rev_[i] = r;
        }
        roots_.resize(n / 2);
        const double two_pi = 6.283185307179586476925286766559;
        for (std::size_t k = 0; k < n / 2; ++k) {
            double ang = -two_pi * static_cast<double>(k) / static_cast<double>(n);
            roots_[k] = {std::cos(ang), std::sin(ang)};
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::complex<double>* a) const { transform(a, false); }
    void inverse(std::complex<double>* a) const { transform(a, true); }

    void forward(std::vector<std::complex<double>>& a) const { check(a); transform(a.data(), false); }
    void inverse(std::vector<std::complex<double>>& a) const { check(a); transform(a.data(), true); }

private:
    void check(const std::vector<std::complex<double>>& a) const {
        if (a.size() != n_) throw std::invalid_argument("Fft: buffer size mismatch");
    }

    void transform(std::complex<double>* a, bool inv) const {
        const std::size_t n = n_;
        for (std::size_t i = 0; i < n; ++i)
            if (rev_[i] > i) std::swap(a[i], a[rev_[i]]);
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t half = len >> 1;
            const std::size_t stride = n / len;
            for (std::size_t base = 0; base < n; base += len) {
                for (std::size_t k = 0; k < half; ++k) {
                    std::complex<double> w = roots_[k * stride];
                    if (inv) w = std::conj(w);
                    std::complex<double> u = a[base + k];
                    std::complex<double> v = a[base + k + half] * w;
                    a[base + k] = u + v;
                    a[base + k + half] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<std::size_t> rev_;
    std::vector<std::complex<double>> roots_;
};

}  // namespace gmcf
