#pragma once

#include <cmath>
#include <cstdint>

namespace gmcf {

// SplitMix64 step: full-avalanche counter generator.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    std::uint64_t s = h + 0x9e3779b97f4a7c15ULL * (v + 1);
    return splitmix64_next(s);
}

// Stream key for (global seed, replica, layer). Streams are decoupled from
// sampling order, so replicas can run on any worker in any order.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replica, std::uint64_t layer = 0) {
    return hash_combine(hash_combine(seed, replica), layer);
}

class RngStream {
public:
    explicit RngStream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    // Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Marsaglia polar method; pairs are cached so draws stay cheap.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gmcf
