#pragma once

#include <cmath>
#include <cstdint>

#include "nhw/types.hpp"

namespace nhw {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

/// Counter-based stream: the n-th draw is a pure function of (key, n), so
/// per-entry streams keyed by (seed, row, col) can be generated in any order.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}
    CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0)
        : key_(mix_key(mix_key(mix_key(seed, a), b), c)) {}

    std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

    /// Uniform on (0,1), never exactly 0 or 1.
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

    /// Standard complex normal, E|x|^2 = 1.
    cplx complex_normal() {
        const double a = normal();
        const double b = normal();
        return {a * M_SQRT1_2, b * M_SQRT1_2};
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Per-sample seed for Monte Carlo loops.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag = 0) {
    return mix_key(mix_key(seed, tag), index);
}

inline CVector random_complex_unit(std::size_t n, CounterRng& rng) {
    CVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.complex_normal();
    return v / v.norm();
}

inline RVector random_real_unit(std::size_t n, CounterRng& rng) {
    RVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.normal();
    return v / v.norm();
}

}  // namespace nhw
