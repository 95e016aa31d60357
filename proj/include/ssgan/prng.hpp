#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "ssgan/errors.hpp"
#include "ssgan/tensor.hpp"

namespace ssgan {

// Splittable 64-bit mixing generator (splitmix64). Owned by the artifact so
// that a given seed produces the same draw sequence on every platform; the
// platform std::mt19937 stream is never used.
class Prng {
public:
    static constexpr const char* algorithm_id = "splitmix64";

    explicit Prng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    // Independent child stream keyed by (seed, salt).
    Prng split(std::uint64_t salt) const {
        return Prng(mix(state_ ^ mix(salt + 0x9E3779B97F4A7C15ull)));
    }

    // Uniform double in [0, 1), 53 significant bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::int64_t next_index(std::int64_t n) {
        return static_cast<std::int64_t>(next_double() * static_cast<double>(n));
    }

    template <typename S>
    S uniform(S lo, S hi) {
        if (!(lo < hi)) {
            throw ConfigError("uniform range requires lo < hi, got [" + std::to_string(lo) +
                              ", " + std::to_string(hi) + ")");
        }
        double u = next_double();
        S v = static_cast<S>(static_cast<double>(lo) +
                             (static_cast<double>(hi) - static_cast<double>(lo)) * u);
        if (v >= hi) v = std::nextafter(hi, lo); // narrowing cast may round up to hi
        if (v < lo) v = lo;
        return v;
    }

    // Box-Muller over the uniform stream; one draw per call.
    template <typename S>
    S normal(S mean, S stddev) {
        double u1 = 1.0 - next_double(); // (0, 1], keeps log finite
        double u2 = next_double();
        double n = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return static_cast<S>(static_cast<double>(mean) + static_cast<double>(stddev) * n);
    }

    std::uint64_t state() const { return state_; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

// Tensor of independent uniform draws in [lo, hi); advances the prng state.
template <typename S>
Tensor<S> prng_uniform(Prng& prng, Shape shape, S lo, S hi) {
    if (!(lo < hi)) {
        throw ConfigError("prng_uniform requires lo < hi");
    }
    Tensor<S> t(shape);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = prng.uniform(lo, hi);
    return t;
}

template <typename S>
Tensor<S> prng_normal(Prng& prng, Shape shape, S mean, S stddev) {
    Tensor<S> t(shape);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = prng.normal(mean, stddev);
    return t;
}

} // namespace ssgan
