#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tacl {

// Error taxonomy. The CLI maps ConfigError to exit code 2, everything else to 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct ValueError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic RNG. All distributions are implemented by hand so that
// streams are bit-identical across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // An independent stream keyed by (seed, label, a, b). Adding new streams
    // never perturbs existing ones.
    static Rng derive(uint64_t seed, std::string_view label, uint64_t a = 0, uint64_t b = 0) {
        uint64_t h = fnv1a64(label);
        h = splitmix64(h ^ splitmix64(seed));
        h = splitmix64(h ^ splitmix64(a ^ 0x517cc1b727220a95ull));
        h = splitmix64(h ^ splitmix64(b ^ 0x2545f4914f6cdd1dull));
        return Rng(h);
    }

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is < 2^-53 for any n that fits
    // in an int and is irrelevant for the statistics asserted in tests.
    int uniform_int(int n) {
        if (n <= 0) throw ValueError("Rng::uniform_int: n must be positive");
        return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, no caching: each call consumes exactly two draws.
    double normal() {
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Standard normal conditioned on |z| <= trunc, by rejection.
    double truncated_normal(double trunc) {
        for (;;) {
            double z = normal();
            if (std::abs(z) <= trunc) return z;
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace tacl
