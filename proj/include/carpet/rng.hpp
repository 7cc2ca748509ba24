#pragma once

#include <cstdint>
#include <random>

namespace carpet {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for stream `index` under `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// mt19937_64 with platform-independent conversions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    /// Uniform integer in [lo, hi].
    long long between(long long lo, long long hi);
    /// Index i with probability w[i] (weights sum to 1).
    template <class Vec>
    int categorical(const Vec& w) {
        double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < w.size(); ++i) {
            acc += w[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(w.size()) - 1;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace carpet
