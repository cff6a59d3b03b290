#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace debias {

// Splittable counter-style PRNG (splitmix64 core). Streams derived from
// (seed, domain, index) are independent of thread schedule and platform,
// which is what keeps parallel stages byte-reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t state) : state_(state) {}

    static std::uint64_t mix(std::uint64_t x) {
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ULL;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return x;
    }

    static Rng stream(std::uint64_t seed, std::uint64_t domain, std::uint64_t index) {
        std::uint64_t s = mix(seed + 0x9e3779b97f4a7c15ULL);
        s = mix(s ^ (domain + 0x9e3779b97f4a7c15ULL));
        s = mix(s ^ (index + 0x9e3779b97f4a7c15ULL));
        return Rng(s);
    }

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), n >= 1. Multiply-shift map; bias is
    // negligible for the corpus sizes involved here.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, one draw per call so stream positions stay predictable.
    double normal(double mean, double sigma) {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        constexpr double two_pi = 6.28318530717958647692528676655900577;
        return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // Fisher-Yates; std::shuffle is implementation-defined, this is not.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

} // namespace debias
