// rng.hpp — counter-based RNG: draw (seed, counter) -> value with no
// sequential state, so noise is reproducible under any parallel schedule.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace asl {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct CounterRng {
    std::uint64_t seed = 0;

    std::uint64_t bits(std::uint64_t counter) const
    {
        return splitmix64(splitmix64(seed) ^ counter);
    }

    // uniform in (0, 1]
    double uniform(std::uint64_t counter) const
    {
        return (static_cast<double>(bits(counter) >> 11) + 1.0) * 0x1.0p-53;
    }

    // standard normal pair via Box-Muller from counters 2c, 2c+1
    void normal_pair(std::uint64_t counter, double &a, double &b) const
    {
        const double u1 = uniform(2 * counter);
        const double u2 = uniform(2 * counter + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * std::numbers::pi * u2;
        a = r * std::cos(phi);
        b = r * std::sin(phi);
    }

    double normal(std::uint64_t counter) const
    {
        double a, b;
        normal_pair(counter, a, b);
        return a;
    }
};

} // namespace asl
