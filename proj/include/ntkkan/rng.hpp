#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ntkkan {

/// Deterministic random stream. mt19937_64 has a standardized bit sequence,
/// and the uniform/normal transforms below avoid the implementation-defined
/// std::*_distribution adaptors, so draws are reproducible across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform on [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Uniform on (a, b]; the open end excludes interval starts such as t = 0.
    double uniform_open_low(double a, double b) {
        return b - (b - a) * uniform();
    }

    /// Standard normal via Box-Muller, cached in pairs.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t next_u64() { return gen_(); }

    /// Independent child stream; distinct tags give distinct streams.
    Rng fork(std::uint64_t tag) {
        return Rng(gen_() ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ntkkan
