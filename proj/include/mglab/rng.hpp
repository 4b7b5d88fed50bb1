#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace mglab {

// Deterministic random stream with named sub-streams.  A master seed plus a
// stream label is hashed into the seed of an independent mt19937_64, so
// parallel consumers (environment draws, exploration, opponents) never share
// state.  Uniform and Gaussian variates are generated explicitly rather than
// through std::*_distribution, keeping draw sequences stable across standard
// library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix(seed)), seed_(seed) {}

    Rng substream(std::string_view name) const {
        std::uint64_t h = 1469598103934665603ull;  // FNV-1a
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        return Rng(seed_ ^ h);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    int next_int(int n) {
        return static_cast<int>(next_double() * n);
    }

    bool next_bernoulli(double p) { return next_double() < p; }

    // Standard normal via the Marsaglia polar method (one spare cached).
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer; decorrelates adjacent seeds
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
    std::uint64_t seed_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mglab
