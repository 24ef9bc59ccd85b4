#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sgtn {

/// Seeded generator with a platform-independent normal draw (Box-Muller over
/// raw mt19937_64 output) and deterministic stream splitting.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed), seed_hash_(seed) {}

    std::uint64_t raw() { return gen_(); }

    /// Uniform in (0, 1).
    double uniform() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Derive an independent child stream; parent state is unaffected.
    Rng split(std::uint64_t stream) const {
        std::uint64_t h = seed_hash_ ^ (stream + 0x9e3779b97f4a7c15ULL);
        h ^= h >> 30;
        h *= 0xbf58476d1ce4e5b9ULL;
        h ^= h >> 27;
        h *= 0x94d049bb133111ebULL;
        h ^= h >> 31;
        return Rng(h, true);
    }

private:
    Rng(std::uint64_t seed, bool) : gen_(seed), seed_hash_(seed) {}

    std::mt19937_64 gen_;
    std::uint64_t seed_hash_ = 0;
};

} // namespace sgtn
