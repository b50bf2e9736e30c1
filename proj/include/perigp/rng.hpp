#ifndef PERIGP_RNG_HPP
#define PERIGP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace perigp {

// Self-contained PRNG (xoshiro256++ seeded through splitmix64). The
// standard <random> distributions are implementation-defined, so runs
// would not reproduce across standard libraries; everything random in
// this project goes through this class instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1), 53 bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller; consumes exactly two uniforms per call.
    double gaussian(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform01();
        const double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t state_[4];
};

// Deterministic seed derivation. Streams (training run, each validation
// grid point, each experiment cell) get seeds that depend only on the
// master seed and a label, never on execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = base ^ 0xA0761D6478BD642Full;
    for (const char c : tag) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h = Rng::splitmix64(h);
    }
    return Rng::splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t index) {
    std::uint64_t h = derive_seed(base, tag) ^ (index * 0x9E3779B97F4A7C15ull + 1);
    return Rng::splitmix64(h);
}

}  // namespace perigp

#endif  // PERIGP_RNG_HPP
