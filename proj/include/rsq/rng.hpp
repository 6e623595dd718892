#pragma once

#include <cmath>
#include <cstdint>

namespace rsq {

/// Philox4x32-10 counter-based generator. Stateless: every draw is a pure
/// function of (key, counter), so paths can be generated in any order or on
/// any thread with identical results, and a stream can be replayed from an
/// arbitrary position.
struct Philox4x32 {
    struct Block {
        std::uint32_t v[4];
    };

    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static Block generate(std::uint64_t key, std::uint64_t ctr_hi, std::uint64_t ctr_lo) {
        std::uint32_t c0 = static_cast<std::uint32_t>(ctr_lo);
        std::uint32_t c1 = static_cast<std::uint32_t>(ctr_lo >> 32);
        std::uint32_t c2 = static_cast<std::uint32_t>(ctr_hi);
        std::uint32_t c3 = static_cast<std::uint32_t>(ctr_hi >> 32);
        std::uint32_t k0 = static_cast<std::uint32_t>(key);
        std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
        for (int round = 0; round < 10; ++round) {
            std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c0;
            std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c2;
            std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            std::uint32_t n0 = hi1 ^ c1 ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c3 ^ k1;
            std::uint32_t n3 = lo0;
            c0 = n0;
            c1 = n1;
            c2 = n2;
            c3 = n3;
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        return Block{{c0, c1, c2, c3}};
    }
};

/// splitmix64 finalizer, used to derive stream keys from a user seed.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream_id) {
    return mix64(seed ^ mix64(stream_id));
}

/// Uniform in (0,1): offset by half an ulp of the 32-bit lattice so that the
/// endpoints are never hit (safe under log()).
inline double u32_to_unit(std::uint32_t u) {
    return (static_cast<double>(u) + 0.5) * (1.0 / 4294967296.0);
}

struct UnitPair {
    double u1, u2;
};

inline UnitPair uniform_pair(std::uint64_t key, std::uint64_t path, std::uint64_t step) {
    auto b = Philox4x32::generate(key, path, step);
    return {u32_to_unit(b.v[0]), u32_to_unit(b.v[1])};
}

/// One standard normal per (path, step) via Box-Muller.
inline double standard_normal(std::uint64_t key, std::uint64_t path, std::uint64_t step) {
    auto u = uniform_pair(key, path, step);
    return std::sqrt(-2.0 * std::log(u.u1)) * std::cos(6.283185307179586476925286766559 * u.u2);
}

/// Uniform draw with an extra counter dimension, for strategies that need
/// more than two variates per step.
inline double uniform_at(std::uint64_t key, std::uint64_t path, std::uint64_t step,
                         std::uint32_t slot) {
    std::uint64_t ctr_hi = path;
    std::uint64_t ctr_lo = (step << 16) | (slot >> 2);
    auto b = Philox4x32::generate(key, ctr_hi, ctr_lo);
    return u32_to_unit(b.v[slot & 3u]);
}

}  // namespace rsq
