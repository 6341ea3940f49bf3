#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fracmfg {

/// SplitMix64 stream; used to expand seeds into generator state.
struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}
    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

/// Derive an independent per-stream seed from a master seed and a stream
/// index (counter scheme: particle i always gets the same stream regardless
/// of thread schedule).
inline uint64_t derive_stream_seed(uint64_t master, uint64_t stream) {
    SplitMix64 sm(master ^ (0x9E3779B97F4A7C15ULL * (stream + 0x632BE59BD9B4E019ULL)));
    uint64_t s = sm.next();
    return s ^ sm.next();
}

/// xoshiro256++ generator with explicit distribution transforms so output
/// bytes depend only on the seed, never on the standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// uniform on (0,1] -- safe under log()
    double uniform_oc() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }
    /// uniform on (0,1) -- both endpoints excluded
    double uniform_oo() { return ((next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double exponential() { return -std::log(uniform_oc()); }

    /// Box-Muller without cached pair so draw order is transparent.
    double normal() {
        double u1 = uniform_oc();
        double u2 = uniform_oo();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::array<uint64_t, 4> s_{};
};

} // namespace fracmfg
