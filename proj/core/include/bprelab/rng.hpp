#pragma once

#include <cstdint>
#include <limits>

namespace bprelab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++, seeded via splitmix64. Self-contained so that streams are
// identical across standard libraries and across runs.
class Rng {
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 1) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() {
        return std::numeric_limits<std::uint64_t>::max();
    }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n) by rejection; exact for any n >= 1.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t v;
        do {
            v = (*this)();
        } while (v >= limit);
        return v % n;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

// Tags keep replica streams of different experiment stages decoupled even
// when they share a root seed and replica index.
enum class StreamKind : std::uint64_t {
    env_sequence = 0x01,
    offspring = 0x02,
    walk = 0x03,
    sigma = 0x04,
    value_function = 0x05,
    doob = 0x06,
    survival = 0x07,
    scaled_population = 0x08,
    kesten_stigum = 0x09,
    local_limit = 0x0a,
    calibrate = 0x0b,
    occupation = 0x0c,
    generic = 0xff,
};

// Derived stream for replica r of a given stage. Only (root, kind, r)
// enter the derivation, so results never depend on the worker layout.
inline Rng derive_stream(std::uint64_t root, StreamKind kind, std::uint64_t r) {
    std::uint64_t sm = root;
    std::uint64_t a = splitmix64(sm) ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(kind) + 1));
    std::uint64_t b = a + 0xd1b54a32d192ed03ULL * (r + 1);
    std::uint64_t sm2 = b;
    return Rng(splitmix64(sm2));
}

}  // namespace bprelab
