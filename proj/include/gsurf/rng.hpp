#pragma once

// Counter-based seeding. A Philox4x32-10 block cipher turns (master seed,
// stream, index) into a 64-bit tag; the tag seeds a xoshiro256++ engine for
// bulk normals, and keyed Philox calls supply random-access uniforms.

#include <array>
#include <bit>
#include <cstdint>
#include <limits>
#include <string_view>

namespace gsurf {

inline constexpr std::string_view kSeedScheme =
    "philox4x32-10(master,stream,index)->tag; xoshiro256++(splitmix64(tag)); ziggurat normals";

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

constexpr PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept {
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += w0;
            key[1] += w1;
        }
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Tag for path `index` of stream `stream` under `master`.
constexpr std::uint64_t derive_tag(std::uint64_t master, std::uint64_t stream,
                                   std::uint64_t index) noexcept {
    const PhiloxKey key{static_cast<std::uint32_t>(master),
                        static_cast<std::uint32_t>(master >> 32)};
    const PhiloxCounter ctr{static_cast<std::uint32_t>(index),
                            static_cast<std::uint32_t>(index >> 32),
                            static_cast<std::uint32_t>(stream),
                            static_cast<std::uint32_t>(stream >> 32)};
    const auto out = philox4x32_10(ctr, key);
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

// Uniform on the open interval (0,1) at position (counter, lane) of the
// stream keyed by `tag`.
constexpr double uniform_at(std::uint64_t tag, std::uint64_t counter,
                            std::uint32_t lane = 0) noexcept {
    const PhiloxKey key{static_cast<std::uint32_t>(tag),
                        static_cast<std::uint32_t>(tag >> 32)};
    const PhiloxCounter ctr{static_cast<std::uint32_t>(counter),
                            static_cast<std::uint32_t>(counter >> 32), lane,
                            0x5EEDC0DEu};
    const auto out = philox4x32_10(ctr, key);
    const std::uint64_t bits = ((static_cast<std::uint64_t>(out[1]) << 32) | out[0]) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

class Xoshiro256pp {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept {
        const std::uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = std::rotl(s_[3], 45);
        return result;
    }

    // Uniform on (0,1).
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::array<std::uint64_t, 4> s_{};
};

// Stream identifiers used across modules. Distinct streams never share tags.
namespace streams {
inline constexpr std::uint64_t kPrimary = 1;
inline constexpr std::uint64_t kSecondary = 2;
inline constexpr std::uint64_t kMeander = 3;
inline constexpr std::uint64_t kBessel = 4;
inline constexpr std::uint64_t kRejection = 5;
inline constexpr std::uint64_t kGirsanov = 6;
}  // namespace streams

}  // namespace gsurf
