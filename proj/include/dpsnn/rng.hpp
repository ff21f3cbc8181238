#pragma once

// Counter-based random streams. Every random decision in the simulator draws
// from a stream keyed by (master seed, domain, up to three 32-bit words), so
// the same decision gets the same numbers whichever rank makes it.

#include <array>
#include <cstdint>
#include <limits>

namespace dpsnn {

/// Philox4x32 with 10 rounds (Salmon et al. 2011).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key)
    {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

enum class StreamDomain : std::uint32_t {
    Connectivity = 1,
    External = 2,
    MuaNoise = 3,
    Initial = 4,
    Test = 0xffff,
};

/// A keyed Philox stream usable as a UniformRandomBitGenerator with the
/// standard <random> distributions. Words a, b, c occupy the first three
/// counter words; the fourth counts blocks within the stream.
class KeyedStream {
public:
    using result_type = std::uint32_t;

    KeyedStream(std::uint64_t seed, StreamDomain domain, std::uint32_t a, std::uint32_t b = 0,
                std::uint32_t c = 0)
        : key_{static_cast<std::uint32_t>(seed),
               static_cast<std::uint32_t>(seed >> 32) ^
                   (static_cast<std::uint32_t>(domain) * 0x9E3779B9u)},
          ctr_{a, b, c, 0}
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        if (used_ == 4) {
            buf_ = Philox4x32::block(ctr_, key_);
            ++ctr_[3];
            used_ = 0;
        }
        return buf_[used_++];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform()
    {
        const std::uint64_t hi = (*this)() >> 5;
        const std::uint64_t lo = (*this)() >> 6;
        return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
    }

private:
    Philox4x32::Key key_;
    Philox4x32::Counter ctr_;
    Philox4x32::Counter buf_{};
    int used_ = 4;
};

}  // namespace dpsnn
