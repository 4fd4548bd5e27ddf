#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace ccrnn {

/// SplitMix64 finalizer. Used to expand seeds and to derive sub-seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Purposes that draw from independent streams of one experiment seed.
enum class SeedStream : std::uint64_t { init = 1, split = 2, sample = 3 };

/**
 * Derive an independent seed for one purpose from the experiment seed:
 *
 *     sub = splitmix64(seed XOR (tag * 0x9E3779B97F4A7C15))
 *
 * where `tag` is the numeric value of the SeedStream.
 */
constexpr std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) noexcept
{
    std::uint64_t s = seed ^ (static_cast<std::uint64_t>(stream) * 0x9E3779B97F4A7C15ULL);
    return splitmix64(s);
}

/**
 * xoshiro256** (Blackman & Vigna). Four 64-bit words of state, seeded by four
 * successive SplitMix64 outputs of the seed. The update is
 *
 *     result = rotl(s1 * 5, 7) * 9
 *     t = s1 << 17
 *     s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
 *
 * Only integer arithmetic is involved, so the stream is identical on every
 * platform. Doubles are formed from the top 53 bits.
 */
class Rng {
public:
    using result_type = std::uint64_t;
    using State = std::array<std::uint64_t, 4>;

    explicit constexpr Rng(std::uint64_t seed = 0) noexcept
    {
        std::uint64_t sm = seed;
        for (auto& w : s_)
            w = splitmix64(sm);
    }

    static constexpr Rng from_state(const State& state) noexcept
    {
        Rng r;
        r.s_ = state;
        return r;
    }

    constexpr const State& state() const noexcept { return s_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept { return next(); }

    constexpr std::uint64_t next() noexcept
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    constexpr double uniform() noexcept
    {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), by rejection so that every value is equally likely. n > 0.
    constexpr std::uint64_t uniform_index(std::uint64_t n) noexcept
    {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold)
                return r % n;
        }
    }

    friend constexpr bool operator==(const Rng&, const Rng&) = default;

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    State s_{};
};

} // namespace ccrnn
