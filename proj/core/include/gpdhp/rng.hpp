#pragma once

#include <cstdint>
#include <limits>

namespace gpdhp {

// SplitMix64 (Steele, Lea & Flood 2014): output k is a fixed mix of
// seed + k * 0x9E3779B97F4A7C15, so streams are reproducible bit-for-bit on
// every platform. All randomness in the library flows through this engine.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Independent stream derived from this seed, e.g. one per replicate.
    [[nodiscard]] static SplitMix64 derive(std::uint64_t seed, std::uint64_t stream) noexcept {
        SplitMix64 mixer(seed ^ (stream * 0xD1B54A32D192ED03ULL));
        return SplitMix64(mixer());
    }

    // Uniform double in [0, 1) from the top 53 bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

} // namespace gpdhp
