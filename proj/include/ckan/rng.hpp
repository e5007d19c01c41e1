#pragma once

#include <cstdint>
#include <vector>

namespace ckan {

/// Deterministic random stream: xoshiro256** (Blackman/Vigna), state seeded
/// by running SplitMix64 over the 64-bit seed. The generator is implemented
/// here rather than taken from <random> because the standard distributions
/// are implementation-defined; this one yields the same sequence on every
/// platform. Integer and uniform-double draws are bit-portable; normal draws
/// additionally go through libm log/sqrt.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double();

    /// Uniform integer in [0, n). Unbiased (rejection sampling). n must be > 0.
    std::uint64_t next_below(std::uint64_t n);

    /// Uniform in [lo, hi).
    double next_uniform(double lo, double hi);

    /// Standard normal via the Marsaglia polar method (second draw cached).
    double next_normal();

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    /// k distinct indices drawn uniformly from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ckan
