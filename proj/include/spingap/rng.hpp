#pragma once

#include <array>
#include <cstdint>

namespace spingap {

// Philox4x32-10 counter-based generator (Salmon et al. 2011). A (key, counter)
// pair maps to 128 output bits; evaluation order is irrelevant, so draws are
// reproducible under any parallel schedule and any thread count.
struct Philox4x32 {
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                              std::array<std::uint32_t, 2> key);
};

/// One standard Gaussian, keyed by (seed, stream, index).
double gaussian_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Uniform in [0,1), keyed by (seed, stream, index).
double uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// 64 uniform bits, keyed by (seed, stream, index).
std::uint64_t bits_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Stable sub-seed derivation (ensemble realizations, chain streams).
// Uses a key domain separated from the draw functions above.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Sequential view over the keyed generator, used by the Monte Carlo chains.
// State is just (seed, stream, index); copying is cheap and exact.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream) {}

    std::uint64_t next_bits() { return bits_at(seed_, stream_, index_++); }
    double next_uniform() { return uniform_at(seed_, stream_, index_++); }
    double next_gaussian() { return gaussian_at(seed_, stream_, index_++); }

    /// Unbiased draw from {0, ..., n-1}.
    std::uint32_t next_below(std::uint32_t n);

    std::uint64_t index() const { return index_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t index_ = 0;
};

}  // namespace spingap
