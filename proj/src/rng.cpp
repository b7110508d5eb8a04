#include "spingap/rng.hpp"

#include <cmath>

namespace spingap {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
}

inline std::array<std::uint32_t, 4> philox_block(std::uint64_t key64, std::uint64_t hi_ctr,
                                                 std::uint64_t lo_ctr) {
    return Philox4x32::block(
        {static_cast<std::uint32_t>(lo_ctr), static_cast<std::uint32_t>(lo_ctr >> 32),
         static_cast<std::uint32_t>(hi_ctr), static_cast<std::uint32_t>(hi_ctr >> 32)},
        {static_cast<std::uint32_t>(key64), static_cast<std::uint32_t>(key64 >> 32)});
}

inline std::uint64_t join64(std::uint32_t hi, std::uint32_t lo) {
    return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

// (0,1) open on both ends; safe as a log argument.
inline double to_open_unit(std::uint64_t u) {
    return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
}

// Key domain for derive_seed, distinct from the raw-draw domain.
constexpr std::uint64_t kDeriveDomain = 0x9E3779B97F4A7C15ull;

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> c,
                                               std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, c[0], hi0, lo0);
        mulhilo(kPhiloxM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

double gaussian_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    auto x = philox_block(seed, stream, index);
    double u1 = to_open_unit(join64(x[0], x[1]));
    double u2 = to_open_unit(join64(x[2], x[3]));
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

double uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    auto x = philox_block(seed, stream, index);
    return static_cast<double>(join64(x[0], x[1]) >> 11) * 0x1.0p-53;
}

std::uint64_t bits_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    auto x = philox_block(seed, stream, index);
    return join64(x[0], x[1]);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    auto x = philox_block(seed ^ kDeriveDomain, a, b);
    return join64(x[0], x[1]) ^ (join64(x[2], x[3]) * 0xFF51AFD7ED558CCDull);
}

std::uint32_t RandomStream::next_below(std::uint32_t n) {
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t bound = (UINT64_MAX / n) * static_cast<std::uint64_t>(n);
    std::uint64_t x;
    do {
        x = next_bits();
    } while (x >= bound);
    return static_cast<std::uint32_t>(x % n);
}

}  // namespace spingap
