#include "hdqt/rng.hpp"

#include <cmath>
#include <numbers>

#include "hdqt/errors.hpp"

namespace hdqt {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// SplitMix64 finalizer, used only to derive child keys.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

Rng::Rng(std::uint64_t seed) : key_(mix64(seed)) {}

std::uint64_t Rng::next_u64() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const auto out = philox4x32_10(
        {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u},
        {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
    ++counter_;
    spare_ = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    has_spare_ = true;
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

double Rng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) {
        throw ParameterError("Rng::below: empty range");
    }
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

Rng Rng::split(std::string_view label) const {
    return Rng(mix64(key_ ^ mix64(fnv1a(label))), true);
}

Rng Rng::split(std::uint64_t label) const {
    return Rng(mix64(key_ ^ mix64(label ^ 0x5851F42D4C957F2Dull)), true);
}

double uniform(Rng& rng, double lo, double hi) {
    if (!(lo < hi)) {
        throw ParameterError("uniform: requires lo < hi");
    }
    return lo + (hi - lo) * rng.next_unit();
}

double gaussian(Rng& rng, double mean, double std) {
    if (!(std >= 0.0)) {
        throw ParameterError("gaussian: std must be non-negative");
    }
    const double u1 = 1.0 - rng.next_unit();  // (0, 1]
    const double u2 = rng.next_unit();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + std * z;
}

}  // namespace hdqt
