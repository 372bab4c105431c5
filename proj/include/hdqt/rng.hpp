#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace hdqt {

/// Philox4x32-10 block function: maps (counter, key) to four 32-bit words.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based random stream.
///
/// Draw i of a stream is a pure function of (key, i), so a stream can be
/// forked into children by label without touching the parent's position.
/// Children derive their key from the parent key and the label only, which
/// makes split order irrelevant. An Rng is not shared across threads; hand
/// each worker its own child.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return key_; }
    std::uint64_t position() const { return counter_; }

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double next_unit();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    Rng split(std::string_view label) const;
    Rng split(std::uint64_t label) const;

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    Rng(std::uint64_t key, bool) : key_(key) {}

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t spare_ = 0;
    bool has_spare_ = false;
};

/// Uniform draw in [lo, hi); throws ParameterError unless lo < hi.
double uniform(Rng& rng, double lo, double hi);
/// Normal draw; throws ParameterError for std < 0. std == 0 yields mean exactly.
double gaussian(Rng& rng, double mean, double std);

}  // namespace hdqt
