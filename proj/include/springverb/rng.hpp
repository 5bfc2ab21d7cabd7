#pragma once

#include <cstdint>
#include <vector>

#include "springverb/common.hpp"

namespace springverb {

// Deterministic 64-bit generator (xoshiro256**, seeded via splitmix64).
// Used everywhere randomness is needed so results do not depend on the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    real uniform();

    // Uniform in [lo, hi).
    real uniform(real lo, real hi);

    // Unbiased integer in [0, n), n > 0.
    std::uint64_t below(std::uint64_t n);

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Serializable internal state.
    std::vector<std::uint64_t> state() const;
    void set_state(const std::vector<std::uint64_t>& s);

private:
    std::uint64_t s_[4];
};

}  // namespace springverb
