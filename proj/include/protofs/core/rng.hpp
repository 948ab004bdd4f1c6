#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace protofs {

/// Counter-based 64-bit generator. Output i is a pure function of (key, i), so
/// streams can be split and indexed in O(1) with identical results on every
/// platform. Distributions are implemented here rather than through <random>
/// because the standard distributions are not specified bit-for-bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

    /// Value at an arbitrary position without advancing.
    std::uint64_t at(std::uint64_t position) const;
    std::uint64_t next_u64();

    /// Independent child stream, deterministic in (key, index).
    Rng split(std::uint64_t index) const;

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t uniform_below(std::uint64_t bound);
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    /// Standard normal via Box-Muller; pairs are produced cos-first then sin.
    double normal();

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    /// k distinct values from [0, n), in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

/// Stable 64-bit seed derivation, e.g. derive_seed(master, stage_index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

} // namespace protofs
