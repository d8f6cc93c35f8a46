// Copyright 2026 The bttf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

namespace bttf::num {

/// Counter-based generator: the i-th draw of stream s is mix(seed, s, i).
/// Splitting is free (derive a new stream id) and the output sequence is
/// fully specified here, so runs reproduce bitwise on any platform.
/// std distributions are avoided because their algorithms are
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    /// Independent generator for a named sub-task.
    Rng split(std::uint64_t stream) const noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Standard normal (Box-Muller, one value per call).
    double normal() noexcept;
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;

    template <class T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace bttf::num
