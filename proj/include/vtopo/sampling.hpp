#pragma once

// Seeded, platform-independent pair sampling.
//
// Streams are std::mt19937_64 engines seeded through SplitMix64 from
// (seed, stream id, block index). Bounded integers use rejection on the raw
// 64-bit output instead of std::uniform_int_distribution, whose algorithm
// differs between standard libraries.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "vtopo/components.hpp"
#include "vtopo/grid.hpp"

namespace vtopo {

class RejectionCapExceeded : public Error {
public:
    using Error::Error;
};

inline constexpr std::uint64_t kDefaultRejectionCap = 1'000'000;
inline constexpr std::size_t kSampleBlockSize = 256;

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t block)
        : engine_(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ block)) {}

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit) {
            x = engine_();
        }
        return x % n;
    }

private:
    std::mt19937_64 engine_;
};

/// Admissible pixels (flat indices, raster order) with their component labels.
struct PairDomain {
    std::vector<std::size_t> pixels;
    std::vector<int> labels;
    std::size_t pair_count = 0;  // unordered same-component pairs

    [[nodiscard]] bool has_pair() const noexcept { return pair_count > 0; }
};

[[nodiscard]] inline PairDomain make_pair_domain(const LabeledMask& labels, const BinaryMask& admissible) {
    require_same_shape(labels, admissible, "make_pair_domain");
    PairDomain d;
    std::vector<std::size_t> sizes(static_cast<std::size_t>(labels.component_count) + 1, 0);
    for (std::size_t i = 0; i < admissible.size(); ++i) {
        if (admissible[i]) {
            d.pixels.push_back(i);
            d.labels.push_back(labels.labels[i]);
            ++sizes[static_cast<std::size_t>(labels.labels[i])];
        }
    }
    for (std::size_t k = 1; k < sizes.size(); ++k) {
        d.pair_count += sizes[k] * (sizes[k] - (sizes[k] > 0 ? 1 : 0)) / 2;
    }
    return d;
}

[[nodiscard]] inline PairDomain make_pair_domain(const BinaryMask& admissible) {
    return make_pair_domain(connected_components(admissible), admissible);
}

/// Draws i, j independently and uniformly over the domain and rejects until
/// they are distinct and share a label. The accepted pair is therefore
/// uniform over ordered same-component pairs (component weight ~ size^2).
/// Returns the pair as drawn (flat indices).
[[nodiscard]] inline std::pair<std::size_t, std::size_t> sample_pair(const PairDomain& domain, RandomStream& rng,
                                                                     std::uint64_t max_draws = kDefaultRejectionCap) {
    if (!domain.has_pair()) {
        throw Error("sample_pair: no component with two or more admissible pixels");
    }
    const auto n = static_cast<std::uint64_t>(domain.pixels.size());
    for (std::uint64_t draw = 0; draw < max_draws; ++draw) {
        const auto a = static_cast<std::size_t>(rng.below(n));
        const auto b = static_cast<std::size_t>(rng.below(n));
        if (a != b && domain.labels[a] == domain.labels[b]) {
            return {domain.pixels[a], domain.pixels[b]};
        }
    }
    throw RejectionCapExceeded("sample_pair: rejection cap of " + std::to_string(max_draws) +
                               " draws exceeded (admissible set is pathologically fragmented)");
}

/// n pairs drawn in blocks of kSampleBlockSize; block b uses its own stream
/// (seed, stream_id, b), so the sequence does not depend on how blocks are
/// scheduled.
[[nodiscard]] inline std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(const PairDomain& domain,
                                                                                   std::size_t n,
                                                                                   std::uint64_t seed,
                                                                                   std::uint64_t stream_id) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(n);
    for (std::size_t block = 0; block * kSampleBlockSize < n; ++block) {
        RandomStream rng(seed, stream_id, block);
        const std::size_t end = std::min(n, (block + 1) * kSampleBlockSize);
        for (std::size_t k = block * kSampleBlockSize; k < end; ++k) {
            out.push_back(sample_pair(domain, rng));
        }
    }
    return out;
}

}  // namespace vtopo
