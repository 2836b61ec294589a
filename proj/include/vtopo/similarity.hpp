#pragma once

// Path-based topological similarity between two binary masks.
//
// For a source mask S and a reference mask R, the coherence term is the mean,
// over minimum-cost paths between same-component admissible pixel pairs of
// S, of f(path, R). The index is the geometric mean of the term computed
// with (S, R) = (Y, P) (path recall) and (S, R) = (P, Y) (path precision).

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vtopo/grid.hpp"
#include "vtopo/parallel.hpp"
#include "vtopo/pathfind.hpp"
#include "vtopo/sampling.hpp"

namespace vtopo {

enum class Coherence { hamming, feasible };

namespace detail {

inline std::size_t count_uncovered(const PathTrace& path, const BinaryMask& mask) {
    if (path.pixels.size() < 2) {
        throw Error("path coherence: path must contain at least two pixels");
    }
    std::size_t uncovered = 0;
    for (Pixel p : path.pixels) {
        if (!mask.contains(p)) {
            throw Error("path coherence: pixel (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                        ") outside the mask");
        }
        uncovered += mask[p] ? 0 : 1;
    }
    return uncovered;
}

inline double coherence_from_counts(Coherence f, std::size_t length, std::size_t uncovered) {
    if (f == Coherence::feasible) {
        return uncovered == 0 ? 1.0 : 0.0;
    }
    return static_cast<double>(length - uncovered) / static_cast<double>(length);
}

}  // namespace detail

/// (n - H) / n, H = number of path pixels that are background in `mask`.
[[nodiscard]] inline double f_hamming(const PathTrace& path, const BinaryMask& mask) {
    const std::size_t h = detail::count_uncovered(path, mask);
    return detail::coherence_from_counts(Coherence::hamming, path.pixels.size(), h);
}

/// 1 when every path pixel is foreground in `mask`, else 0.
[[nodiscard]] inline double f_feasible(const PathTrace& path, const BinaryMask& mask) {
    const std::size_t h = detail::count_uncovered(path, mask);
    return detail::coherence_from_counts(Coherence::feasible, path.pixels.size(), h);
}

[[nodiscard]] inline double coherence(Coherence f, const PathTrace& path, const BinaryMask& mask) {
    return f == Coherence::hamming ? f_hamming(path, mask) : f_feasible(path, mask);
}

struct SimilarityResult {
    double value = 0.0;
    double recall_term = 0.0;
    double precision_term = 0.0;
    /// Paths behind (recall, precision): all pairs in exact mode, samples in MC mode.
    std::pair<std::uint64_t, std::uint64_t> n_paths_used{0, 0};
    std::optional<double> estimator_stderr;
    std::optional<double> recall_stderr;
    std::optional<double> precision_stderr;
    /// Set when a mask has foreground but no same-component admissible pair.
    bool degenerate_warning = false;
};

namespace detail {

struct TermEstimate {
    double mean = 0.0;
    std::uint64_t paths = 0;
    bool has_pairs = false;
    bool had_foreground = false;
    double variance_of_mean = 0.0;
};

inline TermEstimate exact_term(const BinaryMask& source, const BinaryMask& reference, Coherence f,
                               const PathStrategy& strategy) {
    const CostField field = build_cost_field(source, strategy);
    const PairDomain domain = make_pair_domain(field.admissible);
    require_exact_cap(domain.pixels.size(), "exact_similarity");
    TermEstimate est;
    est.had_foreground = count_foreground(source) > 0;
    est.has_pairs = domain.has_pair();
    if (!est.has_pairs) {
        return est;
    }
    std::vector<double> per_source_sum(domain.pixels.size(), 0.0);
    std::vector<std::uint64_t> per_source_paths(domain.pixels.size(), 0);
    parallel_for(domain.pixels.size(), [&](std::size_t s) {
        const std::size_t src = domain.pixels[s];
        const ShortestPathTree tree = shortest_path_tree(field, source.pixel(src));
        // Path length and uncovered count propagate from parent to child in settle order.
        std::vector<std::uint32_t> length(source.size(), 0);
        std::vector<std::uint32_t> uncovered(source.size(), 0);
        double sum = 0.0;
        std::uint64_t paths = 0;
        // Settle order is increasing distance; targets are summed in raster order
        // afterwards so the result does not depend on heap internals.
        for (std::size_t v : tree.settle_order) {
            const std::uint32_t miss = reference[v] ? 0u : 1u;
            if (tree.parent[v] < 0) {
                length[v] = 1;
                uncovered[v] = miss;
            } else {
                const auto p = static_cast<std::size_t>(tree.parent[v]);
                length[v] = length[p] + 1;
                uncovered[v] = uncovered[p] + miss;
            }
        }
        for (std::size_t t = s + 1; t < domain.pixels.size(); ++t) {
            const std::size_t v = domain.pixels[t];
            if (!tree.reached(v)) {
                continue;
            }
            sum += coherence_from_counts(f, length[v], uncovered[v]);
            ++paths;
        }
        per_source_sum[s] = sum;
        per_source_paths[s] = paths;
    });
    double total = 0.0;
    for (std::size_t s = 0; s < domain.pixels.size(); ++s) {
        total += per_source_sum[s];
        est.paths += per_source_paths[s];
    }
    est.mean = total / static_cast<double>(est.paths);
    return est;
}

inline TermEstimate sampled_term(const BinaryMask& source, const BinaryMask& reference, Coherence f,
                                 const PathStrategy& strategy, std::size_t n, std::uint64_t seed,
                                 std::uint64_t stream_id) {
    const CostField field = build_cost_field(source, strategy);
    const PairDomain domain = make_pair_domain(field.admissible);
    TermEstimate est;
    est.had_foreground = count_foreground(source) > 0;
    est.has_pairs = domain.has_pair();
    if (!est.has_pairs) {
        return est;
    }
    const auto pairs = sample_pairs(domain, n, seed, stream_id);
    std::vector<double> values(pairs.size(), 0.0);
    parallel_for(pairs.size(), [&](std::size_t k) {
        auto [a, b] = pairs[k];
        if (b < a) {
            std::swap(a, b);  // same orientation as exact mode
        }
        const PathTrace path = min_cost_path(field, source.pixel(a), source.pixel(b));
        values[k] = coherence(f, path, reference);
    });
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    est.paths = values.size();
    est.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - est.mean) * (v - est.mean);
        }
        const double sample_var = ss / static_cast<double>(values.size() - 1);
        est.variance_of_mean = sample_var / static_cast<double>(values.size());
    }
    return est;
}

/// Degenerate rule: a side without pairs scores 1 if the other side has
/// none either, else 0.
inline double resolved_term(const TermEstimate& self, const TermEstimate& other) {
    if (self.has_pairs) {
        return self.mean;
    }
    return other.has_pairs ? 0.0 : 1.0;
}

inline SimilarityResult combine_terms(const TermEstimate& recall, const TermEstimate& precision, bool sampled) {
    SimilarityResult res;
    res.recall_term = resolved_term(recall, precision);
    res.precision_term = resolved_term(precision, recall);
    res.value = std::sqrt(res.recall_term * res.precision_term);
    res.n_paths_used = {recall.paths, precision.paths};
    res.degenerate_warning = (recall.had_foreground && !recall.has_pairs) ||
                             (precision.had_foreground && !precision.has_pairs);
    if (sampled) {
        const double var_r = recall.has_pairs ? recall.variance_of_mean : 0.0;
        const double var_p = precision.has_pairs ? precision.variance_of_mean : 0.0;
        res.recall_stderr = std::sqrt(var_r);
        res.precision_stderr = std::sqrt(var_p);
        if (var_r == 0.0 && var_p == 0.0) {
            res.estimator_stderr = 0.0;
        } else if (res.value > 0.0) {
            // Delta method on sqrt(R * P).
            const double d_r = res.precision_term / (2.0 * res.value);
            const double d_p = res.recall_term / (2.0 * res.value);
            res.estimator_stderr = std::sqrt(d_r * d_r * var_r + d_p * d_p * var_p);
        }
    }
    return res;
}

}  // namespace detail

/// Exact index over all unordered same-component admissible pairs of both
/// masks. Masks must share dimensions; each admissible set must be within
/// kExactModeCap.
[[nodiscard]] inline SimilarityResult exact_similarity(const BinaryMask& prediction, const BinaryMask& truth,
                                                       Coherence f, const PathStrategy& strategy) {
    require_same_shape(prediction, truth, "exact_similarity");
    const auto recall = detail::exact_term(truth, prediction, f, strategy);
    const auto precision = detail::exact_term(prediction, truth, f, strategy);
    return detail::combine_terms(recall, precision, false);
}

/// Monte Carlo estimate from n sampled pairs per term. Deterministic in
/// (inputs, n, seed); the recall and precision terms use separate streams.
[[nodiscard]] inline SimilarityResult mc_similarity(const BinaryMask& prediction, const BinaryMask& truth,
                                                    Coherence f, const PathStrategy& strategy, std::size_t n,
                                                    std::uint64_t seed) {
    require_same_shape(prediction, truth, "mc_similarity");
    if (n < 1) {
        throw Error("mc_similarity: sample count must be >= 1");
    }
    const auto recall = detail::sampled_term(truth, prediction, f, strategy, n, seed, 1);
    const auto precision = detail::sampled_term(prediction, truth, f, strategy, n, seed, 2);
    return detail::combine_terms(recall, precision, true);
}

}  // namespace vtopo
