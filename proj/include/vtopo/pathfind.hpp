#pragma once

// Minimum-cost paths on the 8-connected pixel graph.
//
// Costs live on nodes: stepping into pixel x costs step_length * node_cost(x)
// with step_length 1 for cardinal and sqrt(2) for diagonal moves. The start
// pixel is not charged. Dijkstra pops in (distance, raster index) order and
// only replaces a predecessor on strict improvement, which makes every tree
// and path deterministic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <thread>
#include <vector>

#include "vtopo/components.hpp"
#include "vtopo/distance_transform.hpp"
#include "vtopo/grid.hpp"
#include "vtopo/parallel.hpp"
#include "vtopo/sampling.hpp"
#include "vtopo/skeleton.hpp"

namespace vtopo {

class Unreachable : public Error {
public:
    using Error::Error;
};

class SizeCapExceeded : public Error {
public:
    using Error::Error;
};

/// Exact (all-pairs) computations refuse admissible sets larger than this.
inline constexpr std::size_t kExactModeCap = 2000;

enum class StrategyKind {
    centerline,  // paths restricted to skeleton pixels, unit node cost
    weighted,    // paths over the full foreground, cost 1/(1+EDT)^p
};

struct PathStrategy {
    StrategyKind kind = StrategyKind::centerline;
    double exponent = 2.0;

    [[nodiscard]] static PathStrategy centerline() { return {StrategyKind::centerline, 2.0}; }
    [[nodiscard]] static PathStrategy weighted(double p = 2.0) {
        if (!(p > 0.0)) {
            throw Error("weighted strategy exponent must be positive");
        }
        return {StrategyKind::weighted, p};
    }
};

struct CostField {
    BinaryMask admissible;
    Grid<double> node_cost;  // +inf where not admissible

    [[nodiscard]] int width() const noexcept { return admissible.width(); }
    [[nodiscard]] int height() const noexcept { return admissible.height(); }
    [[nodiscard]] bool passable(std::size_t idx) const noexcept { return admissible[idx] != 0; }
};

struct PathTrace {
    std::vector<Pixel> pixels;
    double total_cost = 0.0;

    [[nodiscard]] std::size_t length() const noexcept { return pixels.size(); }
};

[[nodiscard]] inline double weighted_node_cost(double distance_to_background, double exponent) {
    return 1.0 / std::pow(1.0 + distance_to_background, exponent);
}

[[nodiscard]] inline CostField build_cost_field(const BinaryMask& mask, const PathStrategy& strategy) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    CostField field{BinaryMask(mask.width(), mask.height()), Grid<double>(mask.width(), mask.height(), kInf)};
    if (strategy.kind == StrategyKind::centerline) {
        field.admissible = skeletonize(mask);
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (field.admissible[i]) {
                field.node_cost[i] = 1.0;
            }
        }
    } else {
        if (!(strategy.exponent > 0.0)) {
            throw Error("weighted strategy exponent must be positive");
        }
        field.admissible = mask;
        const DistanceField edt = distance_transform(mask);
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (mask[i]) {
                field.node_cost[i] = weighted_node_cost(edt[i], strategy.exponent);
            }
        }
    }
    return field;
}

/// Single-source Dijkstra result. settle_order lists reached pixels in the
/// order they were finalised (source first); parent is -1 for the source and
/// for unreached pixels.
struct ShortestPathTree {
    std::size_t source = 0;
    std::vector<double> distance;
    std::vector<std::int64_t> parent;
    std::vector<std::size_t> settle_order;

    [[nodiscard]] bool reached(std::size_t idx) const noexcept {
        return distance[idx] < std::numeric_limits<double>::infinity();
    }
};

/// Stops early once `stop_at` is settled; the partial tree is identical to
/// the full one on every settled pixel.
[[nodiscard]] inline ShortestPathTree shortest_path_tree(const CostField& field, Pixel source,
                                                         std::optional<Pixel> stop_at = std::nullopt) {
    const auto& adm = field.admissible;
    if (!adm.contains(source) || !adm[source]) {
        throw Error("shortest_path_tree: source pixel is not admissible");
    }
    constexpr double kInf = std::numeric_limits<double>::infinity();
    ShortestPathTree tree;
    tree.source = adm.index(source);
    tree.distance.assign(adm.size(), kInf);
    tree.parent.assign(adm.size(), -1);
    std::vector<std::uint8_t> settled(adm.size(), 0);
    const std::optional<std::size_t> stop =
        stop_at ? std::optional<std::size_t>(adm.index(*stop_at)) : std::nullopt;

    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    tree.distance[tree.source] = 0.0;
    queue.emplace(0.0, tree.source);
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (settled[u]) {
            continue;
        }
        settled[u] = 1;
        tree.settle_order.push_back(u);
        if (stop && *stop == u) {
            break;
        }
        const Pixel pu = adm.pixel(u);
        for (int k = 0; k < 8; ++k) {
            const Pixel pv{pu.row + kNeighbor8Row[k], pu.col + kNeighbor8Col[k]};
            if (!adm.contains(pv)) {
                continue;
            }
            const std::size_t v = adm.index(pv);
            if (!adm[v] || settled[v]) {
                continue;
            }
            const bool diagonal = kNeighbor8Row[k] != 0 && kNeighbor8Col[k] != 0;
            const double step = diagonal ? std::numbers::sqrt2 : 1.0;
            const double candidate = d + step * field.node_cost[v];
            if (candidate < tree.distance[v]) {
                tree.distance[v] = candidate;
                tree.parent[v] = static_cast<std::int64_t>(u);
                queue.emplace(candidate, v);
            }
        }
    }
    return tree;
}

/// Path from the tree's source to `target`, source first.
[[nodiscard]] inline PathTrace trace_path(const ShortestPathTree& tree, const CostField& field, std::size_t target) {
    if (!tree.reached(target)) {
        throw Unreachable("no admissible path between the requested pixels");
    }
    PathTrace path;
    path.total_cost = tree.distance[target];
    for (auto v = static_cast<std::int64_t>(target); v >= 0; v = tree.parent[static_cast<std::size_t>(v)]) {
        path.pixels.push_back(field.admissible.pixel(static_cast<std::size_t>(v)));
    }
    std::reverse(path.pixels.begin(), path.pixels.end());
    return path;
}

[[nodiscard]] inline PathTrace min_cost_path(const CostField& field, Pixel from, Pixel to) {
    if (from == to) {
        throw Error("min_cost_path: endpoints must differ");
    }
    if (!field.admissible.contains(from) || !field.admissible.contains(to) || !field.admissible[from] ||
        !field.admissible[to]) {
        throw Error("min_cost_path: endpoints must be admissible pixels");
    }
    const ShortestPathTree tree = shortest_path_tree(field, from, to);
    return trace_path(tree, field, field.admissible.index(to));
}

struct FrequencyMode {
    enum class Kind { exact, sampled };
    Kind kind = Kind::exact;
    std::size_t samples = 0;
    std::uint64_t seed = 0;

    [[nodiscard]] static FrequencyMode exact() { return {Kind::exact, 0, 0}; }
    [[nodiscard]] static FrequencyMode sampled(std::size_t n, std::uint64_t seed) { return {Kind::sampled, n, seed}; }
};

inline void require_exact_cap(std::size_t admissible_count, const char* what) {
    if (admissible_count > kExactModeCap) {
        throw SizeCapExceeded(std::string(what) + ": exact mode refused, admissible set has " +
                              std::to_string(admissible_count) + " pixels (cap " + std::to_string(kExactModeCap) +
                              ")");
    }
}

/// Number of times each pixel lies on an extracted minimum-cost path.
/// Exact mode walks every unordered same-component admissible pair, each
/// traced from its lower to its higher raster index; sampled mode draws
/// `samples` pairs with the seeded rejection sampler.
[[nodiscard]] inline Grid<double> visit_frequency_map(const BinaryMask& mask, const PathStrategy& strategy,
                                                      const FrequencyMode& mode) {
    const CostField field = build_cost_field(mask, strategy);
    const PairDomain domain = make_pair_domain(field.admissible);
    Grid<double> counts(mask.width(), mask.height(), 0.0);
    if (mode.kind == FrequencyMode::Kind::exact) {
        require_exact_cap(domain.pixels.size(), "visit_frequency_map");
        // Integer counts merge exactly, so chunking cannot change the result.
        const std::size_t chunks = std::min<std::size_t>(
            domain.pixels.size(), std::max(1u, std::thread::hardware_concurrency()));
        std::vector<std::vector<std::uint64_t>> per_chunk(chunks, std::vector<std::uint64_t>(mask.size(), 0));
        detail::parallel_for(chunks, [&](std::size_t chunk) {
            auto& local = per_chunk[chunk];
            std::vector<std::uint64_t> below(mask.size(), 0);
            for (std::size_t s = chunk; s < domain.pixels.size(); s += chunks) {
                const std::size_t src = domain.pixels[s];
                const ShortestPathTree tree = shortest_path_tree(field, mask.pixel(src));
                // Targets in the subtree of v, accumulated leaves-first.
                for (auto it = tree.settle_order.rbegin(); it != tree.settle_order.rend(); ++it) {
                    const std::size_t v = *it;
                    if (v > src) {
                        ++below[v];
                    }
                    local[v] += below[v];
                    if (tree.parent[v] >= 0) {
                        below[static_cast<std::size_t>(tree.parent[v])] += below[v];
                    }
                    below[v] = 0;
                }
            }
        });
        for (const auto& local : per_chunk) {
            for (std::size_t i = 0; i < local.size(); ++i) {
                counts[i] += static_cast<double>(local[i]);
            }
        }
        return counts;
    }
    if (mode.samples == 0 || !domain.has_pair()) {
        return counts;
    }
    for (auto [a, b] : sample_pairs(domain, mode.samples, mode.seed, 0)) {
        if (b < a) {
            std::swap(a, b);
        }
        const PathTrace path = min_cost_path(field, mask.pixel(a), mask.pixel(b));
        for (Pixel p : path.pixels) {
            counts[p] += 1.0;
        }
    }
    return counts;
}

}  // namespace vtopo
