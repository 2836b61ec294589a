#pragma once

// Reference implementations used only by the tests. Each one is written
// from the definition, favouring obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "vtopo/grid.hpp"
#include "vtopo/pathfind.hpp"
#include "vtopo/similarity.hpp"

namespace oracle {

using vtopo::BinaryMask;
using vtopo::Grid;
using vtopo::Pixel;
using vtopo::SoftMap;

inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
    std::bernoulli_distribution fg(density);
    BinaryMask m(w, h);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = fg(rng) ? 1 : 0;
    }
    return m;
}

inline SoftMap random_soft(std::mt19937_64& rng, int w, int h, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    SoftMap m(w, h);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = u(rng);
    }
    return m;
}

inline bool adjacent8(Pixel a, Pixel b) {
    return a != b && std::abs(a.row - b.row) <= 1 && std::abs(a.col - b.col) <= 1;
}

/// Breadth-first flood fill; label[i] = component id (1-based, raster order of seed).
inline std::vector<int> flood_labels(const BinaryMask& m, int* count = nullptr) {
    std::vector<int> label(m.size(), 0);
    int next = 0;
    for (std::size_t s = 0; s < m.size(); ++s) {
        if (!m[s] || label[s] != 0) {
            continue;
        }
        ++next;
        std::deque<std::size_t> queue{s};
        label[s] = next;
        while (!queue.empty()) {
            const Pixel p = m.pixel(queue.front());
            queue.pop_front();
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const Pixel q{p.row + dr, p.col + dc};
                    if (m.contains(q) && m[q] && label[m.index(q)] == 0) {
                        label[m.index(q)] = next;
                        queue.push_back(m.index(q));
                    }
                }
            }
        }
    }
    if (count != nullptr) {
        *count = next;
    }
    return label;
}

inline int component_count(const BinaryMask& m) {
    int n = 0;
    flood_labels(m, &n);
    return n;
}

/// Distance from each foreground pixel to the nearest background pixel,
/// where every cell outside the frame is background.
inline Grid<double> brute_edt(const BinaryMask& m) {
    Grid<double> out(m.width(), m.height(), 0.0);
    for (int r = 0; r < m.height(); ++r) {
        for (int c = 0; c < m.width(); ++c) {
            if (!m(r, c)) {
                continue;
            }
            const int edge = std::min({r + 1, c + 1, m.height() - r, m.width() - c});
            double best2 = static_cast<double>(edge) * edge;
            for (int rr = 0; rr < m.height(); ++rr) {
                for (int cc = 0; cc < m.width(); ++cc) {
                    if (!m(rr, cc)) {
                        const double d2 = static_cast<double>((rr - r) * (rr - r) + (cc - c) * (cc - c));
                        best2 = std::min(best2, d2);
                    }
                }
            }
            out(r, c) = std::sqrt(best2);
        }
    }
    return out;
}

/// Closing with the (2r+1)x(2r+1) square, by direct neighbourhood scans.
/// Dilation sees only in-frame pixels; erosion treats out-of-frame as foreground.
inline SoftMap brute_closing(const SoftMap& a, int r) {
    const int w = a.width();
    const int h = a.height();
    SoftMap dil(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double best = 0.0;
            for (int yy = y - r; yy <= y + r; ++yy) {
                for (int xx = x - r; xx <= x + r; ++xx) {
                    if (a.contains(yy, xx)) {
                        best = std::max(best, a(yy, xx));
                    }
                }
            }
            dil(y, x) = best;
        }
    }
    SoftMap out(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double best = 1.0;
            for (int yy = y - r; yy <= y + r; ++yy) {
                for (int xx = x - r; xx <= x + r; ++xx) {
                    if (dil.contains(yy, xx)) {
                        best = std::min(best, dil(yy, xx));
                    }
                }
            }
            out(y, x) = best;
        }
    }
    return out;
}

inline BinaryMask brute_closing(const BinaryMask& a, int r) {
    const SoftMap c = brute_closing(vtopo::to_soft(a), r);
    BinaryMask out(a.width(), a.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = c[i] > 0.5 ? 1 : 0;
    }
    return out;
}

/// Textbook Zhang-Suen thinning with the component guard: in each
/// subiteration, if every remaining pixel of a component is marked, the
/// first one in raster order is kept.
inline BinaryMask zhang_suen(const BinaryMask& input) {
    BinaryMask img = input;
    auto v = [&](int r, int c) -> int { return img.contains(r, c) && img(r, c) ? 1 : 0; };
    for (;;) {
        bool any = false;
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<Pixel> marked;
            for (int r = 0; r < img.height(); ++r) {
                for (int c = 0; c < img.width(); ++c) {
                    if (!img(r, c)) {
                        continue;
                    }
                    const int p2 = v(r - 1, c), p3 = v(r - 1, c + 1), p4 = v(r, c + 1), p5 = v(r + 1, c + 1);
                    const int p6 = v(r + 1, c), p7 = v(r + 1, c - 1), p8 = v(r, c - 1), p9 = v(r - 1, c - 1);
                    const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
                    int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                    int a = 0;
                    for (int k = 0; k < 8; ++k) {
                        a += (seq[k] == 0 && seq[k + 1] == 1) ? 1 : 0;
                    }
                    const bool c3 = pass == 0 ? p2 * p4 * p6 == 0 : p2 * p4 * p8 == 0;
                    const bool c4 = pass == 0 ? p4 * p6 * p8 == 0 : p2 * p6 * p8 == 0;
                    if (b >= 2 && b <= 6 && a == 1 && c3 && c4) {
                        marked.push_back({r, c});
                    }
                }
            }
            if (marked.empty()) {
                continue;
            }
            const std::vector<int> label = flood_labels(img);
            std::vector<int> unmarked_in(img.size() + 1, 0);
            for (std::size_t i = 0; i < img.size(); ++i) {
                if (img[i]) {
                    ++unmarked_in[static_cast<std::size_t>(label[i])];
                }
            }
            for (Pixel p : marked) {
                --unmarked_in[static_cast<std::size_t>(label[img.index(p)])];
            }
            std::vector<bool> spared(img.size() + 1, false);
            for (Pixel p : marked) {
                const auto l = static_cast<std::size_t>(label[img.index(p)]);
                if (unmarked_in[l] == 0 && !spared[l]) {
                    spared[l] = true;
                    continue;
                }
                img[p] = 0;
                any = true;
            }
        }
        if (!any) {
            return img;
        }
    }
}

/// Node-cost path search by exhaustive enumeration of simple paths with
/// branch-and-bound. Costs are accumulated in path order exactly as a
/// Dijkstra relaxation would, so optima compare bit for bit.
class SimplePathEnumerator {
public:
    explicit SimplePathEnumerator(const vtopo::CostField& field) : field_(field), on_path_(field.admissible.size(), 0) {
        for (std::size_t i = 0; i < field.admissible.size(); ++i) {
            if (field.admissible[i]) {
                min_node_cost_ = std::min(min_node_cost_, field.node_cost[i]);
            }
        }
    }

    double min_cost(Pixel from, Pixel to) {
        best_ = std::numeric_limits<double>::infinity();
        target_ = field_.admissible.index(to);
        target_pixel_ = to;
        const std::size_t s = field_.admissible.index(from);
        on_path_[s] = 1;
        search(s, 0.0);
        on_path_[s] = 0;
        return best_;
    }

private:
    // Every remaining step costs at least min_node_cost_, so no completion
    // of a partial path can be cheaper than this. The slack keeps rounding
    // from pruning a path whose remainder meets the bound exactly.
    double lower_bound(Pixel p) const {
        const int steps = std::max(std::abs(p.row - target_pixel_.row), std::abs(p.col - target_pixel_.col));
        return steps * min_node_cost_ * (1.0 - 1e-9);
    }

    void search(std::size_t u, double cost) {
        if (u == target_) {
            best_ = std::min(best_, cost);
            return;
        }
        const auto& adm = field_.admissible;
        const Pixel pu = adm.pixel(u);
        std::vector<std::pair<int, Pixel>> next_pixels;
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                const Pixel q{pu.row + dr, pu.col + dc};
                if ((dr == 0 && dc == 0) || !adm.contains(q) || !adm[q] || on_path_[adm.index(q)]) {
                    continue;
                }
                const int d = std::max(std::abs(q.row - target_pixel_.row), std::abs(q.col - target_pixel_.col));
                next_pixels.push_back({d, q});
            }
        }
        // Heading towards the target first finds a tight bound early.
        std::stable_sort(next_pixels.begin(), next_pixels.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [d, q] : next_pixels) {
            const std::size_t v = adm.index(q);
            const bool diagonal = q.row != pu.row && q.col != pu.col;
            const double step = diagonal ? std::numbers::sqrt2 : 1.0;
            const double next = cost + step * field_.node_cost[v];
            if (next + lower_bound(q) > best_) {
                continue;
            }
            on_path_[v] = 1;
            search(v, next);
            on_path_[v] = 0;
        }
    }

    const vtopo::CostField& field_;
    std::vector<std::uint8_t> on_path_;
    std::size_t target_ = 0;
    Pixel target_pixel_;
    double min_node_cost_ = std::numeric_limits<double>::infinity();
    double best_ = 0.0;
};

/// O(V^2) Dijkstra by linear scan for the unsettled pixel with the smallest
/// (distance, raster index); predecessors change only on strict improvement.
inline std::vector<std::int64_t> naive_parents(const vtopo::CostField& field, std::size_t source,
                                               std::vector<double>* dist_out = nullptr) {
    const auto& adm = field.admissible;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(adm.size(), inf);
    std::vector<std::int64_t> parent(adm.size(), -1);
    std::vector<bool> done(adm.size(), false);
    dist[source] = 0.0;
    for (;;) {
        std::size_t u = adm.size();
        for (std::size_t i = 0; i < adm.size(); ++i) {
            if (!done[i] && dist[i] < inf && (u == adm.size() || dist[i] < dist[u])) {
                u = i;
            }
        }
        if (u == adm.size()) {
            break;
        }
        done[u] = true;
        const Pixel pu = adm.pixel(u);
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                const Pixel q{pu.row + dr, pu.col + dc};
                if ((dr == 0 && dc == 0) || !adm.contains(q) || !adm[q] || done[adm.index(q)]) {
                    continue;
                }
                const double step = (dr != 0 && dc != 0) ? std::numbers::sqrt2 : 1.0;
                const double cand = dist[u] + step * field.node_cost[q];
                if (cand < dist[adm.index(q)]) {
                    dist[adm.index(q)] = cand;
                    parent[adm.index(q)] = static_cast<std::int64_t>(u);
                }
            }
        }
    }
    if (dist_out != nullptr) {
        *dist_out = dist;
    }
    return parent;
}

/// One coherence term from its definition: mean over unordered
/// same-component admissible pairs (i < j in raster order) of f(path_ij, ref).
/// Returns -1 when there is no pair.
inline double naive_term(const BinaryMask& source, const BinaryMask& reference, vtopo::Coherence f,
                         const vtopo::PathStrategy& strategy) {
    const vtopo::CostField field = vtopo::build_cost_field(source, strategy);
    std::vector<std::size_t> nodes;
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (field.admissible[i]) {
            nodes.push_back(i);
        }
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        const auto parent = naive_parents(field, nodes[a]);
        for (std::size_t b = a + 1; b < nodes.size(); ++b) {
            std::size_t len = 0;
            std::size_t covered = 0;
            std::int64_t v = static_cast<std::int64_t>(nodes[b]);
            if (parent[nodes[b]] < 0) {
                continue;  // other component
            }
            for (; v >= 0; v = parent[static_cast<std::size_t>(v)]) {
                ++len;
                covered += reference[static_cast<std::size_t>(v)] ? 1 : 0;
            }
            const double value = f == vtopo::Coherence::hamming
                                     ? static_cast<double>(covered) / static_cast<double>(len)
                                     : (covered == len ? 1.0 : 0.0);
            sum += value;
            ++count;
        }
    }
    return count == 0 ? -1.0 : sum / static_cast<double>(count);
}

inline double naive_index(const BinaryMask& prediction, const BinaryMask& truth, vtopo::Coherence f,
                          const vtopo::PathStrategy& strategy) {
    const double recall = naive_term(truth, prediction, f, strategy);
    const double precision = naive_term(prediction, truth, f, strategy);
    if (recall < 0.0 && precision < 0.0) {
        return 1.0;
    }
    if (recall < 0.0 || precision < 0.0) {
        return 0.0;
    }
    return std::sqrt(recall * precision);
}

/// AUC as the fraction of (positive, negative) pairs ranked correctly, ties counting one half.
inline double pairwise_auc(const Grid<double>& p, const BinaryMask& y) {
    double good = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!y[i]) {
            continue;
        }
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (y[j]) {
                continue;
            }
            pairs += 1.0;
            good += p[i] > p[j] ? 1.0 : (p[i] == p[j] ? 0.5 : 0.0);
        }
    }
    return good / pairs;
}

}  // namespace oracle
