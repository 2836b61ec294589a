#pragma once

#include <numeric>
#include <vector>

#include "vtopo/grid.hpp"

namespace vtopo {

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) {
            return;
        }
        if (b < a) {
            std::swap(a, b);
        }
        parent_[b] = a;
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace detail

/// 8-connected labeling. Labels are 1..component_count in raster order of
/// each component's first pixel; background is 0.
[[nodiscard]] inline LabeledMask connected_components(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    detail::DisjointSets sets(mask.size());
    // Only the already-visited half of the neighbourhood is needed in a raster pass.
    constexpr int kPrevRow[4] = {-1, -1, -1, 0};
    constexpr int kPrevCol[4] = {-1, 0, 1, -1};
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask(r, c)) {
                continue;
            }
            for (int k = 0; k < 4; ++k) {
                const int rr = r + kPrevRow[k];
                const int cc = c + kPrevCol[k];
                if (mask.contains(rr, cc) && mask(rr, cc)) {
                    sets.unite(mask.index({r, c}), mask.index({rr, cc}));
                }
            }
        }
    }
    LabeledMask out{Grid<int>(w, h, 0), 0};
    std::vector<int> root_label(mask.size(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) {
            continue;
        }
        const std::size_t root = sets.find(i);
        if (root_label[root] == 0) {
            root_label[root] = ++out.component_count;
        }
        out.labels[i] = root_label[root];
    }
    return out;
}

[[nodiscard]] inline std::vector<std::size_t> component_sizes(const LabeledMask& labels) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(labels.component_count) + 1, 0);
    for (int v : labels.labels.values()) {
        ++sizes[static_cast<std::size_t>(v)];
    }
    sizes[0] = 0;
    return sizes;
}

}  // namespace vtopo
