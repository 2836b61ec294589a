#pragma once

// Zhang-Suen iterative thinning.
//
// Neighbour naming follows the usual clockwise order starting north:
//   p9 p2 p3
//   p8 p1 p4
//   p7 p6 p5
// Out-of-image neighbours are background.

#include <array>
#include <vector>

#include "vtopo/components.hpp"
#include "vtopo/grid.hpp"

namespace vtopo {

namespace detail {

inline std::array<std::uint8_t, 8> clockwise_neighbours(const BinaryMask& m, int r, int c) {
    auto at = [&](int rr, int cc) -> std::uint8_t { return m.contains(rr, cc) && m(rr, cc) ? 1 : 0; };
    return {at(r - 1, c), at(r - 1, c + 1), at(r, c + 1), at(r + 1, c + 1),
            at(r + 1, c), at(r + 1, c - 1), at(r, c - 1), at(r - 1, c - 1)};
}

inline bool zhang_suen_deletable(const std::array<std::uint8_t, 8>& p, bool first_pass) {
    int count = 0;
    int transitions = 0;
    for (int k = 0; k < 8; ++k) {
        count += p[static_cast<std::size_t>(k)];
        if (p[static_cast<std::size_t>(k)] == 0 && p[static_cast<std::size_t>((k + 1) % 8)] == 1) {
            ++transitions;
        }
    }
    if (count < 2 || count > 6 || transitions != 1) {
        return false;
    }
    // p[0]=p2, p[2]=p4, p[4]=p6, p[6]=p8
    if (first_pass) {
        return p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0;
    }
    return p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0;
}

}  // namespace detail

/// Thins the foreground to a 1-pixel-wide 8-connected centreline. A
/// subiteration never removes the last pixel of a component, so the
/// component count of the input is preserved (plain Zhang-Suen erases
/// 2x2 blocks). The result is a fixed point: skeletonize is idempotent.
[[nodiscard]] inline BinaryMask skeletonize(const BinaryMask& mask) {
    BinaryMask current = mask;
    std::vector<std::size_t> marked;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const bool first_pass : {true, false}) {
            marked.clear();
            for (int r = 0; r < current.height(); ++r) {
                for (int c = 0; c < current.width(); ++c) {
                    if (current(r, c) &&
                        detail::zhang_suen_deletable(detail::clockwise_neighbours(current, r, c), first_pass)) {
                        marked.push_back(current.index({r, c}));
                    }
                }
            }
            if (marked.empty()) {
                continue;
            }
            const LabeledMask labels = connected_components(current);
            auto remaining = component_sizes(labels);
            std::vector<std::uint8_t> keep_one(remaining.size(), 0);
            for (std::size_t idx : marked) {
                --remaining[static_cast<std::size_t>(labels.labels[idx])];
            }
            for (std::size_t idx : marked) {
                const auto label = static_cast<std::size_t>(labels.labels[idx]);
                if (remaining[label] == 0 && !keep_one[label]) {
                    keep_one[label] = 1;  // first marked pixel in raster order survives
                    continue;
                }
                current[idx] = 0;
                changed = true;
            }
        }
    }
    return current;
}

}  // namespace vtopo
