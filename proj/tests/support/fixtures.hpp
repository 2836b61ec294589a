#pragma once

// Synthetic vessel trees: a 64x64 branching tree drawn with 3-pixel-wide
// vessels, and predictions that differ from it by one kind of defect each.

#include <algorithm>
#include <cmath>
#include <vector>

#include "vtopo/grid.hpp"

namespace fixture {

using vtopo::BinaryMask;
using vtopo::Pixel;

struct Segment {
    Pixel from;
    Pixel to;
};

/// Stamps a (2*half_width+1)^2 square at every point of the digital line.
inline void draw(BinaryMask& m, Segment s, int half_width = 1, bool value = true) {
    const int dr = s.to.row - s.from.row;
    const int dc = s.to.col - s.from.col;
    const int steps = std::max(std::abs(dr), std::abs(dc));
    for (int k = 0; k <= steps; ++k) {
        const double t = steps == 0 ? 0.0 : static_cast<double>(k) / steps;
        const int r = s.from.row + static_cast<int>(std::lround(t * dr));
        const int c = s.from.col + static_cast<int>(std::lround(t * dc));
        for (int y = r - half_width; y <= r + half_width; ++y) {
            for (int x = c - half_width; x <= c + half_width; ++x) {
                if (m.contains(y, x)) {
                    m(y, x) = value ? 1 : 0;
                }
            }
        }
    }
}

/// Clears a square of side 2*half+1 centred on p.
inline void erase(BinaryMask& m, Pixel p, int half) {
    for (int y = p.row - half; y <= p.row + half; ++y) {
        for (int x = p.col - half; x <= p.col + half; ++x) {
            if (m.contains(y, x)) {
                m(y, x) = 0;
            }
        }
    }
}

inline std::vector<Segment> tree_segments() {
    return {
        {{61, 32}, {42, 32}},  // trunk
        {{42, 32}, {24, 16}},  // left main branch
        {{42, 32}, {24, 48}},  // right main branch
        {{24, 16}, {5, 8}},    // left outer leaf
        {{24, 16}, {8, 26}},   // left inner leaf
        {{24, 48}, {5, 56}},   // right outer leaf
        {{24, 48}, {8, 38}},   // right inner leaf
        {{52, 32}, {56, 14}},  // low side branch
    };
}

inline BinaryMask vessel_tree() {
    BinaryMask m(64, 64);
    for (const auto& s : tree_segments()) {
        draw(m, s);
    }
    return m;
}

/// The left outer leaf is pruned back to half its length.
inline BinaryMask missing_termination() {
    BinaryMask m(64, 64);
    auto segs = tree_segments();
    segs[3].to = {15, 12};
    for (const auto& s : segs) {
        draw(m, s);
    }
    return m;
}

/// A spurious branch leaves the trunk into empty tissue.
inline BinaryMask false_branch() {
    BinaryMask m = vessel_tree();
    draw(m, {{52, 32}, {58, 46}});
    return m;
}

/// Two interior gaps, on the left main branch and the right main branch,
/// each splitting the tree.
inline BinaryMask broken_segments() {
    BinaryMask m = vessel_tree();
    erase(m, {33, 24}, 2);
    erase(m, {33, 40}, 2);
    return m;
}

}  // namespace fixture
