#pragma once

// Flat 3x3 morphology on soft maps.
//
// dilate1 is a sliding maximum with out-of-image cells read as 0, erode1 a
// sliding minimum with out-of-image cells read as 1. On {0,1} inputs these
// are exact binary dilation/erosion with the radius-1 square structuring
// element; on soft inputs they are subdifferentiable, and a MorphTrace
// records which input cell each output came from so gradients can be
// routed back. Ties go to the first extremal cell in raster order.

#include <cstdint>
#include <span>
#include <vector>

#include "vtopo/grid.hpp"

namespace vtopo {

/// source[i] = flat index of the input cell selected for output i, or -1
/// when the padding value won.
struct MorphTrace {
    std::vector<std::int32_t> source;
};

namespace detail {

template <bool IsMax>
SoftMap sliding_extremum(const SoftMap& in, MorphTrace* trace) {
    constexpr double kPad = IsMax ? 0.0 : 1.0;
    const int w = in.width();
    const int h = in.height();
    SoftMap out(w, h);
    if (trace != nullptr) {
        trace->source.assign(in.size(), -1);
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const bool interior = r > 0 && c > 0 && r + 1 < h && c + 1 < w;
            double best = 0.0;
            std::int32_t best_src = -1;
            bool have = false;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr;
                    const int cc = c + dc;
                    double v = kPad;
                    std::int32_t src = -1;
                    if (interior || in.contains(rr, cc)) {
                        src = static_cast<std::int32_t>(in.index({rr, cc}));
                        v = in[static_cast<std::size_t>(src)];
                    }
                    const bool better = IsMax ? v > best : v < best;
                    if (!have || better) {
                        best = v;
                        best_src = src;
                        have = true;
                    }
                }
            }
            const std::size_t o = out.index({r, c});
            out[o] = best;
            if (trace != nullptr) {
                trace->source[o] = best_src;
            }
        }
    }
    return out;
}

}  // namespace detail

[[nodiscard]] inline SoftMap dilate1(const SoftMap& m, MorphTrace* trace = nullptr) {
    return detail::sliding_extremum<true>(m, trace);
}

[[nodiscard]] inline SoftMap erode1(const SoftMap& m, MorphTrace* trace = nullptr) {
    return detail::sliding_extremum<false>(m, trace);
}

/// Accumulates grad_out through a traced dilate1/erode1 into grad_in.
inline void backprop(const MorphTrace& trace, std::span<const double> grad_out, std::span<double> grad_in) {
    for (std::size_t i = 0; i < trace.source.size(); ++i) {
        const auto src = trace.source[i];
        if (src >= 0) {
            grad_in[static_cast<std::size_t>(src)] += grad_out[i];
        }
    }
}

/// Closing with the radius-r square SE, computed as r dilations followed by
/// r erosions with the radius-1 SE.
[[nodiscard]] inline SoftMap closing(const SoftMap& m, int r) {
    if (r < 1) {
        throw Error("closing: radius must be >= 1, got " + std::to_string(r));
    }
    SoftMap out = m;
    for (int k = 0; k < r; ++k) {
        out = dilate1(out);
    }
    for (int k = 0; k < r; ++k) {
        out = erode1(out);
    }
    return out;
}

[[nodiscard]] inline BinaryMask closing(const BinaryMask& m, int r) {
    const SoftMap closed = closing(to_soft(m), r);
    BinaryMask out(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i) {
        out[i] = closed[i] > 0.5 ? 1 : 0;
    }
    return out;
}

[[nodiscard]] inline BinaryMask dilate(const BinaryMask& m, int r) {
    SoftMap s = to_soft(m);
    for (int k = 0; k < r; ++k) {
        s = dilate1(s);
    }
    BinaryMask out(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i) {
        out[i] = s[i] > 0.5 ? 1 : 0;
    }
    return out;
}

}  // namespace vtopo
