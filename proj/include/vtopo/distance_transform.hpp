#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "vtopo/grid.hpp"

namespace vtopo {

namespace detail {

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) for one line of
// squared distances. f and out have length n; v and z are scratch buffers.
inline void squared_distance_1d(const std::vector<double>& f, std::vector<double>& out, std::vector<int>& v,
                                std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double kInf = std::numeric_limits<double>::infinity();
    v.assign(static_cast<std::size_t>(n), 0);
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        const double fq = f[static_cast<std::size_t>(q)];
        if (fq == kInf) {
            continue;
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        double s = 0.0;
        while (true) {
            const int p = v[static_cast<std::size_t>(k)];
            const double fp = f[static_cast<std::size_t>(p)];
            s = ((fq + static_cast<double>(q) * q) - (fp + static_cast<double>(p) * p)) / (2.0 * (q - p));
            if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
                --k;
                continue;
            }
            break;
        }
        if (s <= z[static_cast<std::size_t>(k)]) {
            // Only possible for k == 0: the new parabola dominates everywhere.
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = kInf;
    }
    out.assign(static_cast<std::size_t>(n), kInf);
    if (k < 0) {
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(j) + 1] < q) {
            ++j;
        }
        const int p = v[static_cast<std::size_t>(j)];
        const double d = static_cast<double>(q - p);
        out[static_cast<std::size_t>(q)] = d * d + f[static_cast<std::size_t>(p)];
    }
}

}  // namespace detail

/// Exact Euclidean distance from every pixel to the nearest background
/// pixel, treating everything outside the image as background.
[[nodiscard]] inline DistanceField distance_transform(const BinaryMask& mask) {
    // One-pixel background frame makes the out-of-image rule explicit.
    const int w = mask.width() + 2;
    const int h = mask.height() + 2;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> sq(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0);
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (mask(r, c)) {
                sq[static_cast<std::size_t>(r + 1) * w + static_cast<std::size_t>(c + 1)] = kInf;
            }
        }
    }
    std::vector<double> line;
    std::vector<double> out;
    std::vector<int> v;
    std::vector<double> z;
    for (int c = 0; c < w; ++c) {
        line.resize(static_cast<std::size_t>(h));
        for (int r = 0; r < h; ++r) {
            line[static_cast<std::size_t>(r)] = sq[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)];
        }
        detail::squared_distance_1d(line, out, v, z);
        for (int r = 0; r < h; ++r) {
            sq[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)] = out[static_cast<std::size_t>(r)];
        }
    }
    for (int r = 0; r < h; ++r) {
        line.assign(sq.begin() + static_cast<std::ptrdiff_t>(r) * w, sq.begin() + static_cast<std::ptrdiff_t>(r + 1) * w);
        detail::squared_distance_1d(line, out, v, z);
        std::copy(out.begin(), out.end(), sq.begin() + static_cast<std::ptrdiff_t>(r) * w);
    }
    DistanceField field(mask.width(), mask.height(), 0.0);
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            field(r, c) = std::sqrt(sq[static_cast<std::size_t>(r + 1) * w + static_cast<std::size_t>(c + 1)]);
        }
    }
    return field;
}

}  // namespace vtopo
