#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vtopo {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

struct Pixel {
    int row = 0;
    int col = 0;

    friend constexpr bool operator==(Pixel, Pixel) = default;
    friend constexpr auto operator<=>(Pixel, Pixel) = default;
};

/// Row-major 2-D grid. Cells are addressed either by Pixel or by flat index
/// row * width + col; the flat index order is the raster order used for
/// every tie-break in the library.
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;

    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height) {
        if (width < 1 || height < 1) {
            throw Error("grid dimensions must be positive, got " + std::to_string(width) + "x" +
                        std::to_string(height));
        }
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Grid(int width, int height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width < 1 || height < 1) {
            throw Error("grid dimensions must be positive, got " + std::to_string(width) + "x" +
                        std::to_string(height));
        }
        if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw Error("grid data length " + std::to_string(data_.size()) + " does not match " +
                        std::to_string(width) + "x" + std::to_string(height));
        }
    }

    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int height() const noexcept { return height_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] bool contains(Pixel p) const noexcept {
        return p.row >= 0 && p.col >= 0 && p.row < height_ && p.col < width_;
    }
    [[nodiscard]] bool contains(int row, int col) const noexcept { return contains(Pixel{row, col}); }

    [[nodiscard]] std::size_t index(Pixel p) const noexcept {
        return static_cast<std::size_t>(p.row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(p.col);
    }
    [[nodiscard]] Pixel pixel(std::size_t idx) const noexcept {
        return {static_cast<int>(idx / static_cast<std::size_t>(width_)),
                static_cast<int>(idx % static_cast<std::size_t>(width_))};
    }

    [[nodiscard]] T& operator()(int row, int col) noexcept { return data_[index({row, col})]; }
    [[nodiscard]] const T& operator()(int row, int col) const noexcept { return data_[index({row, col})]; }
    [[nodiscard]] T& operator[](Pixel p) noexcept { return data_[index(p)]; }
    [[nodiscard]] const T& operator[](Pixel p) const noexcept { return data_[index(p)]; }
    [[nodiscard]] T& operator[](std::size_t i) noexcept { return data_[i]; }
    [[nodiscard]] const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    [[nodiscard]] std::span<T> values() noexcept { return data_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return data_; }

    [[nodiscard]] bool same_shape(const auto& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Foreground = true. std::uint8_t instead of bool so spans work.
using BinaryMask = Grid<std::uint8_t>;

/// Real-valued grid with entries in [0,1]; used for soft predictions.
using ProbMap = Grid<double>;
using SoftMap = Grid<double>;

/// Distance from each pixel to the nearest background pixel (0 on background).
using DistanceField = Grid<double>;

struct LabeledMask {
    Grid<int> labels;
    int component_count = 0;

    [[nodiscard]] int width() const noexcept { return labels.width(); }
    [[nodiscard]] int height() const noexcept { return labels.height(); }
};

inline void require_same_shape(const auto& a, const auto& b, const char* what) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw DimensionMismatch(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                                std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
    }
}

[[nodiscard]] inline std::size_t count_foreground(const BinaryMask& m) {
    return static_cast<std::size_t>(std::count_if(m.values().begin(), m.values().end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

/// Builds a mask from an ASCII picture; '#', '1' and 'X' are foreground.
/// All rows must have equal length.
[[nodiscard]] inline BinaryMask mask_from_rows(const std::vector<std::string>& rows) {
    if (rows.empty()) {
        throw Error("mask_from_rows: no rows");
    }
    const int w = static_cast<int>(rows.front().size());
    BinaryMask m(w, static_cast<int>(rows.size()));
    for (int r = 0; r < m.height(); ++r) {
        if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != w) {
            throw Error("mask_from_rows: ragged row " + std::to_string(r));
        }
        for (int c = 0; c < w; ++c) {
            const char ch = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            m(r, c) = (ch == '#' || ch == '1' || ch == 'X') ? 1 : 0;
        }
    }
    return m;
}

[[nodiscard]] inline SoftMap to_soft(const BinaryMask& m) {
    SoftMap s(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i) {
        s[i] = m[i] ? 1.0 : 0.0;
    }
    return s;
}

/// Checks the [0,1] range invariant of soft maps.
inline void require_unit_range(const SoftMap& m, const char* what) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double v = m[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw Error(std::string(what) + ": value " + std::to_string(v) + " at index " +
                        std::to_string(i) + " outside [0,1]");
        }
    }
}

[[nodiscard]] inline BinaryMask threshold(const ProbMap& p, double t) {
    BinaryMask m(p.width(), p.height());
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = p[i] >= t ? 1 : 0;
    }
    return m;
}

inline constexpr int kNeighbor8Row[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
inline constexpr int kNeighbor8Col[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

}  // namespace vtopo
