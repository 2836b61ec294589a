#pragma once

// 8-bit grayscale image decoding/encoding: PGM (P2/P5) and PNG.
//
// Decoded images are plain 8-bit grids; load_mask thresholds at 128 and
// load_probmap scales by 1/255. Files with maxval < 255 are rescaled to the
// 0..255 range first.

#include <png.h>

#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vtopo/grid.hpp"

namespace vtopo {

class DecodeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

using Gray8 = Grid<std::uint8_t>;

namespace detail {

class PgmCursor {
public:
    explicit PgmCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const auto ch = bytes_[pos_];
            if (ch == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else if (std::isspace(ch)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long read_uint(const char* field) {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
            throw DecodeError(std::string("PGM: missing or malformed ") + field);
        }
        long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > 1'000'000'000L) {
                throw DecodeError(std::string("PGM: ") + field + " out of range");
            }
            ++pos_;
        }
        return v;
    }

    std::size_t pos() const noexcept { return pos_; }
    void advance(std::size_t n) noexcept { pos_ += n; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    std::uint8_t at(std::size_t i) const noexcept { return bytes_[i]; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::uint8_t rescale_to_8bit(long v, long maxval) {
    if (maxval == 255) {
        return static_cast<std::uint8_t>(v);
    }
    return static_cast<std::uint8_t>((v * 255 * 2 + maxval) / (2 * maxval));
}

inline Gray8 decode_pgm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
        throw DecodeError("PGM: bad magic number (expected P2 or P5)");
    }
    const bool ascii = bytes[1] == '2';
    PgmCursor cur(bytes);
    cur.advance(2);
    const long width = cur.read_uint("width");
    const long height = cur.read_uint("height");
    const long maxval = cur.read_uint("maxval");
    if (width < 1 || height < 1) {
        throw DecodeError("PGM: width and height must be positive");
    }
    if (maxval < 1 || maxval > 255) {
        throw DecodeError("PGM: unsupported bit depth (maxval " + std::to_string(maxval) +
                          ", only 8-bit images are supported)");
    }
    Gray8 img(static_cast<int>(width), static_cast<int>(height));
    if (ascii) {
        for (std::size_t i = 0; i < img.size(); ++i) {
            const long v = cur.read_uint("pixel value");
            if (v > maxval) {
                throw DecodeError("PGM: pixel value " + std::to_string(v) + " exceeds maxval");
            }
            img[i] = rescale_to_8bit(v, maxval);
        }
    } else {
        // Exactly one whitespace byte separates maxval from the raster.
        if (cur.remaining() < 1 || !std::isspace(cur.at(cur.pos()))) {
            throw DecodeError("PGM: missing separator before raster");
        }
        cur.advance(1);
        if (cur.remaining() < img.size()) {
            throw DecodeError("PGM: truncated raster (" + std::to_string(cur.remaining()) + " of " +
                              std::to_string(img.size()) + " bytes)");
        }
        for (std::size_t i = 0; i < img.size(); ++i) {
            const long v = cur.at(cur.pos() + i);
            if (v > maxval) {
                throw DecodeError("PGM: pixel value " + std::to_string(v) + " exceeds maxval");
            }
            img[i] = rescale_to_8bit(v, maxval);
        }
    }
    return img;
}

struct PngReadState {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

inline void png_read_from_span(png_structp png, png_bytep out, png_size_t n) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->pos + n > st->bytes.size()) {
        png_error(png, "truncated data");
    }
    std::memcpy(out, st->bytes.data() + st->pos, n);
    st->pos += n;
}

inline void png_error_to_longjmp(png_structp png, png_const_charp msg) {
    auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
    if (buf != nullptr) {
        *buf = msg;
    }
    png_longjmp(png, 1);
}

inline void png_warning_ignore(png_structp, png_const_charp) {}

inline Gray8 decode_png(std::span<const std::uint8_t> bytes) {
    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_to_longjmp,
                                             png_warning_ignore);
    if (png == nullptr) {
        throw DecodeError("PNG: failed to initialise decoder");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DecodeError("PNG: failed to initialise decoder");
    }
    PngReadState state{bytes, 0};
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int bit_depth = 0;
    int color_type = 0;
    std::string field_error;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError("PNG: " + message);
    }
    png_set_read_fn(png, &state, png_read_from_span);
    png_read_info(png, info);
    png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (color_type != PNG_COLOR_TYPE_GRAY) {
        field_error = "PNG: unsupported color type " + std::to_string(color_type) +
                      " (only grayscale without alpha is supported)";
    } else if (bit_depth != 8) {
        field_error = "PNG: unsupported bit depth " + std::to_string(bit_depth) + " (expected 8)";
    } else if (width == 0 || height == 0 || width > 1u << 20 || height > 1u << 20) {
        field_error = "PNG: unsupported image dimensions";
    }
    if (field_error.empty()) {
        pixels.resize(static_cast<std::size_t>(width) * height);
        rows.resize(height);
        for (png_uint_32 r = 0; r < height; ++r) {
            rows[r] = pixels.data() + static_cast<std::size_t>(r) * width;
        }
        png_read_image(png, rows.data());
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (!field_error.empty()) {
        throw DecodeError(field_error);
    }
    return Gray8(static_cast<int>(width), static_cast<int>(height), std::move(pixels));
}

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

inline void png_flush_noop(png_structp) {}

}  // namespace detail

[[nodiscard]] inline Gray8 decode_gray8(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
        return detail::decode_png(bytes);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P') {
        return detail::decode_pgm(bytes);
    }
    throw DecodeError("unrecognised image format (expected PGM P2/P5 or PNG signature)");
}

[[nodiscard]] inline std::vector<std::uint8_t> encode_pgm(const Gray8& img) {
    std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.values().begin(), img.values().end());
    return out;
}

[[nodiscard]] inline std::vector<std::uint8_t> encode_png(const Gray8& img) {
    std::vector<std::uint8_t> out;
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message,
                                              detail::png_error_to_longjmp, detail::png_warning_ignore);
    if (png == nullptr) {
        throw IoError("PNG: failed to initialise encoder");
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("PNG: failed to initialise encoder");
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
    Gray8 copy = img;
    for (int r = 0; r < img.height(); ++r) {
        rows[static_cast<std::size_t>(r)] = copy.values().data() + static_cast<std::size_t>(r) * img.width();
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG: " + message);
    }
    png_set_write_fn(png, &out, detail::png_write_to_vector, detail::png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

[[nodiscard]] inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

/// Chooses PNG for a ".png" extension, binary PGM otherwise.
inline void save_gray8(const Gray8& img, const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& ch : ext) {
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    const auto bytes = ext == ".png" ? encode_png(img) : encode_pgm(img);
    write_file_bytes(path, bytes);
}

[[nodiscard]] inline BinaryMask mask_from_gray8(const Gray8& img) {
    BinaryMask m(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) {
        m[i] = img[i] >= 128 ? 1 : 0;
    }
    return m;
}

[[nodiscard]] inline ProbMap probmap_from_gray8(const Gray8& img) {
    ProbMap p(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) {
        p[i] = static_cast<double>(img[i]) / 255.0;
    }
    return p;
}

[[nodiscard]] inline BinaryMask load_mask(std::span<const std::uint8_t> image_bytes) {
    return mask_from_gray8(decode_gray8(image_bytes));
}

[[nodiscard]] inline BinaryMask load_mask(const std::filesystem::path& path) {
    return load_mask(read_file_bytes(path));
}

[[nodiscard]] inline ProbMap load_probmap(std::span<const std::uint8_t> image_bytes) {
    return probmap_from_gray8(decode_gray8(image_bytes));
}

[[nodiscard]] inline ProbMap load_probmap(const std::filesystem::path& path) {
    return load_probmap(read_file_bytes(path));
}

/// Foreground is written as 255, background as 0.
inline void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
    Gray8 img(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        img[i] = mask[i] ? 255 : 0;
    }
    save_gray8(img, path);
}

/// Linear rescale so the maximum maps to 255 (round half up); an all-zero
/// grid stays all-zero.
[[nodiscard]] inline Gray8 heatmap_image(const Grid<double>& counts) {
    double max_count = 0.0;
    for (double v : counts.values()) {
        if (v < 0.0 || !std::isfinite(v)) {
            throw Error("heatmap counts must be finite and non-negative");
        }
        max_count = std::max(max_count, v);
    }
    Gray8 img(counts.width(), counts.height());
    if (max_count == 0.0) {
        return img;
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double scaled = std::floor(counts[i] * 255.0 / max_count + 0.5);
        img[i] = static_cast<std::uint8_t>(std::min(255.0, scaled));
    }
    return img;
}

inline void save_heatmap(const Grid<double>& counts, const std::filesystem::path& path) {
    save_gray8(heatmap_image(counts), path);
}

}  // namespace vtopo
