#pragma once

// Planar C×H×W images with samples in [-1,1], PNG encode/decode and
// bilinear resizing.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "wordgan/error.hpp"

namespace wordgan {

struct Image {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pixels;  // planar, [-1,1]

    Image() = default;
    Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
        : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

    float& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return pixels[(c * height + y) * width + x]; }
    std::size_t size() const { return pixels.size(); }
    bool operator==(const Image&) const = default;
};

inline std::uint8_t to_byte(float v) {
    const float scaled = (std::clamp(v, -1.0f, 1.0f) + 1.0f) * 127.5f;
    return static_cast<std::uint8_t>(std::lround(scaled));
}

inline float from_byte(std::uint8_t b) { return static_cast<float>(b) / 127.5f - 1.0f; }

// Bilinear resampling with pixel-center alignment.
inline Image resize_bilinear(const Image& src, std::size_t height, std::size_t width) {
    if (src.height == height && src.width == width) return src;
    Image out(src.channels, height, width);
    const double sy = static_cast<double>(src.height) / height;
    const double sx = static_cast<double>(src.width) / width;
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (std::size_t c = 0; c < src.channels; ++c) {
                const double top = (1 - wx) * src.at(c, y0, x0) + wx * src.at(c, y0, x1);
                const double bottom = (1 - wx) * src.at(c, y1, x0) + wx * src.at(c, y1, x1);
                out.at(c, y, x) = static_cast<float>((1 - wy) * top + wy * bottom);
            }
        }
    }
    return out;
}

// Places images side by side; all must share channels and height.
inline Image hstack(const std::vector<Image>& images) {
    if (images.empty()) throw Error("hstack of zero images");
    std::size_t width = 0;
    for (const auto& im : images) {
        if (im.channels != images[0].channels || im.height != images[0].height)
            throw Error("hstack requires equal channels and height");
        width += im.width;
    }
    Image out(images[0].channels, images[0].height, width);
    std::size_t x0 = 0;
    for (const auto& im : images) {
        for (std::size_t c = 0; c < im.channels; ++c)
            for (std::size_t y = 0; y < im.height; ++y)
                for (std::size_t x = 0; x < im.width; ++x) out.at(c, y, x0 + x) = im.at(c, y, x);
        x0 += im.width;
    }
    return out;
}

namespace detail {

inline void png_error_fn(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
inline void png_warning_fn(png_structp, png_const_charp) {}

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}
inline void png_flush_noop(png_structp) {}

struct PngReadSource {
    const std::vector<std::uint8_t>* bytes;
    std::size_t offset;
};

inline void png_read_from_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
    if (src->offset + length > src->bytes->size()) png_error(png, "unexpected end of data");
    std::copy_n(src->bytes->data() + src->offset, length, data);
    src->offset += length;
}

}  // namespace detail

// 8-bit RGB or grayscale PNG bytes.
inline std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.channels != 1 && image.channels != 3) throw Error("PNG encoding supports 1 or 3 channels");
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_fn,
                                              detail::png_warning_fn);
    if (!png) throw IoError("png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    struct Cleanup {
        png_structp* p;
        png_infop* i;
        ~Cleanup() { png_destroy_write_struct(p, i); }
    } cleanup{&png, &info};
    png_set_write_fn(png, &out, detail::png_write_to_vector, detail::png_flush_noop);
    const int color = image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(image.width * image.channels);
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x)
            for (std::size_t c = 0; c < image.channels; ++c) row[x * image.channels + c] = to_byte(image.at(c, y, x));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    return out;
}

// Any PNG, normalized to 8-bit RGB.
inline Image decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG image");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_fn,
                                             detail::png_warning_fn);
    if (!png) throw IoError("png: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    struct Cleanup {
        png_structp* p;
        png_infop* i;
        ~Cleanup() { png_destroy_read_struct(p, i, nullptr); }
    } cleanup{&png, &info};
    detail::PngReadSource src{&bytes, 0};
    png_set_read_fn(png, &src, detail::png_read_from_vector);
    png_read_info(png, info);
    const auto bit_depth = png_get_bit_depth(png, info);
    const auto color = png_get_color_type(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const std::size_t width = png_get_image_width(png, info);
    const std::size_t height = png_get_image_height(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != width * 3) throw IoError("png: unexpected row layout after conversion");
    std::vector<std::uint8_t> raw(rowbytes * height);
    std::vector<png_bytep> rows(height);
    for (std::size_t y = 0; y < height; ++y) rows[y] = raw.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    Image image(3, height, width);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t c = 0; c < 3; ++c) image.at(c, y, x) = from_byte(raw[y * rowbytes + x * 3 + c]);
    return image;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Writes to a sibling temporary and renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename into " + path.string());
    }
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

inline void write_png(const std::filesystem::path& path, const Image& image) {
    auto bytes = encode_png(image);
    write_file_atomic(path, bytes.data(), bytes.size());
}

inline Image read_png(const std::filesystem::path& path) {
    try {
        return decode_png(read_file_bytes(path));
    } catch (const IoError& e) {
        throw IoError("unreadable image " + path.string() + ": " + e.what());
    }
}

}  // namespace wordgan
