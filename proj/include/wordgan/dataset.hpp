#pragma once

// Captioned-image records: a procedurally rendered shapes dataset and the
// on-disk `images/<id>.png` + `captions/<id>.txt` layout.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wordgan/error.hpp"
#include "wordgan/image.hpp"

namespace wordgan {

struct CaptionedImage {
    std::string id;
    Image image;
    std::vector<std::string> captions;
    int class_id = 0;
};

// Condition-file key of one caption.
inline std::string caption_id(const CaptionedImage& record, std::size_t caption_index) {
    return record.id + "_" + std::to_string(caption_index);
}

struct NamedColor {
    std::string name;
    std::array<std::uint8_t, 3> rgb;
};

inline const std::vector<NamedColor>& default_palette() {
    static const std::vector<NamedColor> palette{
        {"red", {220, 30, 30}},     {"green", {30, 160, 40}},    {"blue", {30, 60, 220}},
        {"yellow", {235, 200, 20}}, {"purple", {140, 40, 170}},  {"orange", {245, 130, 20}},
        {"black", {20, 20, 20}},    {"pink", {240, 120, 180}},
    };
    return palette;
}

inline NamedColor palette_color(const std::string& name) {
    for (const auto& c : default_palette())
        if (c.name == name) return c;
    throw ConfigError("unknown color '" + name + "'");
}

enum class ShapeKind { circle, square, triangle };

inline std::string shape_name(ShapeKind s) {
    switch (s) {
        case ShapeKind::circle: return "circle";
        case ShapeKind::square: return "square";
        case ShapeKind::triangle: return "triangle";
    }
    return "?";
}

inline ShapeKind parse_shape(const std::string& name) {
    if (name == "circle") return ShapeKind::circle;
    if (name == "square") return ShapeKind::square;
    if (name == "triangle") return ShapeKind::triangle;
    throw ConfigError("unknown shape '" + name + "'");
}

struct SyntheticDatasetConfig {
    std::vector<ShapeKind> shapes{ShapeKind::circle, ShapeKind::square, ShapeKind::triangle};
    std::vector<NamedColor> colors{palette_color("red"), palette_color("green"), palette_color("blue"),
                                   palette_color("yellow")};
    std::vector<std::string> sizes{"small", "large"};
    std::size_t image_extent = 32;
    std::size_t samples_per_combination = 5;
    std::uint64_t seed = 1;

    void validate() const {
        if (shapes.empty() || colors.empty() || sizes.empty())
            throw ConfigError("synthetic dataset needs at least one shape, color and size");
        if (image_extent < 16) throw ConfigError("synthetic image extent must be at least 16");
        if (samples_per_combination == 0) throw ConfigError("samples_per_combination must be positive");
        for (const auto& s : sizes)
            if (s != "small" && s != "large") throw ConfigError("unknown size '" + s + "'");
    }

    std::size_t combinations() const { return shapes.size() * colors.size() * sizes.size(); }
};

// Eight-word caption templates; every record carries all of them.
inline std::vector<std::string> synthetic_captions(const std::string& shape, const std::string& color,
                                                   const std::string& size) {
    return {
        "one " + size + " " + color + " " + shape + " on a white background",
        "a " + color + " " + shape + " that is " + size + " on white",
        "this picture shows one " + size + " " + color + " " + shape + " shape",
    };
}

namespace detail {

inline bool inside_shape(ShapeKind shape, double px, double py, double cx, double cy, double r) {
    const double dx = px - cx, dy = py - cy;
    switch (shape) {
        case ShapeKind::circle: return dx * dx + dy * dy <= r * r;
        case ShapeKind::square: return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
        case ShapeKind::triangle: {
            // Upright isosceles triangle: apex at (cx, cy-r), base at y = cy+0.8r.
            const double top = cy - r, base = cy + 0.8 * r;
            if (py < top || py > base) return false;
            const double half = r * (py - top) / (base - top);
            return std::abs(dx) <= half;
        }
    }
    return false;
}

}  // namespace detail

inline double shape_radius(const std::string& size, std::size_t extent) {
    return (size == "large" ? 0.34 : 0.2) * static_cast<double>(extent);
}

// Records ordered by combination then sample; class-id encodes the
// (shape, color, size) combination.
inline std::vector<CaptionedImage> generate_synthetic_dataset(const SyntheticDatasetConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::vector<CaptionedImage> records;
    records.reserve(cfg.combinations() * cfg.samples_per_combination);
    const std::size_t extent = cfg.image_extent;
    int class_id = 0;
    for (auto shape : cfg.shapes)
        for (const auto& color : cfg.colors)
            for (const auto& size : cfg.sizes) {
                const double r = shape_radius(size, extent);
                std::uniform_real_distribution<double> center(r + 1.0, static_cast<double>(extent) - r - 1.0);
                for (std::size_t s = 0; s < cfg.samples_per_combination; ++s) {
                    const double cx = center(rng), cy = center(rng);
                    Image image(3, extent, extent, 1.0f);
                    for (std::size_t y = 0; y < extent; ++y)
                        for (std::size_t x = 0; x < extent; ++x)
                            if (detail::inside_shape(shape, x + 0.5, y + 0.5, cx, cy, r))
                                for (std::size_t c = 0; c < 3; ++c) image.at(c, y, x) = from_byte(color.rgb[c]);
                    CaptionedImage rec;
                    std::ostringstream id;
                    id.width(6);
                    id.fill('0');
                    id << records.size();
                    rec.id = id.str();
                    rec.image = std::move(image);
                    rec.captions = synthetic_captions(shape_name(shape), color.name, size);
                    rec.class_id = class_id;
                    records.push_back(std::move(rec));
                }
                ++class_id;
            }
    return records;
}

// Writes images/<id>.png, captions/<id>.txt and manifest.txt.
inline void write_dataset_dir(const std::filesystem::path& dir, const std::vector<CaptionedImage>& records,
                              std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "images", ec);
    if (!ec) fs::create_directories(dir / "captions", ec);
    if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());
    std::ostringstream manifest;
    manifest << "seed " << seed << "\nrecords " << records.size() << "\n";
    for (const auto& rec : records) {
        write_png(dir / "images" / (rec.id + ".png"), rec.image);
        std::string text;
        for (const auto& c : rec.captions) text += c + "\n";
        write_file_atomic(dir / "captions" / (rec.id + ".txt"), text);
        manifest << "record " << rec.id << " " << rec.class_id << "\n";
    }
    write_file_atomic(dir / "manifest.txt", manifest.str());
}

// Reads the directory layout, resizing to target_extent² and mapping
// [0,255] to [-1,1]. Class ids come from manifest.txt when present and
// otherwise from distinct first captions.
inline std::vector<CaptionedImage> load_image_caption_dir(const std::filesystem::path& dir,
                                                          std::size_t target_extent) {
    namespace fs = std::filesystem;
    const fs::path images = dir / "images", captions = dir / "captions";
    if (!fs::is_directory(images)) throw IoError("dataset has no images/ directory: " + dir.string());

    std::map<std::string, int> manifest_classes;
    if (std::ifstream mf(dir / "manifest.txt"); mf) {
        std::string line;
        while (std::getline(mf, line)) {
            std::istringstream fields(line);
            std::string key, id;
            int cls = 0;
            if (fields >> key && key == "record" && fields >> id >> cls) manifest_classes[id] = cls;
        }
    }

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(images))
        if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<CaptionedImage> records;
    std::map<std::string, int> caption_classes;
    for (const auto& file : files) {
        CaptionedImage rec;
        rec.id = file.stem().string();
        const fs::path cap = captions / (rec.id + ".txt");
        std::ifstream in(cap);
        if (!in) throw IoError("image " + file.filename().string() + " has no caption file " + cap.string());
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (!line.empty()) rec.captions.push_back(line);
        }
        if (rec.captions.empty()) throw IoError("caption file " + cap.string() + " is empty");
        rec.image = resize_bilinear(read_png(file), target_extent, target_extent);
        for (auto& v : rec.image.pixels) v = std::clamp(v, -1.0f, 1.0f);
        if (auto it = manifest_classes.find(rec.id); it != manifest_classes.end()) {
            rec.class_id = it->second;
        } else {
            auto [it2, inserted] =
                caption_classes.emplace(rec.captions.front(), static_cast<int>(caption_classes.size()));
            rec.class_id = it2->second;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace wordgan
