#pragma once

// Depth maps, label masks and patch extraction.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "topotex/grid.hpp"

namespace topotex {

/// Raised for malformed input files. Carries the offending position when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::optional<std::size_t> row = {},
               std::optional<std::size_t> col = {});
    std::optional<std::size_t> row() const { return row_; }
    std::optional<std::size_t> col() const { return col_; }
    /// Same error with the file name prepended to the message.
    ParseError in_file(const std::string& file) const;

private:
    struct Prefixed {};
    ParseError(Prefixed, const std::string& message, std::optional<std::size_t> row,
               std::optional<std::size_t> col);
    std::optional<std::size_t> row_;
    std::optional<std::size_t> col_;
};

/// Dense grid of finite depths. Immutable after construction.
class DepthMap {
public:
    DepthMap() = default;
    /// Throws ParseError naming the first non-finite entry.
    explicit DepthMap(Grid<double> depth, std::optional<double> pixel_pitch_mm = {});

    std::size_t width() const { return depth_.cols(); }
    std::size_t height() const { return depth_.rows(); }
    double operator()(std::size_t r, std::size_t c) const { return depth_(r, c); }
    const Grid<double>& depth() const { return depth_; }
    std::optional<double> pixel_pitch_mm() const { return pitch_; }

private:
    Grid<double> depth_;
    std::optional<double> pitch_;
};

/// Per-pixel class ids. Class 1 is the engraved (minority) class, class 2 natural.
class LabelMask {
public:
    LabelMask() = default;
    explicit LabelMask(Grid<std::uint8_t> labels);

    std::size_t width() const { return labels_.cols(); }
    std::size_t height() const { return labels_.rows(); }
    std::uint8_t operator()(std::size_t r, std::size_t c) const { return labels_(r, c); }
    const Grid<std::uint8_t>& labels() const { return labels_; }

private:
    Grid<std::uint8_t> labels_;
};

struct Patch {
    std::size_t row = 0;  // origin in the source map
    std::size_t col = 0;
    Grid<double> values;  // square, size() x size()

    std::size_t size() const { return values.rows(); }
};

struct PatchSet {
    std::vector<Patch> patches;
    std::size_t patch_size = 0;
    std::size_t stride = 0;
    std::string source_id;
};

enum class MapFormat { csv, pgm16, f64raw };

MapFormat format_from_path(const std::filesystem::path& path);
MapFormat parse_map_format(const std::string& name);

DepthMap load_depth_map(const std::filesystem::path& path, MapFormat format);
void save_depth_map(const DepthMap& map, const std::filesystem::path& path, MapFormat format);

/// Label masks are PGM files (8- or 16-bit) holding only the values 1 and 2.
LabelMask load_label_mask(const std::filesystem::path& path);
void save_label_mask(const LabelMask& mask, const std::filesystem::path& path);

/// Zero mean, unit population standard deviation. Throws on a constant map.
DepthMap z_standardize_global(const DepthMap& map);

/// Square patches at origins (i*stride, j*stride) lying fully inside the map, row-major.
PatchSet extract_patches(const DepthMap& map, std::size_t size, std::size_t stride,
                         std::string source_id = {});

/// Number of patches extract_patches yields for the given geometry.
std::size_t patch_count(std::size_t height, std::size_t width, std::size_t size, std::size_t stride);

/// Class 1 iff the class-1 fraction under the patch footprint is >= threshold.
int patch_label(const LabelMask& mask, const Patch& patch, double class1_threshold = 0.5);

}  // namespace topotex
