#pragma once

// Feature matrix files.
//
// Line 1: '#' followed by one line of JSON metadata (descriptor tag, config
// hash, patch geometry, sources in row order, and the resolved descriptor
// config when known). Line 2: column names, the last one "label". Then one
// row per patch with a %.17g value per column and an integer label (0 when
// no mask was given).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "topotex/learn.hpp"

namespace topotex {

struct FeatureSource {
    std::string id;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t rows = 0;  // patches contributed, in extraction order
};

struct FeatureTable {
    std::string descriptor;
    std::string config_hash;  // 16 hex digits
    std::string config_json;  // resolved descriptor config, may be empty
    std::size_t patch_size = 0;
    std::size_t stride = 0;
    std::vector<FeatureSource> sources;
    FeatureMatrix matrix;
};

struct PatchRef {
    std::size_t source = 0;  // index into FeatureTable::sources
    std::size_t row = 0;     // patch origin
    std::size_t col = 0;
};

void write_feature_csv(const FeatureTable& t, const std::filesystem::path& path);
FeatureTable read_feature_csv(const std::filesystem::path& path);

/// Patch origins per row, reconstructed from the source geometry.
std::vector<PatchRef> patch_refs(const FeatureTable& t);

/// Column-wise concatenation of two tables over the same patches. The result's
/// hash covers both inputs in order.
FeatureTable concat_tables(const FeatureTable& a, const FeatureTable& b);

/// 16-digit lowercase hex of a 64-bit hash.
std::string hex64(std::uint64_t v);

}  // namespace topotex
