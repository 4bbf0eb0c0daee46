#pragma once

// Synthetic surfaces: a flat "natural" surface, pitted "engraved" surfaces on
// a jittered grid, and correlated Gaussian noise.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "topotex/grid_io.hpp"

namespace topotex {

struct SynthConfig {
    std::size_t height = 256;
    std::size_t width = 256;
    double spacing_mean = 20.0;
    double spacing_jitter = 5.0;
    double pit_depth = 4.0;
    double pit_sigma = 0.0;  // 0 selects spacing_mean / 4
    double noise_rms = 1.0;
    double noise_corr_len = 8.0;
    std::uint64_t seed = 0;

    double effective_pit_sigma() const { return pit_sigma > 0.0 ? pit_sigma : spacing_mean / 4.0; }
    void validate() const;
};

DepthMap gen_flat(std::size_t height, std::size_t width);

struct Engraving {
    DepthMap surface;
    std::vector<std::array<double, 2>> centers;  // (row, col)
    double pit_sigma = 0.0;
};

/// Pits subtract depth x exp(-d^2 / 2 sigma^2) (cut off beyond 6 sigma) around
/// centers at spacing/2 + k spacing per axis, each jittered uniformly in
/// [-jitter, jitter].
Engraving gen_engraved(const SynthConfig& cfg);

/// Gaussian-filtered white noise (kernel sd = corr_len, computed with margins
/// so the border is not attenuated), shifted to zero sample mean and scaled to
/// the exact sample RMS.
DepthMap gen_noise_field(std::size_t height, std::size_t width, double corr_len, double rms, std::uint64_t seed);

/// Elementwise sum, then global z-standardization.
DepthMap compose(const DepthMap& surface, const DepthMap& noise);

/// Class 1 within `radius` of any center, class 2 elsewhere.
LabelMask pit_mask(std::size_t height, std::size_t width, const std::vector<std::array<double, 2>>& centers,
                   double radius);

struct SynthMap {
    std::string id;
    std::string surface;  // natural, engraved_i, engraved_ii
    std::string split;    // train, test
    DepthMap map;
    LabelMask mask;
};

struct DatasetConfig {
    std::size_t size = 256;
    std::size_t natural_per_split = 2;
    std::size_t engraved_per_split = 2;  // alternating engraved_i / engraved_ii
    double spacing_i = 20.0;
    double spacing_ii = 30.0;
    double jitter = 5.0;
    SynthConfig base;  // depth, sigma, noise settings
};

std::vector<SynthMap> make_dataset(const DatasetConfig& cfg, std::uint64_t seed);

}  // namespace topotex
