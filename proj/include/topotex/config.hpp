#pragma once

// RunConfig: every tunable of a run in one JSON document. Missing keys take
// defaults; unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "topotex/eval.hpp"
#include "topotex/learn.hpp"
#include "topotex/pipeline.hpp"
#include "topotex/synth.hpp"

namespace topotex {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StabilityConfig {
    std::vector<double> snr_levels{5, 10, 15};
    std::vector<std::size_t> offsets{4, 8, 16, 32, 64};
    std::size_t patches = 100;
};

struct SweepConfig {
    std::vector<int> resolutions{8, 16, 32, 64};
    std::vector<double> sigmas{0.00025, 0.0005, 0.001, 0.002};
};

struct RunConfig {
    std::size_t patch_size = 128;
    std::size_t stride = 16;
    double label_threshold = 0.5;
    DescriptorConfig descriptor;
    BoostParams learner;
    ProtocolConfig protocol;
    StabilityConfig stability;
    SweepConfig sweep;
    DatasetConfig synth;
    std::uint64_t seed = 1;
};

/// Parses JSON text. When descriptor.pi.limits is absent it follows the
/// local normalization ([0, 1] for minmax, [-5, 5] otherwise).
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved config, pretty-printed.
std::string to_json(const RunConfig& cfg);

/// Compact canonical JSON of a descriptor config.
std::string descriptor_json(const DescriptorConfig& d);
DescriptorConfig parse_descriptor_json(const std::string& text);

/// Hash over the canonical descriptor config and the patch geometry.
std::string descriptor_hash(const DescriptorConfig& d, std::size_t patch_size, std::size_t stride);

}  // namespace topotex
