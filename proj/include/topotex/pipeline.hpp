#pragma once

// Patch -> feature vector: local normalization, optional prefiltering into
// channels, persistence per channel, then PI and/or PD_AGG per channel.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "topotex/cubical.hpp"
#include "topotex/descriptors.hpp"
#include "topotex/prefilter.hpp"

namespace topotex {

enum class PrefilterMode { none, schmid, mr, clbp };
enum class DescriptorKind { pi, pdagg };

struct DescriptorConfig {
    LocalNorm local_norm = LocalNorm::none;
    PrefilterMode prefilter = PrefilterMode::none;
    int filter_size = 49;
    ClbpParams clbp;
    std::vector<DescriptorKind> descriptors{DescriptorKind::pi};
    DegreeSet degrees = DegreeSet::both;
    EssentialPolicy essential = EssentialPolicy::cap_at_max_value;
    PiParams pi;  // pi.limits doubles as the diagram limits for unfiltered input
    /// Per-channel diagram limits. Empty means pi.limits for every channel.
    std::vector<Limits> channel_limits;

    void validate() const;
};

/// [0, 1] for min-max normalized patches, [-5, 5] otherwise.
Limits default_limits(LocalNorm norm);

std::size_t channel_count(const DescriptorConfig& cfg);

/// Per-channel length of the descriptor block.
std::size_t block_length(const DescriptorConfig& cfg);

/// Total feature length = channels x block length.
std::size_t feature_length(const DescriptorConfig& cfg);

/// pi_b{i}_d{j} / pdagg_{stat}, prefixed by c{k}/ when there are several channels.
std::vector<std::string> column_names(const DescriptorConfig& cfg);

/// Short tag such as "pi", "pdagg", "pi+pdagg".
std::string descriptor_tag(const DescriptorConfig& cfg);

class FeatureExtractor {
public:
    explicit FeatureExtractor(DescriptorConfig cfg);
    ~FeatureExtractor();

    const DescriptorConfig& config() const { return cfg_; }

    /// Normalized (and prefiltered) channels of one patch.
    std::vector<Grid<double>> channels(const Grid<double>& patch) const;

    /// Diagrams of every channel, limits and essential policy applied.
    std::vector<PersistenceDiagram> diagrams(const Grid<double>& patch) const;

    FeatureVector extract(const Grid<double>& patch) const;

    /// Descriptor blocks of diagrams already computed by diagrams(). Only the
    /// PI and PD_AGG parameters matter here, so a sweep can reuse diagrams.
    FeatureVector vectorize(const std::vector<PersistenceDiagram>& ds) const;

    /// PI of each channel, concatenated; used by the stability analyses.
    std::vector<double> pi_vector(const Grid<double>& patch) const;

    /// Rows in input order, computed in parallel.
    std::vector<std::vector<double>> extract_all(const std::vector<Patch>& patches) const;

    /// Sets channel_limits to mean +- 5 std of each channel's values over the
    /// given patches. No-op without prefiltering unless force is set.
    void fit_channel_limits(const std::vector<Patch>& patches, bool force = false);

private:
    Limits limits_for(std::size_t channel) const;
    const BankConvolver& convolver(std::size_t rows, std::size_t cols) const;

    DescriptorConfig cfg_;
    std::unique_ptr<FilterBank> bank_;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<BankConvolver>> convolvers_;
};

std::string to_string(PrefilterMode m);
PrefilterMode parse_prefilter(const std::string& s);
std::string to_string(DescriptorKind k);
DescriptorKind parse_descriptor_kind(const std::string& s);
std::string to_string(DegreeSet d);
DegreeSet parse_degree_set(const std::string& s);
std::string to_string(EssentialPolicy p);
EssentialPolicy parse_essential_policy(const std::string& s);

}  // namespace topotex
