#pragma once

// Evaluation: DSC, the repeated subset/CV protocol, stability analyses and
// PI discriminativity maps.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "topotex/feature_csv.hpp"
#include "topotex/grid_io.hpp"
#include "topotex/learn.hpp"
#include "topotex/pipeline.hpp"

namespace topotex {

/// Class-1 overlap counts, accumulated over any number of masks.
struct Overlap {
    std::size_t pred = 0;   // |X|
    std::size_t truth = 0;  // |Y|
    std::size_t both = 0;   // |X n Y|

    void add(int predicted, int actual) {
        pred += predicted == 1;
        truth += actual == 1;
        both += predicted == 1 && actual == 1;
    }
    /// 2|X n Y| / (|X| + |Y|); 1 when both sets are empty.
    double dsc() const;
};

double dsc(const LabelMask& pred, const LabelMask& truth);

/// Sum |a - b| / sum (|a| + |b|); 0 when both are all zero.
double normalized_difference(std::span<const double> a, std::span<const double> b);
double normalized_difference(const Grid<double>& a, const Grid<double>& b);

/// Pixel classes from patch votes: class 1 when class-1 votes >= class-2
/// votes, class 2 for pixels no patch covers.
LabelMask rasterize_votes(std::size_t height, std::size_t width, std::size_t patch_size,
                          const std::vector<std::pair<std::size_t, std::size_t>>& origins,
                          const std::vector<int>& classes);

/// Held-out data for the protocol. Features are public with labels removed;
/// the pixel truth is private and only reachable through score().
class EvaluationSet {
public:
    /// `truth` holds one mask per source, in source order.
    EvaluationSet(const FeatureTable& table, std::vector<LabelMask> truth);

    const FeatureMatrix& features() const { return features_; }
    std::size_t sources() const { return sources_.size(); }

    /// Rasterizes one predicted class per row and pools the class-1 overlap
    /// over all sources. Each call is one label access.
    double score(const std::vector<int>& predicted) const;

    /// DSC of predicting class 2 everywhere (one label access).
    double trivial_score() const;

    std::size_t label_accesses() const { return accesses_; }
    void on_label_access(std::function<void()> hook) { hook_ = std::move(hook); }

private:
    void touch() const;

    FeatureMatrix features_;
    std::size_t patch_size_;
    std::vector<FeatureSource> sources_;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> origins_;  // per source
    std::vector<LabelMask> truth_;
    mutable std::size_t accesses_ = 0;
    std::function<void()> hook_;
};

/// Pixel truth reconstructed from patch labels by the same vote (for feature
/// files without separate masks).
std::vector<LabelMask> truth_from_patch_labels(const FeatureTable& table);

struct SelectionConfig {
    bool enabled = false;
    RankingMethod method = RankingMethod::fisher;
    double percent = 100.0;
};

struct ProtocolConfig {
    int repetitions = 10;
    double subset_fraction = 0.5;
    int folds = 5;
    std::vector<int> depths{1, 2, 3};
    std::vector<int> rounds{50, 100, 200};
    double balance_ratio = 1.0;
    SelectionConfig selection;

    void validate() const;
};

struct RepetitionResult {
    std::uint64_t seed = 0;
    std::size_t subset_rows = 0;
    std::size_t features = 0;
    int depth = 0;
    int rounds = 0;
    double cv_dsc = 0.0;
    double dsc = 0.0;
};

struct ProtocolReport {
    std::uint64_t master_seed = 0;
    std::vector<RepetitionResult> repetitions;
    double mean = 0.0;
    double std = 0.0;  // population
    double trivial_dsc = 0.0;
};

/// Stratified subset of the training rows per repetition, stratified k-fold
/// CV over the depth x rounds grid (patch-level class-1 DSC), final model on
/// the whole subset, then one scored prediction of the test set.
/// `observer` receives "cv", "final", "score" events in order.
ProtocolReport run_protocol(const FeatureMatrix& train, const EvaluationSet& test, const ProtocolConfig& cfg,
                            std::uint64_t master_seed,
                            const std::function<void(const std::string&, int)>& observer = {});

/// Stratified random subset: round(fraction x count) rows of each class.
std::vector<std::size_t> stratified_subset(const std::vector<int>& labels, double fraction, std::uint64_t seed);

/// Fold id per row, each class spread round-robin over a shuffled order.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed);

struct StabilityTrial {
    double magnitude = 0.0;  // SNR in dB or offset in pixels
    std::size_t patch = 0;   // index of the sampled patch
    double patch_diff = 0.0;
    double pi_diff = 0.0;
};

struct StabilityReport {
    std::string kind;  // noise or displacement
    std::string prefilter;
    std::vector<StabilityTrial> trials;

    std::vector<double> magnitudes() const;
    double mean_pi_diff(double magnitude) const;
    double mean_patch_diff(double magnitude) const;
};

/// Adds zero-mean Gaussian noise of power var(patch) / 10^(snr/10) to up to
/// `max_patches` patches chosen by seed and compares PIs (all channels).
StabilityReport noise_stability(const std::vector<Patch>& patches, const std::vector<double>& snr_levels,
                                const DescriptorConfig& cfg, std::uint64_t seed, std::size_t max_patches = 100);

/// Compares each sampled patch with the patch shifted along the columns.
StabilityReport displacement_stability(const std::vector<DepthMap>& maps, const std::vector<std::size_t>& offsets,
                                       const DescriptorConfig& cfg, std::size_t patch_size, std::size_t n_patches,
                                       std::uint64_t seed);

struct PiColumn {
    std::size_t column = 0;
    int channel = 0;
    int birth = 0;  // row of the PI
    int death = 0;  // column of the PI
};

/// PI columns among the names ("pi_b{i}_d{j}", optionally "c{k}/" prefixed).
std::vector<PiColumn> pi_columns(const std::vector<std::string>& names);

struct ImportanceMaps {
    Grid<double> fisher;
    Grid<double> gini;
};

/// Fisher and Gini scores placed on the PI triangle, summed over channels.
/// Throws when no column is a PI pixel.
ImportanceMaps importance_maps(const FeatureMatrix& X, const BoostModel& m);

/// Mean PI per class (keys 1 and 2), summed over channels.
std::map<int, Grid<double>> class_average_pi(const FeatureMatrix& X);

/// 8-connected regions of pixels >= max/2 on and above the diagonal.
int half_max_regions(const Grid<double>& pi);

struct LocalityCheck {
    double top_decile_median = 0.0;  // median (death bin - birth bin) of the top 10% pixels
    double all_median = 0.0;         // same over every pixel on or above the diagonal
    bool near_diagonal() const { return top_decile_median < all_median; }
};

LocalityCheck importance_locality(const Grid<double>& map);

}  // namespace topotex
