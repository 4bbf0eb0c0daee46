#pragma once

// RUSBoost over depth-limited decision trees, feature rankings and selection.
//
// Classes are 1 (minority, engraved) and 2 (majority, natural). Internally a
// tree votes +1 for class 1 and -1 for class 2.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "topotex/descriptors.hpp"

namespace topotex {

/// Rectangular row-major feature table with one class label per row.
/// Labels are 1 or 2 for training data, 0 when unknown.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols);
    FeatureMatrix(std::vector<std::vector<double>> rows, std::vector<int> labels,
                  std::vector<std::string> column_names = {});

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<int>& labels() { return labels_; }
    const std::vector<int>& labels() const { return labels_; }
    std::vector<std::string>& column_names() { return names_; }
    const std::vector<std::string>& column_names() const { return names_; }

    FeatureMatrix select_rows(const std::vector<std::size_t>& idx) const;
    FeatureMatrix select_columns(const std::vector<std::size_t>& idx) const;

    /// Rejects non-finite entries, labels outside {1,2} (or {0,1,2} when
    /// unlabeled rows are allowed) and name/column count mismatches.
    void validate(bool allow_unlabeled = false) const;

    std::size_t count(int label) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
    std::vector<int> labels_;
    std::vector<std::string> names_;
};

/// Horizontal concatenation; rows and labels must agree.
FeatureMatrix hconcat(const FeatureMatrix& a, const FeatureMatrix& b);

/// Concatenates in argument order. Empty vectors are identities; non-empty
/// vectors must carry the same patch_id. Descriptor tags are joined with '+'.
FeatureVector concat_features(const std::vector<FeatureVector>& vs);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;   // x[feature] <= threshold
    int right = -1;
    double vote = 1.0;      // leaf output, +1 or -1
    double gain = 0.0;      // node weight x Gini decrease, split nodes only
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double vote(std::span<const double> x) const;
};

struct TreeParams {
    int max_depth = 3;
};

/// Weighted Gini tree on the rows listed in `sample` (weights parallel to it).
/// Thresholds are midpoints between distinct values; ties resolved towards the
/// lower feature index and lower threshold.
DecisionTree fit_tree(const FeatureMatrix& X, const std::vector<std::size_t>& sample,
                      const std::vector<double>& weights, const TreeParams& params);

struct BoostParams {
    int rounds = 200;
    int max_depth = 3;
    bool undersample = true;  // false gives plain discrete AdaBoost
    /// Majority rows kept per round = ratio x minority count (capped).
    double balance_ratio = 1.0;
};

struct BoostModel {
    BoostParams params;
    std::uint64_t seed = 0;
    std::size_t n_features = 0;
    std::string provenance;  // config hash of the training features, may be empty
    std::vector<DecisionTree> trees;
    std::vector<double> alpha;

    /// sum alpha_t h_t(x) over the first `rounds` learners (all when rounds < 0).
    double margin(std::span<const double> x, int rounds = -1) const;
};

struct Prediction {
    int label = 1;
    double score = 0.0;
};

/// Class 1 iff margin >= 0.
Prediction predict(const BoostModel& m, std::span<const double> x, int rounds = -1);
std::vector<int> predict_labels(const BoostModel& m, const FeatureMatrix& X, int rounds = -1);

struct RoundRecord {
    std::size_t class1 = 0;  // rows of each class in the round's training subset
    std::size_t class2 = 0;
    double error = 0.0;
    double alpha = 0.0;
};

/// Discrete AdaBoost where each round's learner sees the minority class plus a
/// weighted random undersample of the majority class drawn without replacement.
/// Round t draws from derive_seed(seed, "rus-round", t), so a longer run
/// extends a shorter one.
BoostModel rusboost_train(const FeatureMatrix& X, const BoostParams& params, std::uint64_t seed,
                          std::vector<RoundRecord>* trace = nullptr);

void save_model(const BoostModel& m, std::ostream& out);
BoostModel load_model(std::istream& in);

enum class RankingMethod { gini, fisher, combined, random };

struct FeatureRanking {
    RankingMethod method = RankingMethod::fisher;
    std::vector<double> scores;            // higher is better
    std::vector<std::size_t> degenerate;   // fisher: columns with both class variances zero
};

/// Per column: sum over splits of (node weight x Gini decrease), each tree scaled by |alpha|.
FeatureRanking gini_importance(const BoostModel& m);

/// (mu1 - mu2)^2 / (var1 + var2), population variances; 0 when both variances vanish.
FeatureRanking fisher_scores(const FeatureMatrix& X);

/// Score = -(rank_a + rank_b) / 2 with 1-based ranks (ties to the lower index).
FeatureRanking combined_ranking(const FeatureRanking& gini, const FeatureRanking& fisher);

/// A uniformly random order drawn from the seed.
FeatureRanking random_ranking(std::size_t cols, std::uint64_t seed);

/// 1-based rank positions, best first; equal scores ranked by column index.
std::vector<std::size_t> rank_positions(const std::vector<double>& scores);

/// The ceil(pct/100 x cols) best columns, returned in ascending column order.
std::vector<std::size_t> select_features(const FeatureRanking& r, double pct);

std::string to_string(RankingMethod m);
RankingMethod parse_ranking_method(const std::string& s);

}  // namespace topotex
