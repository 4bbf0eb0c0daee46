#include "topotex/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "topotex/seed.hpp"

namespace topotex {

// ---- FeatureMatrix ----

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0), labels_(rows, 0) {}

FeatureMatrix::FeatureMatrix(std::vector<std::vector<double>> rows, std::vector<int> labels,
                             std::vector<std::string> column_names)
    : rows_(rows.size()), cols_(rows.empty() ? column_names.size() : rows.front().size()),
      labels_(std::move(labels)), names_(std::move(column_names)) {
    if (labels_.size() != rows_) throw std::invalid_argument("FeatureMatrix: label count differs from row count");
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw std::invalid_argument("FeatureMatrix: ragged rows");
        data_.insert(data_.end(), r.begin(), r.end());
    }
    if (!names_.empty() && names_.size() != cols_)
        throw std::invalid_argument("FeatureMatrix: column name count differs from column count");
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& idx) const {
    FeatureMatrix out(idx.size(), cols_);
    out.names_ = names_;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= rows_) throw std::out_of_range("select_rows: index out of range");
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(idx[k] * cols_), cols_,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(k * cols_));
        out.labels_[k] = labels_[idx[k]];
    }
    return out;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::size_t>& idx) const {
    FeatureMatrix out(rows_, idx.size());
    out.labels_ = labels_;
    for (std::size_t c : idx)
        if (c >= cols_) throw std::out_of_range("select_columns: index out of range");
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t k = 0; k < idx.size(); ++k) out(r, k) = (*this)(r, idx[k]);
    if (!names_.empty())
        for (std::size_t c : idx) out.names_.push_back(names_[c]);
    return out;
}

void FeatureMatrix::validate(bool allow_unlabeled) const {
    for (std::size_t i = 0; i < data_.size(); ++i)
        if (!std::isfinite(data_[i]))
            throw std::invalid_argument("FeatureMatrix: non-finite entry at row " + std::to_string(i / cols_) +
                                        ", column " + std::to_string(i % cols_));
    for (std::size_t r = 0; r < rows_; ++r) {
        const int l = labels_[r];
        if (!(l == 1 || l == 2 || (allow_unlabeled && l == 0)))
            throw std::invalid_argument("FeatureMatrix: bad label " + std::to_string(l) + " at row " +
                                        std::to_string(r));
    }
    if (!names_.empty() && names_.size() != cols_) throw std::invalid_argument("FeatureMatrix: name count mismatch");
}

std::size_t FeatureMatrix::count(int label) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

FeatureMatrix hconcat(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("hconcat: row counts differ");
    if (a.labels() != b.labels()) throw std::invalid_argument("hconcat: labels differ");
    FeatureMatrix out(a.rows(), a.cols() + b.cols());
    out.labels() = a.labels();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
        for (std::size_t c = 0; c < b.cols(); ++c) out(r, a.cols() + c) = b(r, c);
    }
    if (!a.column_names().empty() || !b.column_names().empty()) {
        auto names = a.column_names();
        names.resize(a.cols());
        auto nb = b.column_names();
        nb.resize(b.cols());
        names.insert(names.end(), nb.begin(), nb.end());
        out.column_names() = std::move(names);
    }
    return out;
}

FeatureVector concat_features(const std::vector<FeatureVector>& vs) {
    FeatureVector out;
    bool have_id = false;
    for (const auto& v : vs) {
        if (v.values.empty()) continue;
        if (!v.patch_id.empty()) {
            if (have_id && v.patch_id != out.patch_id)
                throw std::invalid_argument("concat_features: patch '" + v.patch_id + "' does not match '" +
                                            out.patch_id + "'");
            out.patch_id = v.patch_id;
            have_id = true;
        }
        out.values.insert(out.values.end(), v.values.begin(), v.values.end());
        if (!v.descriptor.empty()) out.descriptor += (out.descriptor.empty() ? "" : "+") + v.descriptor;
    }
    return out;
}

// ---- trees ----

double DecisionTree::vote(std::span<const double> x) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
        const auto& n = nodes[static_cast<std::size_t>(k)];
        k = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(k)].vote;
}

namespace {

double gini(double w1, double w2) {
    const double w = w1 + w2;
    if (w <= 0.0) return 0.0;
    const double p = w1 / w, q = w2 / w;
    return 1.0 - p * p - q * q;
}

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& X, const std::vector<std::size_t>& sample, const std::vector<double>& weights,
                int max_depth)
        : m_(sample.size()), d_(X.cols()), max_depth_(max_depth), cols_(X.cols(), std::vector<double>(m_)),
          w_(weights), pos_(m_) {
        for (std::size_t k = 0; k < m_; ++k) {
            const auto row = X.row(sample[k]);
            for (std::size_t f = 0; f < d_; ++f) cols_[f][k] = row[f];
            pos_[k] = X.labels()[sample[k]] == 1;
        }
        total_ = std::accumulate(w_.begin(), w_.end(), 0.0);
        if (!(total_ > 0.0)) throw std::invalid_argument("fit_tree: weights sum to zero");
    }

    DecisionTree build() {
        std::vector<std::size_t> all(m_);
        std::iota(all.begin(), all.end(), 0);
        grow(all, 0);
        return std::move(tree_);
    }

private:
    int grow(const std::vector<std::size_t>& idx, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double w1 = 0.0, w2 = 0.0;
        for (auto k : idx) (pos_[k] ? w1 : w2) += w_[k];
        tree_.nodes[static_cast<std::size_t>(id)].vote = w1 >= w2 ? 1.0 : -1.0;
        if (depth >= max_depth_ || w1 <= 0.0 || w2 <= 0.0) return id;

        const double wn = w1 + w2;
        const double g_node = gini(w1, w2);
        double best_gain = 1e-12 * wn / total_;
        int best_f = -1;
        double best_thr = 0.0;
        std::vector<std::size_t> order(idx);
        for (std::size_t f = 0; f < d_; ++f) {
            const auto& col = cols_[f];
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return col[a] < col[b] || (col[a] == col[b] && a < b);
            });
            double l1 = 0.0, l2 = 0.0;
            for (std::size_t p = 0; p + 1 < order.size(); ++p) {
                (pos_[order[p]] ? l1 : l2) += w_[order[p]];
                const double a = col[order[p]], b = col[order[p + 1]];
                if (a == b) continue;
                const double wl = l1 + l2, wr = wn - wl;
                const double decrease = g_node - (wl / wn) * gini(l1, l2) - (wr / wn) * gini(w1 - l1, w2 - l2);
                const double gain = wn / total_ * decrease;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = static_cast<int>(f);
                    double thr = a + (b - a) / 2.0;
                    if (!(thr < b)) thr = a;
                    best_thr = thr;
                }
            }
        }
        if (best_f < 0) return id;

        std::vector<std::size_t> left, right;
        for (auto k : idx) (cols_[static_cast<std::size_t>(best_f)][k] <= best_thr ? left : right).push_back(k);
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = best_f;
        node.threshold = best_thr;
        node.left = l;
        node.right = r;
        node.gain = best_gain;
        return id;
    }

    std::size_t m_, d_;
    int max_depth_;
    std::vector<std::vector<double>> cols_;
    const std::vector<double>& w_;
    std::vector<char> pos_;
    double total_ = 0.0;
    DecisionTree tree_;
};

}  // namespace

DecisionTree fit_tree(const FeatureMatrix& X, const std::vector<std::size_t>& sample,
                      const std::vector<double>& weights, const TreeParams& params) {
    if (sample.empty()) throw std::invalid_argument("fit_tree: empty sample");
    if (weights.size() != sample.size()) throw std::invalid_argument("fit_tree: weight count mismatch");
    if (params.max_depth < 0) throw std::invalid_argument("fit_tree: negative depth");
    return TreeBuilder(X, sample, weights, params.max_depth).build();
}

// ---- boosting ----

double BoostModel::margin(std::span<const double> x, int rounds) const {
    if (x.size() != n_features)
        throw std::invalid_argument("predict: expected " + std::to_string(n_features) + " features, got " +
                                    std::to_string(x.size()));
    const std::size_t t_end =
        rounds < 0 ? trees.size() : std::min(trees.size(), static_cast<std::size_t>(rounds));
    double s = 0.0;
    for (std::size_t t = 0; t < t_end; ++t) s += alpha[t] * trees[t].vote(x);
    return s;
}

Prediction predict(const BoostModel& m, std::span<const double> x, int rounds) {
    const double s = m.margin(x, rounds);
    return {s >= 0.0 ? 1 : 2, s};
}

std::vector<int> predict_labels(const BoostModel& m, const FeatureMatrix& X, int rounds) {
    std::vector<int> out(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict(m, X.row(r), rounds).label;
    return out;
}

BoostModel rusboost_train(const FeatureMatrix& X, const BoostParams& params, std::uint64_t seed,
                          std::vector<RoundRecord>* trace) {
    X.validate();
    if (params.rounds < 1) throw std::invalid_argument("rusboost: rounds must be >= 1");
    if (!(params.balance_ratio > 0.0)) throw std::invalid_argument("rusboost: balance_ratio must be positive");
    const std::size_t n = X.rows();
    const std::size_t n1 = X.count(1), n2 = X.count(2);
    if (n1 == 0 || n2 == 0) throw std::invalid_argument("rusboost: both classes must be present");
    const int minority = n1 <= n2 ? 1 : 2;
    if (trace) trace->clear();

    std::vector<std::size_t> min_rows, maj_rows;
    for (std::size_t r = 0; r < n; ++r) (X.labels()[r] == minority ? min_rows : maj_rows).push_back(r);
    const auto keep = std::min(
        maj_rows.size(),
        static_cast<std::size_t>(std::llround(params.balance_ratio * static_cast<double>(min_rows.size()))));

    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) y[r] = X.labels()[r] == 1 ? 1.0 : -1.0;
    std::vector<double> D(n, 1.0 / static_cast<double>(n));

    BoostModel model;
    model.params = params;
    model.seed = seed;
    model.n_features = X.cols();
    std::vector<std::pair<double, std::size_t>> keys;
    for (int t = 0; t < params.rounds; ++t) {
        std::vector<std::size_t> sample;
        if (params.undersample) {
            Rng rng(derive_seed(seed, "rus-round", static_cast<std::uint64_t>(t)));
            // weighted sampling without replacement: keep the largest log(u)/w keys
            keys.clear();
            for (auto r : maj_rows) {
                const double u = uniform_open(rng);
                keys.emplace_back(D[r] > 0.0 ? std::log(u) / D[r] : -HUGE_VAL, r);
            }
            std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(keep), keys.end(),
                              [](const auto& a, const auto& b) {
                                  return a.first > b.first || (a.first == b.first && a.second < b.second);
                              });
            sample = min_rows;
            for (std::size_t k = 0; k < keep; ++k) sample.push_back(keys[k].second);
            std::sort(sample.begin(), sample.end());
        } else {
            sample.resize(n);
            std::iota(sample.begin(), sample.end(), 0);
        }
        std::vector<double> w(sample.size());
        double ws = 0.0;
        for (std::size_t k = 0; k < sample.size(); ++k) ws += w[k] = D[sample[k]];
        for (auto& v : w) v /= ws;

        DecisionTree tree = fit_tree(X, sample, w, TreeParams{params.max_depth});

        std::vector<double> h(n);
        double err = 0.0, dsum = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            h[r] = tree.vote(X.row(r));
            if (h[r] != y[r]) err += D[r];
            dsum += D[r];
        }
        const double eps = std::clamp(err / dsum, 1e-10, 1.0 - 1e-10);
        const double a = 0.5 * std::log((1.0 - eps) / eps);
        double norm = 0.0;
        for (std::size_t r = 0; r < n; ++r) norm += D[r] *= std::exp(-a * y[r] * h[r]);
        for (auto& v : D) v /= norm;

        if (trace) {
            RoundRecord rec;
            for (auto r : sample) (X.labels()[r] == 1 ? rec.class1 : rec.class2)++;
            rec.error = eps;
            rec.alpha = a;
            trace->push_back(rec);
        }
        model.trees.push_back(std::move(tree));
        model.alpha.push_back(a);
    }
    return model;
}

// ---- model file ----

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
T expect_field(std::istream& in, const std::string& name) {
    std::string key;
    T value{};
    if (!(in >> key) || key != name) throw std::runtime_error("model file: expected '" + name + "', got '" + key + "'");
    if (!(in >> value)) throw std::runtime_error("model file: bad value for '" + name + "'");
    return value;
}

double parse_real(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::runtime_error("model file: bad number '" + s + "'");
    return v;
}

}  // namespace

void save_model(const BoostModel& m, std::ostream& out) {
    out << "topotex-boost-model 1\n";
    out << "rounds " << m.params.rounds << "\n";
    out << "max_depth " << m.params.max_depth << "\n";
    out << "undersample " << (m.params.undersample ? 1 : 0) << "\n";
    out << "balance_ratio " << g17(m.params.balance_ratio) << "\n";
    out << "seed " << m.seed << "\n";
    out << "features " << m.n_features << "\n";
    out << "provenance " << (m.provenance.empty() ? "-" : m.provenance) << "\n";
    out << "trees " << m.trees.size() << "\n";
    for (std::size_t t = 0; t < m.trees.size(); ++t) {
        out << "tree " << t << " alpha " << g17(m.alpha[t]) << " nodes " << m.trees[t].nodes.size() << "\n";
        for (const auto& n : m.trees[t].nodes)
            out << "node " << n.feature << ' ' << g17(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
                << g17(n.vote) << ' ' << g17(n.gain) << "\n";
    }
    out << "end\n";
}

BoostModel load_model(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "topotex-boost-model")
        throw std::runtime_error("model file: missing header");
    if (version != 1) throw std::runtime_error("model file: unsupported version " + std::to_string(version));
    BoostModel m;
    m.params.rounds = expect_field<int>(in, "rounds");
    m.params.max_depth = expect_field<int>(in, "max_depth");
    m.params.undersample = expect_field<int>(in, "undersample") != 0;
    m.params.balance_ratio = parse_real(expect_field<std::string>(in, "balance_ratio"));
    m.seed = expect_field<std::uint64_t>(in, "seed");
    m.n_features = expect_field<std::size_t>(in, "features");
    m.provenance = expect_field<std::string>(in, "provenance");
    if (m.provenance == "-") m.provenance.clear();
    const auto ntrees = expect_field<std::size_t>(in, "trees");
    for (std::size_t t = 0; t < ntrees; ++t) {
        const auto index = expect_field<std::size_t>(in, "tree");
        if (index != t) throw std::runtime_error("model file: trees out of order");
        m.alpha.push_back(parse_real(expect_field<std::string>(in, "alpha")));
        const auto nn = expect_field<std::size_t>(in, "nodes");
        DecisionTree tree;
        for (std::size_t k = 0; k < nn; ++k) {
            std::string tag, thr, vote, gain;
            TreeNode n;
            if (!(in >> tag >> n.feature >> thr >> n.left >> n.right >> vote >> gain) || tag != "node")
                throw std::runtime_error("model file: malformed node in tree " + std::to_string(t));
            n.threshold = parse_real(thr);
            n.vote = parse_real(vote);
            n.gain = parse_real(gain);
            const auto lim = static_cast<int>(nn);
            if (n.feature >= static_cast<int>(m.n_features) ||
                (n.feature >= 0 && (n.left <= 0 || n.left >= lim || n.right <= 0 || n.right >= lim)))
                throw std::runtime_error("model file: invalid node reference in tree " + std::to_string(t));
            tree.nodes.push_back(n);
        }
        if (tree.nodes.empty()) throw std::runtime_error("model file: empty tree");
        m.trees.push_back(std::move(tree));
    }
    std::string end;
    if (!(in >> end) || end != "end") throw std::runtime_error("model file: missing 'end'");
    return m;
}

// ---- rankings ----

FeatureRanking gini_importance(const BoostModel& m) {
    FeatureRanking r{RankingMethod::gini, std::vector<double>(m.n_features, 0.0), {}};
    for (std::size_t t = 0; t < m.trees.size(); ++t)
        for (const auto& n : m.trees[t].nodes)
            if (n.feature >= 0) r.scores[static_cast<std::size_t>(n.feature)] += std::abs(m.alpha[t]) * n.gain;
    return r;
}

FeatureRanking fisher_scores(const FeatureMatrix& X) {
    const std::size_t n1 = X.count(1), n2 = X.count(2);
    if (n1 == 0 || n2 == 0) throw std::invalid_argument("fisher_scores: both classes must be present");
    FeatureRanking out{RankingMethod::fisher, std::vector<double>(X.cols(), 0.0), {}};
    for (std::size_t c = 0; c < X.cols(); ++c) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t r = 0; r < X.rows(); ++r) (X.labels()[r] == 1 ? s1 : s2) += X(r, c);
        const double m1 = s1 / static_cast<double>(n1), m2 = s2 / static_cast<double>(n2);
        double v1 = 0.0, v2 = 0.0;
        for (std::size_t r = 0; r < X.rows(); ++r) {
            const double x = X(r, c);
            if (X.labels()[r] == 1) v1 += (x - m1) * (x - m1);
            else v2 += (x - m2) * (x - m2);
        }
        v1 /= static_cast<double>(n1);
        v2 /= static_cast<double>(n2);
        if (v1 + v2 > 0.0) {
            out.scores[c] = (m1 - m2) * (m1 - m2) / (v1 + v2);
        } else if (m1 != m2) {
            out.degenerate.push_back(c);
        }
    }
    return out;
}

std::vector<std::size_t> rank_positions(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<std::size_t> rank(scores.size());
    for (std::size_t p = 0; p < order.size(); ++p) rank[order[p]] = p + 1;
    return rank;
}

FeatureRanking combined_ranking(const FeatureRanking& gini, const FeatureRanking& fisher) {
    if (gini.scores.size() != fisher.scores.size()) throw std::invalid_argument("combined_ranking: length mismatch");
    const auto rg = rank_positions(gini.scores), rf = rank_positions(fisher.scores);
    FeatureRanking out{RankingMethod::combined, std::vector<double>(rg.size()), fisher.degenerate};
    for (std::size_t c = 0; c < rg.size(); ++c) out.scores[c] = -0.5 * static_cast<double>(rg[c] + rf[c]);
    return out;
}

FeatureRanking random_ranking(std::size_t cols, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "random-ranking"));
    std::vector<double> perm(cols);
    std::iota(perm.begin(), perm.end(), 0.0);
    for (std::size_t i = cols; i > 1; --i) std::swap(perm[i - 1], perm[uniform_below(rng, i)]);
    return {RankingMethod::random, std::move(perm), {}};
}

std::vector<std::size_t> select_features(const FeatureRanking& r, double pct) {
    if (!(pct > 0.0 && pct <= 100.0)) throw std::invalid_argument("select_features: pct must be in (0, 100]");
    const std::size_t cols = r.scores.size();
    auto k = static_cast<std::size_t>(std::ceil(pct * static_cast<double>(cols) / 100.0 - 1e-9));
    k = std::clamp<std::size_t>(k, std::min<std::size_t>(1, cols), cols);
    const auto rank = rank_positions(r.scores);
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < cols; ++c)
        if (rank[c] <= k) out.push_back(c);
    return out;
}

std::string to_string(RankingMethod m) {
    switch (m) {
        case RankingMethod::gini: return "gini";
        case RankingMethod::fisher: return "fisher";
        case RankingMethod::combined: return "combined";
        case RankingMethod::random: return "random";
    }
    return "?";
}

RankingMethod parse_ranking_method(const std::string& s) {
    if (s == "gini") return RankingMethod::gini;
    if (s == "fisher") return RankingMethod::fisher;
    if (s == "combined") return RankingMethod::combined;
    if (s == "random") return RankingMethod::random;
    throw std::invalid_argument("unknown ranking method '" + s + "'");
}

}  // namespace topotex
