#include "topotex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <regex>
#include <set>
#include <stdexcept>

#include "topotex/parallel.hpp"
#include "topotex/seed.hpp"

namespace topotex {

double Overlap::dsc() const {
    if (pred + truth == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(pred + truth);
}

double dsc(const LabelMask& pred, const LabelMask& truth) {
    if (pred.height() != truth.height() || pred.width() != truth.width())
        throw std::invalid_argument("dsc: mask dimensions differ");
    Overlap o;
    const auto p = pred.labels().values(), t = truth.labels().values();
    for (std::size_t i = 0; i < p.size(); ++i) o.add(p[i], t[i]);
    return o.dsc();
}

double normalized_difference(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("normalized_difference: shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::abs(a[i] - b[i]);
        den += std::abs(a[i]) + std::abs(b[i]);
    }
    return den > 0.0 ? num / den : 0.0;
}

double normalized_difference(const Grid<double>& a, const Grid<double>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("normalized_difference: shape mismatch");
    return normalized_difference(a.values(), b.values());
}

LabelMask rasterize_votes(std::size_t height, std::size_t width, std::size_t patch_size,
                          const std::vector<std::pair<std::size_t, std::size_t>>& origins,
                          const std::vector<int>& classes) {
    if (origins.size() != classes.size()) throw std::invalid_argument("rasterize_votes: one class per patch needed");
    Grid<int> votes1(height, width, 0), votes2(height, width, 0);
    for (std::size_t k = 0; k < origins.size(); ++k) {
        const auto [r0, c0] = origins[k];
        if (r0 + patch_size > height || c0 + patch_size > width)
            throw std::out_of_range("rasterize_votes: patch outside the map");
        if (classes[k] != 1 && classes[k] != 2) throw std::invalid_argument("rasterize_votes: class must be 1 or 2");
        auto& v = classes[k] == 1 ? votes1 : votes2;
        for (std::size_t r = r0; r < r0 + patch_size; ++r)
            for (std::size_t c = c0; c < c0 + patch_size; ++c) ++v(r, c);
    }
    Grid<std::uint8_t> g(height, width, 2);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const int a = votes1.values()[i], b = votes2.values()[i];
        if (a + b > 0 && a >= b) g.values()[i] = 1;
    }
    return LabelMask(std::move(g));
}

// ---- EvaluationSet ----

namespace {

std::vector<std::vector<std::pair<std::size_t, std::size_t>>> origins_by_source(const FeatureTable& t) {
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> out(t.sources.size());
    for (const auto& ref : patch_refs(t)) out[ref.source].emplace_back(ref.row, ref.col);
    return out;
}

}  // namespace

EvaluationSet::EvaluationSet(const FeatureTable& table, std::vector<LabelMask> truth)
    : features_(table.matrix), patch_size_(table.patch_size), sources_(table.sources),
      origins_(origins_by_source(table)), truth_(std::move(truth)) {
    if (truth_.size() != sources_.size())
        throw std::invalid_argument("EvaluationSet: need one truth mask per source (" + std::to_string(sources_.size()) +
                                    "), got " + std::to_string(truth_.size()));
    for (std::size_t s = 0; s < sources_.size(); ++s)
        if (truth_[s].height() != sources_[s].height || truth_[s].width() != sources_[s].width)
            throw std::invalid_argument("EvaluationSet: mask of '" + sources_[s].id + "' has the wrong size");
    std::fill(features_.labels().begin(), features_.labels().end(), 0);
}

void EvaluationSet::touch() const {
    ++accesses_;
    if (hook_) hook_();
}

double EvaluationSet::score(const std::vector<int>& predicted) const {
    if (predicted.size() != features_.rows())
        throw std::invalid_argument("EvaluationSet::score: expected one prediction per row");
    touch();
    Overlap o;
    std::size_t offset = 0;
    for (std::size_t s = 0; s < sources_.size(); ++s) {
        const auto& org = origins_[s];
        const std::vector<int> cls(predicted.begin() + static_cast<std::ptrdiff_t>(offset),
                                   predicted.begin() + static_cast<std::ptrdiff_t>(offset + org.size()));
        offset += org.size();
        const LabelMask pred = rasterize_votes(sources_[s].height, sources_[s].width, patch_size_, org, cls);
        const auto p = pred.labels().values(), t = truth_[s].labels().values();
        for (std::size_t i = 0; i < p.size(); ++i) o.add(p[i], t[i]);
    }
    return o.dsc();
}

double EvaluationSet::trivial_score() const { return score(std::vector<int>(features_.rows(), 2)); }

std::vector<LabelMask> truth_from_patch_labels(const FeatureTable& table) {
    const auto origins = origins_by_source(table);
    std::vector<LabelMask> out;
    std::size_t offset = 0;
    for (std::size_t s = 0; s < table.sources.size(); ++s) {
        std::vector<int> cls;
        for (std::size_t k = 0; k < origins[s].size(); ++k) cls.push_back(table.matrix.labels()[offset + k]);
        offset += origins[s].size();
        out.push_back(
            rasterize_votes(table.sources[s].height, table.sources[s].width, table.patch_size, origins[s], cls));
    }
    return out;
}

// ---- protocol ----

void ProtocolConfig::validate() const {
    if (repetitions < 1) throw std::invalid_argument("protocol: repetitions must be >= 1");
    if (!(subset_fraction > 0.0 && subset_fraction <= 1.0))
        throw std::invalid_argument("protocol: subset_fraction must be in (0, 1]");
    if (folds < 2) throw std::invalid_argument("protocol: folds must be >= 2");
    if (depths.empty() || rounds.empty()) throw std::invalid_argument("protocol: empty hyperparameter grid");
    for (int d : depths)
        if (d < 1) throw std::invalid_argument("protocol: depths must be >= 1");
    for (int t : rounds)
        if (t < 1) throw std::invalid_argument("protocol: rounds must be >= 1");
    if (selection.enabled && !(selection.percent > 0.0 && selection.percent <= 100.0))
        throw std::invalid_argument("protocol: selection percent must be in (0, 100]");
}

std::vector<std::size_t> stratified_subset(const std::vector<int>& labels, double fraction, std::uint64_t seed) {
    std::vector<std::size_t> out;
    for (int cls : {1, 2}) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < labels.size(); ++r)
            if (labels[r] == cls) rows.push_back(r);
        Rng rng(derive_seed(seed, "subset", static_cast<std::uint64_t>(cls)));
        shuffle(rows, rng);
        auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
        if (!rows.empty()) take = std::max<std::size_t>(take, 1);
        out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
    std::vector<int> fold(labels.size(), 0);
    int start = 0;
    for (int cls : {1, 2}) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < labels.size(); ++r)
            if (labels[r] == cls) rows.push_back(r);
        Rng rng(derive_seed(seed, "folds", static_cast<std::uint64_t>(cls)));
        shuffle(rows, rng);
        for (std::size_t k = 0; k < rows.size(); ++k) fold[rows[k]] = static_cast<int>((start + k) % folds);
        // continue the round robin so small classes do not all land in fold 0
        start = static_cast<int>((start + rows.size()) % static_cast<std::size_t>(folds));
    }
    return fold;
}

namespace {

std::vector<std::size_t> choose_columns(const FeatureMatrix& X, const ProtocolConfig& cfg, std::uint64_t seed) {
    const auto& sel = cfg.selection;
    FeatureRanking ranking;
    auto gini_of = [&] {
        BoostParams p;
        p.rounds = *std::max_element(cfg.rounds.begin(), cfg.rounds.end());
        p.max_depth = *std::max_element(cfg.depths.begin(), cfg.depths.end());
        p.balance_ratio = cfg.balance_ratio;
        return gini_importance(rusboost_train(X, p, derive_seed(seed, "select-model")));
    };
    switch (sel.method) {
        case RankingMethod::fisher: ranking = fisher_scores(X); break;
        case RankingMethod::gini: ranking = gini_of(); break;
        case RankingMethod::combined: ranking = combined_ranking(gini_of(), fisher_scores(X)); break;
        case RankingMethod::random: ranking = random_ranking(X.cols(), derive_seed(seed, "select-random")); break;
    }
    return select_features(ranking, sel.percent);
}

}  // namespace

ProtocolReport run_protocol(const FeatureMatrix& train, const EvaluationSet& test, const ProtocolConfig& cfg,
                            std::uint64_t master_seed, const std::function<void(const std::string&, int)>& observer) {
    cfg.validate();
    train.validate();
    if (train.cols() != test.features().cols())
        throw std::invalid_argument("protocol: train and test column counts differ");
    auto notify = [&](const char* what, int rep) {
        if (observer) observer(what, rep);
    };

    std::vector<int> depths = cfg.depths, rounds = cfg.rounds;
    std::sort(depths.begin(), depths.end());
    std::sort(rounds.begin(), rounds.end());
    const int max_rounds = rounds.back();

    ProtocolReport report;
    report.master_seed = master_seed;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        RepetitionResult res;
        res.seed = derive_seed(master_seed, "repetition", static_cast<std::uint64_t>(rep));
        const auto subset_rows = stratified_subset(train.labels(), cfg.subset_fraction, res.seed);
        FeatureMatrix S = train.select_rows(subset_rows);
        res.subset_rows = S.rows();

        std::vector<std::size_t> columns(S.cols());
        std::iota(columns.begin(), columns.end(), 0);
        if (cfg.selection.enabled) {
            columns = choose_columns(S, cfg, res.seed);
            S = S.select_columns(columns);
        }
        res.features = columns.size();

        // CV over the grid; one model per (depth, fold), scored at every round count
        notify("cv", rep);
        const auto fold = stratified_folds(S.labels(), cfg.folds, res.seed);
        std::vector<Overlap> scores(depths.size() * rounds.size());
        for (std::size_t di = 0; di < depths.size(); ++di) {
            for (int f = 0; f < cfg.folds; ++f) {
                std::vector<std::size_t> fit_rows, held_rows;
                for (std::size_t r = 0; r < S.rows(); ++r) (fold[r] == f ? held_rows : fit_rows).push_back(r);
                if (held_rows.empty()) continue;
                const FeatureMatrix fit = S.select_rows(fit_rows);
                BoostParams p;
                p.rounds = max_rounds;
                p.max_depth = depths[di];
                p.balance_ratio = cfg.balance_ratio;
                const BoostModel m = rusboost_train(
                    fit, p, derive_seed(res.seed, "cv", static_cast<std::uint64_t>(di * 1000 + static_cast<std::size_t>(f))));
                for (std::size_t ti = 0; ti < rounds.size(); ++ti)
                    for (auto r : held_rows)
                        scores[di * rounds.size() + ti].add(predict(m, S.row(r), rounds[ti]).label, S.labels()[r]);
            }
        }
        double best = -1.0;
        for (std::size_t di = 0; di < depths.size(); ++di)
            for (std::size_t ti = 0; ti < rounds.size(); ++ti) {
                const double s = scores[di * rounds.size() + ti].dsc();
                if (s > best) {
                    best = s;
                    res.depth = depths[di];
                    res.rounds = rounds[ti];
                }
            }
        res.cv_dsc = best;

        notify("final", rep);
        BoostParams p;
        p.rounds = res.rounds;
        p.max_depth = res.depth;
        p.balance_ratio = cfg.balance_ratio;
        const BoostModel model = rusboost_train(S, p, derive_seed(res.seed, "final"));
        const FeatureMatrix T = cfg.selection.enabled ? test.features().select_columns(columns) : test.features();
        const auto predicted = predict_labels(model, T);

        notify("score", rep);
        res.dsc = test.score(predicted);
        report.repetitions.push_back(res);
    }
    double sum = 0.0;
    for (const auto& r : report.repetitions) sum += r.dsc;
    report.mean = sum / static_cast<double>(report.repetitions.size());
    double var = 0.0;
    for (const auto& r : report.repetitions) var += (r.dsc - report.mean) * (r.dsc - report.mean);
    report.std = std::sqrt(var / static_cast<double>(report.repetitions.size()));
    notify("score", -1);
    report.trivial_dsc = test.trivial_score();
    return report;
}

// ---- stability ----

std::vector<double> StabilityReport::magnitudes() const {
    std::set<double> s;
    for (const auto& t : trials) s.insert(t.magnitude);
    return {s.begin(), s.end()};
}

double StabilityReport::mean_pi_diff(double magnitude) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& t : trials)
        if (t.magnitude == magnitude) {
            s += t.pi_diff;
            ++n;
        }
    if (n == 0) throw std::invalid_argument("no trials at magnitude " + std::to_string(magnitude));
    return s / static_cast<double>(n);
}

double StabilityReport::mean_patch_diff(double magnitude) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& t : trials)
        if (t.magnitude == magnitude) {
            s += t.patch_diff;
            ++n;
        }
    if (n == 0) throw std::invalid_argument("no trials at magnitude " + std::to_string(magnitude));
    return s / static_cast<double>(n);
}

namespace {

std::vector<std::size_t> sample_indices(std::size_t available, std::size_t wanted, std::uint64_t seed) {
    std::vector<std::size_t> idx(available);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, "stability-sample"));
    shuffle(idx, rng);
    idx.resize(std::min(available, wanted));
    return idx;
}

}  // namespace

StabilityReport noise_stability(const std::vector<Patch>& patches, const std::vector<double>& snr_levels,
                                const DescriptorConfig& cfg, std::uint64_t seed, std::size_t max_patches) {
    if (patches.empty()) throw std::invalid_argument("noise_stability: no patches");
    const auto chosen = sample_indices(patches.size(), max_patches, seed);
    std::vector<Patch> clean;
    for (auto i : chosen) clean.push_back(patches[i]);

    FeatureExtractor fx(cfg);
    if (cfg.channel_limits.empty()) fx.fit_channel_limits(clean);

    StabilityReport rep;
    rep.kind = "noise";
    rep.prefilter = to_string(cfg.prefilter);
    const std::size_t L = snr_levels.size();
    rep.trials.resize(chosen.size() * L);
    parallel_for(chosen.size(), [&](std::size_t k) {
        const Grid<double>& p = clean[k].values;
        const auto base = fx.pi_vector(p);
        double mean = 0.0;
        for (double v : p.values()) mean += v;
        mean /= static_cast<double>(p.size());
        double var = 0.0;
        for (double v : p.values()) var += (v - mean) * (v - mean);
        var /= static_cast<double>(p.size());
        for (std::size_t l = 0; l < L; ++l) {
            const double noise_sd = std::sqrt(var / std::pow(10.0, snr_levels[l] / 10.0));
            Rng rng(derive_seed(seed, "snr-noise", chosen[k] * 1000 + l));
            Grid<double> noisy = p;
            for (double& v : noisy.values()) v += noise_sd * standard_normal(rng);
            rep.trials[k * L + l] = {snr_levels[l], chosen[k], normalized_difference(p, noisy),
                                     normalized_difference(base, fx.pi_vector(noisy))};
        }
    });
    return rep;
}

StabilityReport displacement_stability(const std::vector<DepthMap>& maps, const std::vector<std::size_t>& offsets,
                                       const DescriptorConfig& cfg, std::size_t patch_size, std::size_t n_patches,
                                       std::uint64_t seed) {
    if (maps.empty() || offsets.empty()) throw std::invalid_argument("displacement_stability: nothing to do");
    const std::size_t max_off = *std::max_element(offsets.begin(), offsets.end());
    for (const auto& m : maps)
        if (m.height() < patch_size || m.width() < patch_size + max_off)
            throw std::invalid_argument("displacement_stability: map too small for patch size plus largest offset");

    Rng rng(derive_seed(seed, "displacement-origins"));
    struct Origin {
        std::size_t map, row, col;
    };
    std::vector<Origin> origins;
    for (std::size_t k = 0; k < n_patches; ++k) {
        const auto mi = uniform_below(rng, maps.size());
        const auto& m = maps[mi];
        origins.push_back({mi, uniform_below(rng, m.height() - patch_size + 1),
                           uniform_below(rng, m.width() - patch_size - max_off + 1)});
    }
    auto cut = [&](const Origin& o, std::size_t shift) {
        Grid<double> g(patch_size, patch_size);
        for (std::size_t r = 0; r < patch_size; ++r)
            for (std::size_t c = 0; c < patch_size; ++c) g(r, c) = maps[o.map](o.row + r, o.col + shift + c);
        return g;
    };

    FeatureExtractor fx(cfg);
    if (cfg.channel_limits.empty()) {
        std::vector<Patch> base;
        for (const auto& o : origins) base.push_back({o.row, o.col, cut(o, 0)});
        fx.fit_channel_limits(base);
    }

    StabilityReport rep;
    rep.kind = "displacement";
    rep.prefilter = to_string(cfg.prefilter);
    const std::size_t L = offsets.size();
    rep.trials.resize(origins.size() * L);
    parallel_for(origins.size(), [&](std::size_t k) {
        const Grid<double> p = cut(origins[k], 0);
        const auto base = fx.pi_vector(p);
        for (std::size_t l = 0; l < L; ++l) {
            const Grid<double> q = cut(origins[k], offsets[l]);
            rep.trials[k * L + l] = {static_cast<double>(offsets[l]), k, normalized_difference(p, q),
                                     normalized_difference(base, fx.pi_vector(q))};
        }
    });
    return rep;
}

// ---- discriminativity ----

std::vector<PiColumn> pi_columns(const std::vector<std::string>& names) {
    static const std::regex pattern(R"(^(?:c(\d+)/)?pi_b(\d+)_d(\d+)$)");
    std::vector<PiColumn> out;
    std::smatch m;
    for (std::size_t c = 0; c < names.size(); ++c)
        if (std::regex_match(names[c], m, pattern))
            out.push_back({c, m[1].matched ? std::stoi(m[1]) : 0, std::stoi(m[2]), std::stoi(m[3])});
    return out;
}

namespace {

int resolution_of(const std::vector<PiColumn>& cols) {
    if (cols.empty()) throw std::invalid_argument("no PI columns in the feature matrix");
    int r = 0;
    for (const auto& c : cols) r = std::max({r, c.birth + 1, c.death + 1});
    return r;
}

Grid<double> place(const std::vector<PiColumn>& cols, const std::vector<double>& scores, int R) {
    Grid<double> g(static_cast<std::size_t>(R), static_cast<std::size_t>(R), 0.0);
    for (const auto& c : cols)
        g(static_cast<std::size_t>(c.birth), static_cast<std::size_t>(c.death)) += scores[c.column];
    return g;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ImportanceMaps importance_maps(const FeatureMatrix& X, const BoostModel& m) {
    const auto cols = pi_columns(X.column_names());
    const int R = resolution_of(cols);
    if (m.n_features != X.cols()) throw std::invalid_argument("importance_maps: model and matrix widths differ");
    return {place(cols, fisher_scores(X).scores, R), place(cols, gini_importance(m).scores, R)};
}

std::map<int, Grid<double>> class_average_pi(const FeatureMatrix& X) {
    const auto cols = pi_columns(X.column_names());
    const int R = resolution_of(cols);
    std::map<int, Grid<double>> out;
    for (int cls : {1, 2}) {
        const std::size_t n = X.count(cls);
        if (n == 0) continue;
        std::vector<double> mean(X.cols(), 0.0);
        for (std::size_t r = 0; r < X.rows(); ++r)
            if (X.labels()[r] == cls)
                for (std::size_t c = 0; c < X.cols(); ++c) mean[c] += X(r, c);
        for (auto& v : mean) v /= static_cast<double>(n);
        out.emplace(cls, place(cols, mean, R));
    }
    return out;
}

int half_max_regions(const Grid<double>& pi) {
    const std::size_t R = pi.rows();
    double peak = 0.0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = i; j < R; ++j) peak = std::max(peak, pi(i, j));
    if (!(peak > 0.0)) return 0;
    const double thr = peak / 2.0;
    Grid<int> seen(R, R, 0);
    int regions = 0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = i; j < R; ++j) {
            if (seen(i, j) || pi(i, j) < thr) continue;
            ++regions;
            std::deque<std::pair<std::size_t, std::size_t>> q{{i, j}};
            seen(i, j) = 1;
            while (!q.empty()) {
                const auto [a, b] = q.front();
                q.pop_front();
                for (int da = -1; da <= 1; ++da)
                    for (int db = -1; db <= 1; ++db) {
                        const long long na = static_cast<long long>(a) + da, nb = static_cast<long long>(b) + db;
                        if (na < 0 || nb < 0 || na >= static_cast<long long>(R) || nb >= static_cast<long long>(R))
                            continue;
                        const auto ua = static_cast<std::size_t>(na), ub = static_cast<std::size_t>(nb);
                        if (ub < ua || seen(ua, ub) || pi(ua, ub) < thr) continue;
                        seen(ua, ub) = 1;
                        q.emplace_back(ua, ub);
                    }
            }
        }
    return regions;
}

LocalityCheck importance_locality(const Grid<double>& map) {
    struct Px {
        double value, dist;
    };
    std::vector<Px> px;
    for (std::size_t i = 0; i < map.rows(); ++i)
        for (std::size_t j = i; j < map.cols(); ++j) px.push_back({map(i, j), static_cast<double>(j - i)});
    if (px.empty()) throw std::invalid_argument("importance_locality: empty map");
    std::vector<double> all;
    for (const auto& p : px) all.push_back(p.dist);
    std::stable_sort(px.begin(), px.end(), [](const Px& a, const Px& b) { return a.value > b.value; });
    const auto k = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(px.size())));
    std::vector<double> top;
    for (std::size_t i = 0; i < k; ++i) top.push_back(px[i].dist);
    return {median_of(top), median_of(all)};
}

}  // namespace topotex
