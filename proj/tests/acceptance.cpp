// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/naive_persistence.hpp"
#include "oracles/pi_quadrature.hpp"
#include "topotex/cubical.hpp"
#include "topotex/descriptors.hpp"
#include "topotex/eval.hpp"
#include "topotex/learn.hpp"
#include "topotex/pipeline.hpp"
#include "topotex/prefilter.hpp"
#include "topotex/seed.hpp"
#include "topotex/synth.hpp"

using namespace topotex;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

constexpr std::uint64_t kSeed = 20240611;

// ---- shared synthetic fixture ----------------------------------------------

struct Fixture {
    std::vector<SynthMap> maps;
    DescriptorConfig desc;  // baseline PI
    FeatureTable train, test;
    std::vector<LabelMask> test_masks;
    std::vector<Patch> all_patches;
    double extract_seconds = 0.0;
};

FeatureTable table_for(const std::vector<const SynthMap*>& maps, const FeatureExtractor& fx, std::size_t size,
                       std::size_t stride, std::vector<Patch>* keep) {
    FeatureTable t;
    t.descriptor = descriptor_tag(fx.config());
    t.patch_size = size;
    t.stride = stride;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (const SynthMap* m : maps) {
        PatchSet ps = extract_patches(m->map, size, stride, m->id);
        auto feats = fx.extract_all(ps.patches);
        for (std::size_t i = 0; i < ps.patches.size(); ++i) {
            rows.push_back(std::move(feats[i]));
            labels.push_back(patch_label(m->mask, ps.patches[i]));
        }
        t.sources.push_back({m->id, m->map.height(), m->map.width(), ps.patches.size()});
        if (keep) keep->insert(keep->end(), ps.patches.begin(), ps.patches.end());
    }
    t.matrix = FeatureMatrix(std::move(rows), std::move(labels), column_names(fx.config()));
    return t;
}

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture f;
        f.maps = make_dataset(DatasetConfig{}, kSeed);
        const auto t0 = std::chrono::steady_clock::now();
        FeatureExtractor fx(f.desc);
        std::vector<const SynthMap*> tr, te;
        for (const auto& m : f.maps) (m.split == "train" ? tr : te).push_back(&m);
        f.train = table_for(tr, fx, 128, 16, &f.all_patches);
        f.test = table_for(te, fx, 128, 16, &f.all_patches);
        for (const auto* m : te) f.test_masks.push_back(m->mask);
        f.extract_seconds = seconds_since(t0);
        return f;
    }();
    return f;
}

// ---- criteria ----------------------------------------------------------------

Outcome persistence_oracles() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(kSeed, "acc-persistence"));
    int h0_mismatch = 0, full_mismatch = 0;
    for (int k = 0; k < 200; ++k) {
        Grid<double> px(8, 8);
        for (double& v : px.values()) v = static_cast<double>(uniform_below(rng, 10));
        const auto d = compute_persistence(CubicalFiltration(px), EssentialPolicy::keep);
        const auto fast = sorted_intervals(d.intervals);
        if (fast != oracle::naive_persistence(px)) ++full_mismatch;
        std::vector<PersistenceInterval> h0;
        for (const auto& iv : fast)
            if (iv.degree == 0) h0.push_back(iv);
        Patch p{0, 0, px};
        if (h0 != sorted_intervals(oracle_persistence_h0(p))) ++h0_mismatch;
    }
    const double s = seconds_since(t0);
    return {h0_mismatch == 0 && full_mismatch == 0 && s < 5.0,
            fmt("200 patches, union-find mismatches %d, full-reduction mismatches %d, %.2f s", h0_mismatch,
                full_mismatch, s)};
}

Outcome betti_eight() {
    const char* rows[] = {
        "..........",
        "...####...",
        "..#....#..",
        "..#....#..",
        "..#....#..",
        "...####...",
        "..#....#..",
        "..#....#..",
        "..#....#..",
        "...####...",
        "..........",
    };
    // 10 wide, 11 tall: pad to a square so the patch contract holds
    Grid<double> px(11, 11, 1.0);
    for (std::size_t r = 0; r < 11; ++r)
        for (std::size_t c = 0; c < 10; ++c)
            if (rows[r][c] == '#') px(r, c) = 0.0;
    const auto d = patch_persistence(px, EssentialPolicy::keep);
    const BettiNumbers b = betti_at(d, 0.5);
    return {b == BettiNumbers{1, 2}, fmt("(b0, b1) = (%d, %d) at level 0.5", b.b0, b.b1)};
}

Outcome pi_quadrature() {
    Rng rng(derive_seed(kSeed, "acc-pi"));
    const Limits lim{-5.0, 5.0};
    const double sigmas[] = {0.001, 0.05, 0.5};
    double worst = 0.0;
    int cases = 0;
    for (int k = 0; k < 20; ++k) {
        PersistenceDiagram d;
        d.limits = lim;
        const auto n = 1 + uniform_below(rng, 20);
        for (std::uint64_t i = 0; i < n; ++i) {
            const double b = -5.5 + 10.0 * uniform_open(rng);
            const double e = b + 5.0 * uniform_open(rng);
            d.intervals.push_back({b, e, static_cast<int>(i % 2)});
        }
        const double sigma = sigmas[k % 3];
        for (int R : {8, 16})
            for (auto [w, ow] : {std::pair{Weighting::none, oracle::Weight::none},
                                 std::pair{Weighting::linear, oracle::Weight::linear},
                                 std::pair{Weighting::exponential, oracle::Weight::exponential}}) {
                PiParams p;
                p.resolution = R;
                p.sigma_x = p.sigma_y = sigma;
                p.limits = lim;
                p.weighting = w;
                const auto img = persistence_image(d, p);
                const auto ref = oracle::pi_quadrature(d.intervals, R, sigma, sigma, lim, ow);
                for (std::size_t i = 0; i < ref.size(); ++i)
                    worst = std::max(worst, std::abs(img.pixels.values()[i] - ref.values()[i]));
                ++cases;
            }
    }
    return {worst <= 1e-6, fmt("%d images, max |PI - quadrature| = %.3g", cases, worst)};
}

Outcome vector_lengths() {
    const std::size_t expect[] = {36, 136, 528, 2080};
    const int res[] = {8, 16, 32, 64};
    bool ok = true;
    std::string got;
    PersistenceDiagram d;
    d.limits = {-5, 5};
    d.intervals = {{-1.0, 1.0, 0}};
    for (int k = 0; k < 4; ++k) {
        PiParams p;
        p.resolution = res[k];
        const auto v = vectorize_pi(persistence_image(d, p)).values.size();
        ok = ok && v == expect[k];
        got += std::to_string(v) + " ";
    }
    const auto agg = pd_agg(d).size();
    ok = ok && agg == 12;
    return {ok, "PI " + got + "PD_AGG " + std::to_string(agg)};
}

Outcome outlier_removal() {
    PersistenceDiagram d;
    d.limits = {-5, 5};
    d.intervals = {{-2, -1.5, 0}, {-1, -0.5, 0}, {0, 0.5, 0}, {3, 6, 0}};
    PiParams p;
    const auto without = persistence_image(d, p).pixels;
    p.outlier_removal = true;
    const auto with = persistence_image(d, p).pixels;
    p.outlier_removal = false;
    PersistenceDiagram single = d;
    single.intervals = {{3, 6, 0}};
    const auto lone = persistence_image(single, p).pixels;
    double worst = 0.0;
    for (std::size_t i = 0; i < with.size(); ++i)
        worst = std::max(worst, std::abs(with.values()[i] - (without.values()[i] - lone.values()[i])));
    return {worst <= 1e-10, fmt("max deviation %.3g", worst)};
}

Outcome shift_invariance() {
    Rng rng(derive_seed(kSeed, "acc-shift"));
    PiParams p;
    p.limits = {0, 1};
    double worst_pi = 0.0;
    int diagram_mismatch = 0;
    for (int k = 0; k < 50; ++k) {
        Grid<double> px(32, 32);
        // dyadic values keep p + c exact
        for (double& v : px.values()) v = static_cast<double>(uniform_below(rng, 4096)) / 256.0 - 8.0;
        for (double c : {-3.0, 5.0}) {
            Grid<double> q = px;
            for (double& v : q.values()) v += c;
            const auto a = persistence_image(patch_persistence(local_normalize(px, LocalNorm::minmax),
                                                               EssentialPolicy::cap_at_max_value, p.limits),
                                             p);
            const auto b = persistence_image(
                patch_persistence(local_normalize(q, LocalNorm::minmax), EssentialPolicy::cap_at_max_value, p.limits),
                p);
            for (std::size_t i = 0; i < a.pixels.size(); ++i)
                worst_pi = std::max(worst_pi, std::abs(a.pixels.values()[i] - b.pixels.values()[i]));
            auto dp = patch_persistence(px, EssentialPolicy::keep).intervals;
            for (auto& iv : dp) {
                iv.birth += c;
                iv.death += c;
            }
            if (sorted_intervals(dp) != sorted_intervals(patch_persistence(q, EssentialPolicy::keep).intervals))
                ++diagram_mismatch;
        }
    }
    return {worst_pi <= 1e-9 && diagram_mismatch == 0,
            fmt("max PI deviation %.3g, shifted-diagram mismatches %d", worst_pi, diagram_mismatch)};
}

Outcome synthetic_classification(ProtocolReport& report) {
    const auto& f = fixture();
    const auto t0 = std::chrono::steady_clock::now();
    EvaluationSet test(f.test, f.test_masks);
    report = run_protocol(f.train.matrix, test, ProtocolConfig{}, kSeed);
    const double s = seconds_since(t0) + f.extract_seconds;
    const bool ok = report.mean >= report.trivial_dsc + 0.3 && report.mean > 0.7 && s < 600.0;
    return {ok, fmt("DSC %.3f +- %.3f over %zu repetitions, trivial %.3f, %.0f s", report.mean, report.std,
                    report.repetitions.size(), report.trivial_dsc, s)};
}

Outcome class_average_shape() {
    const auto avg = class_average_pi(fixture().train.matrix);
    const int natural = half_max_regions(avg.at(2)), engraved = half_max_regions(avg.at(1));
    return {natural == 1 && engraved == 2,
            fmt("half-max regions: natural %d, engraved %d", natural, engraved)};
}

Outcome stability() {
    const auto& f = fixture();
    DescriptorConfig raw;
    const auto noise = noise_stability(f.all_patches, {15, 10, 5}, raw, kSeed, 100);
    const double n15 = noise.mean_pi_diff(15), n10 = noise.mean_pi_diff(10), n5 = noise.mean_pi_diff(5);
    std::vector<DepthMap> maps;
    for (const auto& m : f.maps) maps.push_back(m.map);
    const std::vector<std::size_t> offsets{4, 8, 16, 32, 64};
    const auto disp = displacement_stability(maps, offsets, raw, 128, 100, kSeed);
    bool mono = true;
    std::string dtxt;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const double v = disp.mean_pi_diff(static_cast<double>(offsets[i]));
        dtxt += fmt("%.3f ", v);
        if (i > 0 && v < disp.mean_pi_diff(static_cast<double>(offsets[i - 1]))) mono = false;
    }
    DescriptorConfig schmid = raw, mr = raw;
    schmid.prefilter = PrefilterMode::schmid;
    mr.prefilter = PrefilterMode::mr;
    const double s10 = noise_stability(f.all_patches, {10}, schmid, kSeed, 100).mean_pi_diff(10);
    const double m10 = noise_stability(f.all_patches, {10}, mr, kSeed, 100).mean_pi_diff(10);
    const bool ok = n15 < n10 && n10 < n5 && mono && s10 < n10 && m10 < n10;
    return {ok, fmt("noise 15/10/5 dB: %.3f %.3f %.3f; displacement: ", n15, n10, n5) + dtxt +
                    fmt("; SNR 10 raw %.3f schmid %.3f mr %.3f", n10, s10, m10)};
}

Outcome rus_determinism() {
    const auto& X = fixture().train.matrix;
    BoostParams p;
    p.rounds = 50;
    std::vector<RoundRecord> trace;
    const auto a = rusboost_train(X, p, kSeed, &trace);
    const auto b = rusboost_train(X, p, kSeed);
    std::ostringstream sa, sb;
    save_model(a, sa);
    save_model(b, sb);
    bool balanced = !trace.empty();
    for (const auto& r : trace) balanced = balanced && r.class1 == r.class2 && r.class1 > 0;

    const auto& f = fixture();
    EvaluationSet test(f.test, f.test_masks);
    ProtocolConfig pc;
    pc.repetitions = 2;
    pc.rounds = {10, 20};
    auto report_text = [&] {
        const auto r = run_protocol(X, test, pc, kSeed);
        std::string s;
        for (const auto& rep : r.repetitions)
            s += fmt("%llu %d %d %.17g %.17g|", static_cast<unsigned long long>(rep.seed), rep.depth, rep.rounds,
                     rep.cv_dsc, rep.dsc);
        return s + fmt("%.17g %.17g", r.mean, r.std);
    };
    const bool same_model = sa.str() == sb.str();
    const bool same_report = report_text() == report_text();
    return {balanced && same_model && same_report,
            fmt("%zu rounds balanced: %s; identical models: %s; identical reports: %s", trace.size(),
                balanced ? "yes" : "no", same_model ? "yes" : "no", same_report ? "yes" : "no")};
}

Outcome selection_order() {
    const auto& f = fixture();
    EvaluationSet test(f.test, f.test_masks);
    ProtocolConfig pc;
    pc.selection.enabled = true;
    pc.selection.percent = 2.0;
    pc.selection.method = RankingMethod::fisher;
    const auto fisher = run_protocol(f.train.matrix, test, pc, kSeed);
    pc.selection.method = RankingMethod::random;
    const auto random = run_protocol(f.train.matrix, test, pc, kSeed);
    return {fisher.mean > random.mean,
            fmt("top 2%% (%zu columns): fisher DSC %.3f, random DSC %.3f", fisher.repetitions.front().features,
                fisher.mean, random.mean)};
}

Outcome importance_locality_check() {
    const auto& X = fixture().train.matrix;
    const auto model = rusboost_train(X, BoostParams{}, derive_seed(kSeed, "acc-importance"));
    const auto maps = importance_maps(X, model);
    const auto fl = importance_locality(maps.fisher), gl = importance_locality(maps.gini);
    return {fl.near_diagonal() && gl.near_diagonal(),
            fmt("median diagonal distance of top decile vs all: fisher %.1f/%.1f, gini %.1f/%.1f",
                fl.top_decile_median, fl.all_median, gl.top_decile_median, gl.all_median)};
}

}  // namespace

int main() {
    ProtocolReport report;
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"persistence oracle equivalence", persistence_oracles},
        {"Betti numbers of a digit 8", betti_eight},
        {"PI quadrature equivalence", pi_quadrature},
        {"descriptor vector lengths", vector_lengths},
        {"outlier removal", outlier_removal},
        {"shift and normalization invariance", shift_invariance},
        {"synthetic classification", [&] { return synthetic_classification(report); }},
        {"class-average PI shape", class_average_shape},
        {"stability ordering", stability},
        {"RUSBoost balance and determinism", rus_determinism},
        {"feature selection ordering", selection_order},
        {"importance locality", importance_locality_check},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
