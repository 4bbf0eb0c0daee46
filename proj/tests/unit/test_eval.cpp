#include <doctest.h>

#include <cmath>

#include "topotex/eval.hpp"
#include "topotex/seed.hpp"

using namespace topotex;

namespace {

LabelMask mask_from(std::size_t h, std::size_t w, std::vector<std::uint8_t> v) {
    return LabelMask(Grid<std::uint8_t>(h, w, std::move(v)));
}

// Two 40x40 sources, 8x8 patches at stride 8. Class 1 fills the left half of
// each map; column 0 carries the signal, column 1 is noise.
struct Toy {
    FeatureTable table;
    std::vector<LabelMask> truth;
};

Toy toy(std::uint64_t seed, double signal = 3.0) {
    Toy t;
    t.table.descriptor = "toy";
    t.table.config_hash = "0000000000000000";
    t.table.patch_size = 8;
    t.table.stride = 8;
    Rng rng(seed);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int s = 0; s < 2; ++s) {
        t.table.sources.push_back({"map" + std::to_string(s), 40, 40, 25});
        Grid<std::uint8_t> g(40, 40, 2);
        for (std::size_t r = 0; r < 40; ++r)
            for (std::size_t c = 0; c < 24; ++c) g(r, c) = 1;
        t.truth.emplace_back(g);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j) {
                const int cls = j < 3 ? 1 : 2;
                rows.push_back({(cls == 1 ? signal : 0.0) + standard_normal(rng), standard_normal(rng)});
                labels.push_back(cls);
            }
    }
    t.table.matrix = FeatureMatrix(rows, labels, {"a", "b"});
    return t;
}

ProtocolConfig small_protocol() {
    ProtocolConfig p;
    p.repetitions = 3;
    p.folds = 3;
    p.depths = {1, 2};
    p.rounds = {5, 10};
    return p;
}

}  // namespace

TEST_CASE("dsc") {
    const auto a = mask_from(2, 2, {1, 1, 2, 2}), b = mask_from(2, 2, {1, 2, 1, 2});
    CHECK(dsc(a, a) == 1.0);
    CHECK(dsc(a, b) == doctest::Approx(0.5));
    CHECK(dsc(b, a) == dsc(a, b));
    CHECK(dsc(a, mask_from(2, 2, {2, 2, 1, 1})) == 0.0);
    const auto empty = mask_from(2, 2, {2, 2, 2, 2});
    CHECK(dsc(empty, empty) == 1.0);
    CHECK(dsc(a, empty) == 0.0);
    CHECK_THROWS(dsc(a, mask_from(1, 4, {1, 1, 2, 2})));
}

TEST_CASE("normalized difference") {
    const std::vector<double> a{1, 2, 3}, z{0, 0, 0}, n{-1, -2, -3};
    CHECK(normalized_difference(a, a) == 0.0);
    CHECK(normalized_difference(z, z) == 0.0);
    CHECK(normalized_difference(a, z) == 1.0);
    CHECK(normalized_difference(a, n) == 1.0);
    const std::vector<double> b{2, 2, 3};
    CHECK(normalized_difference(a, b) == doctest::Approx(1.0 / 13.0));
    CHECK(normalized_difference(a, b) == normalized_difference(b, a));
    CHECK_THROWS(normalized_difference(a, std::vector<double>{1.0}));
}

TEST_CASE("rasterize votes") {
    // two overlapping 2x2 patches on a 3x4 map
    const auto m = rasterize_votes(3, 4, 2, {{0, 0}, {0, 1}}, {1, 2});
    CHECK(m(0, 0) == 1);
    CHECK(m(0, 1) == 1);  // tie goes to class 1
    CHECK(m(0, 2) == 2);
    CHECK(m(2, 0) == 2);  // uncovered
    CHECK(m(1, 3) == 2);
    const auto two = rasterize_votes(2, 3, 2, {{0, 0}, {0, 1}, {0, 1}}, {1, 2, 2});
    CHECK(two(0, 1) == 2);
    CHECK_THROWS(rasterize_votes(2, 2, 2, {{0, 1}}, {1}));
    CHECK_THROWS(rasterize_votes(2, 2, 2, {{0, 0}}, {3}));
    CHECK_THROWS(rasterize_votes(2, 2, 2, {{0, 0}}, {}));
}

TEST_CASE("evaluation set hides labels and counts accesses") {
    const auto t = toy(1);
    EvaluationSet test(t.table, t.truth);
    for (int l : test.features().labels()) CHECK(l == 0);
    CHECK(test.label_accesses() == 0);
    CHECK(test.score(t.table.matrix.labels()) == 1.0);
    CHECK(test.label_accesses() == 1);
    CHECK(test.trivial_score() == 0.0);
    CHECK(test.label_accesses() == 2);
    CHECK_THROWS(test.score({1, 2}));
    CHECK_THROWS(EvaluationSet(t.table, {t.truth[0]}));

    const auto rebuilt = truth_from_patch_labels(t.table);
    REQUIRE(rebuilt.size() == 2);
    CHECK(rebuilt[0].labels() == t.truth[0].labels());
}

TEST_CASE("protocol touches test labels once per repetition") {
    const auto train = toy(2), held = toy(3);
    EvaluationSet test(held.table, held.truth);
    std::vector<std::string> events;
    std::size_t accesses = 0;
    test.on_label_access([&] {
        ++accesses;
        events.push_back("access");
    });
    const auto cfg = small_protocol();
    const auto report = run_protocol(train.table.matrix, test, cfg, 42,
                                      [&](const std::string& e, int) { events.push_back(e); });
    REQUIRE(report.repetitions.size() == 3);
    // one per repetition plus the trivial baseline
    CHECK(accesses == 4);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(events[4 * r] == "cv");
        CHECK(events[4 * r + 1] == "final");
        CHECK(events[4 * r + 2] == "score");
        CHECK(events[4 * r + 3] == "access");
    }
    for (const auto& r : report.repetitions) {
        CHECK(r.subset_rows == 25);
        CHECK(r.dsc > 0.8);
    }
    CHECK(report.mean > 0.8);
    CHECK(report.trivial_dsc == 0.0);

    EvaluationSet again(held.table, held.truth);
    const auto second = run_protocol(train.table.matrix, again, cfg, 42);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(second.repetitions[r].dsc == report.repetitions[r].dsc);
        CHECK(second.repetitions[r].depth == report.repetitions[r].depth);
        CHECK(second.repetitions[r].rounds == report.repetitions[r].rounds);
    }

    auto sel = cfg;
    sel.selection = {true, RankingMethod::fisher, 50.0};
    EvaluationSet third(held.table, held.truth);
    const auto selected = run_protocol(train.table.matrix, third, sel, 42);
    for (const auto& r : selected.repetitions) CHECK(r.features == 1);

    auto bad = cfg;
    bad.folds = 1;
    CHECK_THROWS(run_protocol(train.table.matrix, third, bad, 1));
}

TEST_CASE("stratified subsets and folds") {
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) labels.push_back(i < 10 ? 1 : 2);
    const auto s = stratified_subset(labels, 0.5, 7);
    CHECK(s.size() == 15);
    std::size_t ones = 0;
    for (auto r : s) ones += labels[r] == 1;
    CHECK(ones == 5);
    CHECK(s == stratified_subset(labels, 0.5, 7));
    CHECK(s != stratified_subset(labels, 0.5, 8));

    const auto f = stratified_folds(labels, 5, 3);
    for (int k = 0; k < 5; ++k) {
        std::size_t c1 = 0, c2 = 0;
        for (std::size_t r = 0; r < labels.size(); ++r)
            if (f[r] == k) (labels[r] == 1 ? c1 : c2)++;
        CHECK(c1 == 2);
        CHECK(c2 == 4);
    }
}

TEST_CASE("stability analyses") {
    Rng rng(5);
    std::vector<Patch> patches;
    for (std::size_t k = 0; k < 6; ++k) {
        Grid<double> g(16, 16);
        for (double& v : g.values()) v = standard_normal(rng);
        patches.push_back({0, 16 * k, g});
    }
    DescriptorConfig cfg;
    cfg.pi.resolution = 8;
    cfg.pi.sigma_x = cfg.pi.sigma_y = 0.1;
    const auto quiet = noise_stability(patches, {300.0}, cfg, 1, 4);
    CHECK(quiet.trials.size() == 4);
    CHECK(quiet.kind == "noise");
    CHECK(quiet.mean_pi_diff(300.0) < 1e-9);
    CHECK(quiet.mean_patch_diff(300.0) < 1e-12);
    CHECK_THROWS(quiet.mean_pi_diff(10.0));

    const auto loud = noise_stability(patches, {20.0, 0.0}, cfg, 1);
    CHECK(loud.magnitudes() == std::vector<double>{0.0, 20.0});
    CHECK(loud.mean_patch_diff(0.0) > loud.mean_patch_diff(20.0));

    Grid<double> big(40, 60);
    for (double& v : big.values()) v = standard_normal(rng);
    const std::vector<DepthMap> maps{DepthMap(big)};
    const auto disp = displacement_stability(maps, {0, 3}, cfg, 16, 5, 2);
    CHECK(disp.trials.size() == 10);
    CHECK(disp.mean_pi_diff(0.0) == 0.0);
    CHECK(disp.mean_patch_diff(0.0) == 0.0);
    CHECK(disp.mean_patch_diff(3.0) > 0.0);
    CHECK_THROWS(displacement_stability(maps, {50}, cfg, 16, 5, 2));
}

TEST_CASE("pi columns") {
    const auto cols = pi_columns({"pi_b0_d1", "pdagg_mean", "c3/pi_b2_d5", "label", "xpi_b0_d0"});
    REQUIRE(cols.size() == 2);
    CHECK(cols[0].column == 0);
    CHECK(cols[0].channel == 0);
    CHECK(cols[0].death == 1);
    CHECK(cols[1].column == 2);
    CHECK(cols[1].channel == 3);
    CHECK(cols[1].birth == 2);
    CHECK(cols[1].death == 5);
}

TEST_CASE("class averages, half-max regions and locality") {
    const FeatureMatrix X({{1, 0, 0}, {3, 0, 0}, {0, 0, 4}}, {1, 1, 2}, {"pi_b0_d0", "pi_b0_d1", "pi_b1_d1"});
    const auto avg = class_average_pi(X);
    CHECK(avg.at(1)(0, 0) == 2.0);
    CHECK(avg.at(2)(1, 1) == 4.0);
    const FeatureMatrix single({{5, 0, 0}}, {1}, X.column_names());
    CHECK(class_average_pi(single).at(1)(0, 0) == 5.0);
    CHECK(class_average_pi(single).count(2) == 0);
    CHECK_THROWS(class_average_pi(FeatureMatrix({{1}}, {1}, {"pdagg_mean"})));

    Grid<double> g(5, 5, 0.0);
    CHECK(half_max_regions(g) == 0);
    g(0, 0) = 1.0;
    CHECK(half_max_regions(g) == 1);
    g(0, 1) = 0.8;
    CHECK(half_max_regions(g) == 1);
    g(3, 4) = 0.6;
    CHECK(half_max_regions(g) == 2);
    g(4, 0) = 10.0;  // below the diagonal, ignored
    CHECK(half_max_regions(g) == 2);

    Grid<double> diag(4, 4, 0.0), far(4, 4, 0.0);
    for (std::size_t i = 0; i < 4; ++i) diag(i, i) = 1.0;
    far(0, 3) = 1.0;
    CHECK(importance_locality(diag).near_diagonal());
    CHECK(!importance_locality(far).near_diagonal());
}

TEST_CASE("importance maps") {
    Rng rng(6);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
        const int cls = i % 3 == 0 ? 1 : 2;
        rows.push_back({standard_normal(rng) + (cls == 1 ? 2 : 0), standard_normal(rng), standard_normal(rng)});
        labels.push_back(cls);
    }
    const FeatureMatrix X(rows, labels, {"pi_b0_d0", "pi_b0_d1", "pi_b1_d1"});
    BoostParams p;
    p.rounds = 10;
    const auto m = rusboost_train(X, p, 1);
    const auto maps = importance_maps(X, m);
    CHECK(maps.fisher.rows() == 2);
    for (double v : maps.fisher.values()) CHECK(v >= 0.0);
    for (double v : maps.gini.values()) CHECK(v >= 0.0);
    CHECK(maps.fisher(0, 0) > maps.fisher(1, 1));
    CHECK(maps.fisher(1, 0) == 0.0);
    CHECK_THROWS(importance_maps(X.select_columns({0, 1}), m));
}
