#include <doctest.h>

#include <fstream>

#include "topotex/config.hpp"
#include "unit/temp_dir.hpp"

using namespace topotex;

TEST_CASE("empty config gives the defaults") {
    const auto c = parse_run_config("{}");
    CHECK(c.patch_size == 128);
    CHECK(c.stride == 16);
    CHECK(c.label_threshold == 0.5);
    CHECK(c.descriptor.pi.resolution == 16);
    CHECK(c.descriptor.pi.sigma_x == 0.001);
    CHECK(c.descriptor.pi.limits.min == -5.0);
    CHECK(c.descriptor.pi.limits.max == 5.0);
    CHECK(c.descriptor.pi.weighting == Weighting::none);
    CHECK(c.protocol.repetitions == 10);
    CHECK(c.protocol.depths == std::vector<int>{1, 2, 3});
    CHECK(c.protocol.rounds == std::vector<int>{50, 100, 200});
    CHECK(c.stability.snr_levels == std::vector<double>{5, 10, 15});
    CHECK(c.sweep.resolutions.size() * c.sweep.sigmas.size() == 16);
}

TEST_CASE("values are read at every level") {
    const auto c = parse_run_config(R"({
        "patch_size": 64, "stride": 8, "seed": 99,
        "descriptor": {"local_norm": "minmax", "prefilter": "clbp", "clbp": {"n": 16, "r": 2, "encoding": "ri"},
                       "descriptors": ["pi", "pdagg"], "degrees": "h1",
                       "pi": {"resolution": 8, "sigma": 0.05, "weighting": "linear", "outlier_removal": true}},
        "learner": {"rounds": 7, "undersample": false},
        "protocol": {"repetitions": 2, "selection": {"enabled": true, "method": "gini", "percent": 5}},
        "synth": {"size": 96, "pit_depth": 2.5}
    })");
    CHECK(c.patch_size == 64);
    CHECK(c.seed == 99);
    CHECK(c.descriptor.local_norm == LocalNorm::minmax);
    CHECK(c.descriptor.prefilter == PrefilterMode::clbp);
    CHECK(c.descriptor.clbp.n == 16);
    CHECK(c.descriptor.clbp.encoding == ClbpEncoding::ri);
    CHECK(c.descriptor.descriptors.size() == 2);
    CHECK(c.descriptor.degrees == DegreeSet::h1);
    CHECK(c.descriptor.pi.sigma_x == 0.05);
    CHECK(c.descriptor.pi.sigma_y == 0.05);
    // minmax without explicit limits
    CHECK(c.descriptor.pi.limits.min == 0.0);
    CHECK(c.descriptor.pi.limits.max == 1.0);
    CHECK(c.descriptor.pi.outlier_removal);
    CHECK(c.learner.rounds == 7);
    CHECK(!c.learner.undersample);
    CHECK(c.protocol.selection.method == RankingMethod::gini);
    CHECK(c.synth.size == 96);
    CHECK(c.synth.base.pit_depth == 2.5);

    const auto explicit_limits = parse_run_config(R"({"descriptor": {"local_norm": "minmax", "pi": {"limits": [-1, 2]}}})");
    CHECK(explicit_limits.descriptor.pi.limits.min == -1.0);
}

TEST_CASE("bad configs are rejected") {
    CHECK_THROWS_AS(parse_run_config(R"({"patch": 3})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"descriptor": {"pi": {"sigmax": 1}}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"protocol": {"selection": {"pct": 1}}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"descriptor": {"prefilter": "gabor"}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"patch_size": "big"})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"descriptor": {"essential_policy": "keep"}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"descriptor": {"pi": {"limits": [1]}}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"protocol": {"folds": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{"), ConfigError);
    try {
        parse_run_config(R"({"learner": {"depth": 2}})");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("learner.depth") != std::string::npos);
    }
}

TEST_CASE("resolved config round trips") {
    auto c = parse_run_config(R"({"seed": 5, "descriptor": {"prefilter": "mr", "channel_limits": [[0,1],[0,1],[0,1],[0,1],[0,1],[0,1],[0,1],[-2,3]]}})");
    CHECK(c.descriptor.channel_limits[7].max == 3.0);
    const auto again = parse_run_config(to_json(c));
    CHECK(to_json(again) == to_json(c));
    CHECK(descriptor_json(parse_descriptor_json(descriptor_json(c.descriptor))) == descriptor_json(c.descriptor));

    TempDir dir;
    std::ofstream(dir / "c.json") << to_json(c);
    CHECK(to_json(load_run_config(dir / "c.json")) == to_json(c));
    CHECK_THROWS_AS(load_run_config(dir / "none.json"), ConfigError);
}

TEST_CASE("descriptor hash") {
    DescriptorConfig d;
    const auto h = descriptor_hash(d, 128, 16);
    CHECK(h.size() == 16);
    CHECK(h == descriptor_hash(d, 128, 16));
    CHECK(h != descriptor_hash(d, 128, 8));
    CHECK(h != descriptor_hash(d, 64, 16));
    auto e = d;
    e.pi.sigma_x = 0.002;
    CHECK(h != descriptor_hash(e, 128, 16));
    e = d;
    e.pi.weighting = Weighting::linear;
    CHECK(h != descriptor_hash(e, 128, 16));
}
