#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "oracles/brute_filters.hpp"
#include "topotex/prefilter.hpp"
#include "topotex/seed.hpp"

using namespace topotex;

namespace {

Grid<double> noise(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Grid<double> g(n, n);
    for (double& v : g.values()) v = standard_normal(rng);
    return g;
}

double max_abs_diff(const Grid<double>& a, const Grid<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

void check_bank_normalization(const FilterBank& b) {
    for (const auto& k : b.kernels) {
        double sum = 0, l1 = 0;
        for (double v : k.values()) sum += v, l1 += std::abs(v);
        CHECK(std::abs(sum) < 1e-9);
        CHECK(std::abs(l1 - 1.0) < 1e-9);
        CHECK(k.rows() % 2 == 1);
    }
}

}  // namespace

TEST_CASE("local normalization schemes") {
    const Grid<double> p(2, 2, std::vector<double>{0, 1, 2, 3});
    const auto mm = local_normalize(p, LocalNorm::minmax);
    CHECK(mm.raw() == std::vector<double>{0, 1.0 / 3, 2.0 / 3, 1});
    CHECK(local_normalize(p, LocalNorm::none) == p);

    const auto g = noise(16, 1);
    Grid<double> shifted = g;
    for (double& v : shifted.values()) v += 7;
    for (auto s : {LocalNorm::zstd, LocalNorm::minmax, LocalNorm::pstd})
        CHECK(max_abs_diff(local_normalize(g, s), local_normalize(shifted, s)) < 1e-12);

    const auto z = local_normalize(g, LocalNorm::zstd);
    double mean = 0, var = 0;
    for (double v : z.values()) mean += v / 256;
    for (double v : z.values()) var += (v - mean) * (v - mean) / 256;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1) < 1e-9);
    const auto m = local_normalize(g, LocalNorm::minmax);
    CHECK(*std::min_element(m.values().begin(), m.values().end()) == 0.0);
    CHECK(*std::max_element(m.values().begin(), m.values().end()) == 1.0);

    const Grid<double> spike(2, 2, std::vector<double>{0, 0, 0, 10});
    try {
        local_normalize(spike, LocalNorm::pstd);
        FAIL("expected domain_error");
    } catch (const std::domain_error& e) {
        CHECK(std::string(e.what()).find("pstd") != std::string::npos);
    }
    CHECK_THROWS_AS(local_normalize(Grid<double>(3, 3, 1.0), LocalNorm::zstd), std::domain_error);
    CHECK_THROWS_AS(local_normalize(Grid<double>(3, 3, 1.0), LocalNorm::minmax), std::domain_error);
}

TEST_CASE("Schmid bank") {
    const auto b = schmid_bank();
    CHECK(b.kernels.size() == 13);
    check_bank_normalization(b);
    for (const auto& k : b.kernels) {
        CHECK(k.rows() == 49);
        const std::size_t n = k.rows();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) CHECK(k(i, j) == k(n - 1 - i, n - 1 - j));
    }
    CHECK(b.info[2].sigma == 4);
    CHECK(b.info[2].tau == 1.0);  // (4, 2) with tau halved
}

TEST_CASE("MR bank and collapse") {
    const auto b = mr_bank();
    CHECK(b.kernels.size() == 38);
    check_bank_normalization(b);
    CHECK(b.info[0].kind == "edge");
    CHECK(b.info[18].kind == "bar");
    CHECK(b.info[36].kind == "gaussian");
    CHECK(b.info[37].kind == "log");

    const auto flat = apply_mr(Grid<double>(32, 32, 2.0));
    REQUIRE(flat.size() == 8);
    for (const auto& ch : flat)
        for (double v : ch.values()) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("MR channels are close to rotation invariant") {
    // radially symmetric bump: a 90 degree rotation maps each orientation set onto itself
    Grid<double> g(65, 65);
    for (std::size_t i = 0; i < 65; ++i)
        for (std::size_t j = 0; j < 65; ++j) {
            const double y = static_cast<double>(i) - 32, x = static_cast<double>(j) - 20;
            g(i, j) = std::exp(-(x * x + y * y) / 40.0);
        }
    Grid<double> rot(65, 65);
    for (std::size_t i = 0; i < 65; ++i)
        for (std::size_t j = 0; j < 65; ++j) rot(64 - j, i) = g(i, j);
    const auto a = apply_mr(g), b = apply_mr(rot);
    for (std::size_t c = 0; c < 8; ++c) {
        double peak = 0, worst = 0;
        for (std::size_t i = 0; i < 65; ++i)
            for (std::size_t j = 0; j < 65; ++j) {
                peak = std::max(peak, std::abs(a[c](i, j)));
                worst = std::max(worst, std::abs(a[c](i, j) - b[c](64 - j, i)));
            }
        CHECK(worst <= 0.05 * peak);
    }
}

TEST_CASE("FFT convolution matches the direct sum") {
    const auto x = noise(20, 3);
    // 31 is wider than half the input, so the border is mirrored more than once
    for (std::size_t size : {5u, 7u, 31u}) {
        FilterBank bank;
        bank.kernels = {noise(size, 4 + size), noise(size, 5 + size)};
        bank.info.resize(2);
        const auto out = apply_bank(x, bank);
        for (std::size_t k = 0; k < 2; ++k) CHECK(max_abs_diff(out[k], oracle::convolve(x, bank.kernels[k])) < 1e-10);
    }
    FilterBank mixed;
    mixed.kernels = {noise(5, 1), noise(7, 2)};
    mixed.info.resize(2);
    CHECK_THROWS(BankConvolver(mixed, 20, 20));

    FilterBank bank;
    bank.kernels = {noise(5, 7)};
    bank.info.resize(1);
    Grid<double> rect(9, 14);
    for (std::size_t i = 0; i < rect.size(); ++i) rect.values()[i] = std::sin(0.3 * static_cast<double>(i));
    BankConvolver conv(bank, 9, 14);
    CHECK(max_abs_diff(conv.apply(rect)[0], oracle::convolve(rect, bank.kernels[0])) < 1e-10);
    CHECK_THROWS(conv.apply(x));
}

TEST_CASE("impulse, spike and zero kernels") {
    const auto k = noise(5, 8);
    FilterBank bank;
    Grid<double> spike(5, 5, 0.0);
    spike(2, 2) = 1.0;
    bank.kernels = {k, spike, Grid<double>(5, 5, 0.0)};
    bank.info.resize(3);
    Grid<double> impulse(15, 15, 0.0);
    impulse(7, 7) = 1.0;
    const auto out = apply_bank(impulse, bank);
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = 0; b < 5; ++b) CHECK(std::abs(out[0](5 + a, 5 + b) - k(a, b)) < 1e-12);
    const auto x = noise(15, 9);
    const auto same = apply_bank(x, bank);
    CHECK(max_abs_diff(same[1], x) < 1e-12);
    for (double v : same[2].values()) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("mirror index") {
    const std::size_t expect[] = {1, 0, 0, 1, 2, 2, 1};
    for (long i = -2; i <= 4; ++i) CHECK(mirror_index(i, 3) == expect[i + 2]);
}

TEST_CASE("CLBP code tables") {
    CHECK(clbp_code_count(8, ClbpEncoding::riu2) == 10);
    CHECK(clbp_code_count(16, ClbpEncoding::riu2) == 18);
    CHECK(clbp_code_count(8, ClbpEncoding::ri) == 36);
    CHECK(clbp_code_count(16, ClbpEncoding::ri) == 4116);
    for (int n : {8, 16})
        for (bool riu2 : {false, true}) {
            const auto& t = clbp_mapping(n, riu2 ? ClbpEncoding::riu2 : ClbpEncoding::ri);
            REQUIRE(t.size() == (1u << n));
            if (n == 8)
                for (unsigned v = 0; v < t.size(); ++v) CHECK(t[v] == oracle::encode(v, n, riu2));
        }
}

TEST_CASE("CLBP matches the brute-force reference") {
    const auto g = noise(24, 10);
    for (int n : {8, 16})
        for (int r : {3, 5})
            for (auto enc : {ClbpEncoding::riu2, ClbpEncoding::ri}) {
                if (n == 16 && enc == ClbpEncoding::ri) continue;  // reference table build is slow
                const auto m = clbp(g, {n, r, enc});
                const auto ref = oracle::clbp(g, n, r, enc == ClbpEncoding::riu2);
                CHECK(m.s_map == ref.s);
                CHECK(m.m_map == ref.m);
                for (int v : m.s_map.values()) CHECK(v < clbp_code_count(n, enc));
            }
}

TEST_CASE("CLBP properties") {
    const auto flat = clbp(Grid<double>(12, 12, 1.0), {8, 3, ClbpEncoding::riu2});
    for (std::size_t i = 3; i < 9; ++i)
        for (std::size_t j = 3; j < 9; ++j) CHECK(flat.s_map(i, j) == 8);
    CHECK(flat.s_map(0, 0) == 0);

    // interpolated samples commute with increasing affine maps, not with arbitrary monotone ones
    const auto g = noise(20, 11);
    Grid<double> mono = g;
    for (double& v : mono.values()) v = 2.5 * v + 4;
    CHECK(clbp(g, {8, 3, ClbpEncoding::riu2}).s_map == clbp(mono, {8, 3, ClbpEncoding::riu2}).s_map);

    Grid<double> checker(16, 16);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j) checker(i, j) = (i + j) % 2 ? 1.0 : 0.0;
    const auto c = clbp(checker, {8, 3, ClbpEncoding::riu2});
    const auto ref = oracle::clbp(checker, 8, 3, true);
    CHECK(c.s_map == ref.s);
    std::set<int> codes;
    for (std::size_t i = 3; i < 13; ++i)
        for (std::size_t j = 3; j < 13; ++j) codes.insert(c.s_map(i, j));
    CHECK(codes.size() == 2);

    CHECK_THROWS(clbp(Grid<double>(6, 6, 0.0), {8, 3, ClbpEncoding::riu2}));
    CHECK_THROWS(clbp(g, {12, 3, ClbpEncoding::riu2}));
}
