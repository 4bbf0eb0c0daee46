#include "topotex/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "topotex/seed.hpp"

namespace topotex {


void SynthConfig::validate() const {
    if (height == 0 || width == 0) throw std::invalid_argument("synth: empty size");
    if (!(spacing_mean > 2.0 * spacing_jitter) || spacing_jitter < 0.0)
        throw std::invalid_argument("synth: need spacing_mean > 2 * spacing_jitter >= 0");
    if (!(pit_depth > 0.0) || pit_sigma < 0.0 || !(noise_rms > 0.0) || noise_corr_len < 0.0)
        throw std::invalid_argument("synth: scales must be positive");
}

DepthMap gen_flat(std::size_t height, std::size_t width) { return DepthMap(Grid<double>(height, width, 0.0)); }

Engraving gen_engraved(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "pits"));
    const double sigma = cfg.effective_pit_sigma();
    Engraving e;
    e.pit_sigma = sigma;
    for (double cy = cfg.spacing_mean / 2.0; cy < static_cast<double>(cfg.height); cy += cfg.spacing_mean)
        for (double cx = cfg.spacing_mean / 2.0; cx < static_cast<double>(cfg.width); cx += cfg.spacing_mean) {
            const double jy = (2.0 * uniform_open(rng) - 1.0) * cfg.spacing_jitter;
            const double jx = (2.0 * uniform_open(rng) - 1.0) * cfg.spacing_jitter;
            e.centers.push_back({cy + jy, cx + jx});
        }

    Grid<double> z(cfg.height, cfg.width, 0.0);
    const double cut = 6.0 * sigma;
    const auto H = static_cast<long long>(cfg.height), W = static_cast<long long>(cfg.width);
    for (const auto& [cy, cx] : e.centers) {
        const auto r0 = std::max(0LL, static_cast<long long>(std::floor(cy - cut)));
        const auto r1 = std::min(H - 1, static_cast<long long>(std::ceil(cy + cut)));
        const auto c0 = std::max(0LL, static_cast<long long>(std::floor(cx - cut)));
        const auto c1 = std::min(W - 1, static_cast<long long>(std::ceil(cx + cut)));
        for (long long r = r0; r <= r1; ++r)
            for (long long c = c0; c <= c1; ++c) {
                const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
                if (d2 > cut * cut) continue;
                z(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) -=
                    cfg.pit_depth * std::exp(-d2 / (2.0 * sigma * sigma));
            }
    }
    e.surface = DepthMap(std::move(z));
    return e;
}

DepthMap gen_noise_field(std::size_t height, std::size_t width, double corr_len, double rms, std::uint64_t seed) {
    if (height == 0 || width == 0) throw std::invalid_argument("noise field: empty size");
    if (corr_len < 0.0 || !(rms > 0.0)) throw std::invalid_argument("noise field: need corr_len >= 0, rms > 0");
    Rng rng(derive_seed(seed, "noise"));
    const auto m = static_cast<std::size_t>(std::ceil(4.0 * corr_len));
    const std::size_t ph = height + 2 * m, pw = width + 2 * m;
    std::vector<double> white(ph * pw);
    for (auto& v : white) v = standard_normal(rng);

    Grid<double> out(height, width);
    if (m == 0) {
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c) out(r, c) = white[r * pw + c];
    } else {
        std::vector<double> k(2 * m + 1);
        for (std::size_t i = 0; i < k.size(); ++i) {
            const double x = static_cast<double>(i) - static_cast<double>(m);
            k[i] = std::exp(-x * x / (2.0 * corr_len * corr_len));
        }
        // rows first (valid columns only), then columns
        std::vector<double> tmp(ph * width, 0.0);
        for (std::size_t r = 0; r < ph; ++r)
            for (std::size_t c = 0; c < width; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < k.size(); ++i) s += k[i] * white[r * pw + c + i];
                tmp[r * width + c] = s;
            }
        for (std::size_t r = 0; r < height; ++r)
            for (std::size_t c = 0; c < width; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < k.size(); ++i) s += k[i] * tmp[(r + i) * width + c];
                out(r, c) = s;
            }
    }
    double mean = 0.0;
    for (double v : out.values()) mean += v;
    mean /= static_cast<double>(out.size());
    double ss = 0.0;
    for (double& v : out.values()) {
        v -= mean;
        ss += v * v;
    }
    const double scale = rms / std::sqrt(ss / static_cast<double>(out.size()));
    for (double& v : out.values()) v *= scale;
    return DepthMap(std::move(out));
}

DepthMap compose(const DepthMap& surface, const DepthMap& noise) {
    if (surface.height() != noise.height() || surface.width() != noise.width())
        throw std::invalid_argument("compose: shape mismatch");
    Grid<double> sum = surface.depth();
    const auto n = noise.depth().values();
    auto s = sum.values();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += n[i];
    return z_standardize_global(DepthMap(std::move(sum)));
}

LabelMask pit_mask(std::size_t height, std::size_t width, const std::vector<std::array<double, 2>>& centers,
                   double radius) {
    Grid<std::uint8_t> g(height, width, 2);
    const double r2 = radius * radius;
    const auto H = static_cast<long long>(height), W = static_cast<long long>(width);
    for (const auto& [cy, cx] : centers) {
        const auto r0 = std::max(0LL, static_cast<long long>(std::floor(cy - radius)));
        const auto r1 = std::min(H - 1, static_cast<long long>(std::ceil(cy + radius)));
        const auto c0 = std::max(0LL, static_cast<long long>(std::floor(cx - radius)));
        const auto c1 = std::min(W - 1, static_cast<long long>(std::ceil(cx + radius)));
        for (long long r = r0; r <= r1; ++r)
            for (long long c = c0; c <= c1; ++c)
                if ((r - cy) * (r - cy) + (c - cx) * (c - cx) <= r2)
                    g(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1;
    }
    return LabelMask(std::move(g));
}

std::vector<SynthMap> make_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
    std::vector<SynthMap> out;
    std::uint64_t index = 0;
    for (const char* split : {"train", "test"}) {
        for (std::size_t k = 0; k < cfg.natural_per_split + cfg.engraved_per_split; ++k, ++index) {
            SynthConfig sc = cfg.base;
            sc.height = sc.width = cfg.size;
            sc.seed = derive_seed(seed, "synth-surface", index);
            const DepthMap noise =
                gen_noise_field(cfg.size, cfg.size, sc.noise_corr_len, sc.noise_rms, derive_seed(seed, "synth-noise", index));
            SynthMap m;
            m.split = split;
            if (k < cfg.natural_per_split) {
                m.surface = "natural";
                m.map = compose(gen_flat(cfg.size, cfg.size), noise);
                m.mask = LabelMask(Grid<std::uint8_t>(cfg.size, cfg.size, 2));
            } else {
                const bool first = (k - cfg.natural_per_split) % 2 == 0;
                m.surface = first ? "engraved_i" : "engraved_ii";
                sc.spacing_mean = first ? cfg.spacing_i : cfg.spacing_ii;
                sc.spacing_jitter = cfg.jitter;
                const Engraving e = gen_engraved(sc);
                m.map = compose(e.surface, noise);
                m.mask = pit_mask(cfg.size, cfg.size, e.centers, 2.0 * e.pit_sigma);
            }
            m.id = std::string(split) + "_" + std::to_string(k) + "_" + m.surface;
            out.push_back(std::move(m));
        }
    }
    return out;
}

}  // namespace topotex
