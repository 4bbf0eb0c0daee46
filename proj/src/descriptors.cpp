#include "topotex/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace topotex {

namespace {

// Type-7 quantile of sorted data: h = (n - 1) q.
double quantile_sorted(const std::vector<double>& s, double q) {
    const double h = (static_cast<double>(s.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

// Standard normal mass on [a, b], evaluated on the tail that keeps precision.
double normal_mass(double a, double b) {
    constexpr double r = 0.70710678118654752440;  // 1/sqrt(2)
    if (a >= 0.0) return 0.5 * (std::erfc(a * r) - std::erfc(b * r));
    if (b <= 0.0) return 0.5 * (std::erfc(-b * r) - std::erfc(-a * r));
    return 1.0 - 0.5 * std::erfc(b * r) - 0.5 * std::erfc(-a * r);
}

}  // namespace

PdAggVector pd_agg(const PersistenceDiagram& d) {
    PdAggVector out{};
    std::vector<double> len;
    len.reserve(d.intervals.size());
    for (const auto& iv : d.intervals) {
        if (iv.essential()) throw std::invalid_argument("pd_agg: essential interval left in diagram");
        len.push_back(iv.length());
    }
    if (len.empty()) return out;
    // Sorting first makes every reduction order-independent.
    std::sort(len.begin(), len.end());
    const double n = static_cast<double>(len.size());
    double sum = 0.0, sum_sqrt = 0.0, sum_sq = 0.0;
    for (double x : len) {
        sum += x;
        sum_sqrt += std::sqrt(x);
        sum_sq += x * x;
    }
    const double mean = sum / n;
    double var = 0.0;
    for (double x : len) var += (x - mean) * (x - mean);
    var /= n;
    out = {n,
           len.front(),
           len.back(),
           mean,
           std::sqrt(var),
           var,
           quantile_sorted(len, 0.25),
           quantile_sorted(len, 0.5),
           quantile_sorted(len, 0.75),
           sum_sqrt,
           sum,
           sum_sq};
    return out;
}

void PiParams::validate() const {
    if (resolution < 2) throw std::invalid_argument("PiParams: resolution must be >= 2");
    if (!(sigma_x > 0.0) || !(sigma_y > 0.0)) throw std::invalid_argument("PiParams: sigmas must be positive");
    if (!(limits.max > limits.min)) throw std::invalid_argument("PiParams: limits need max > min");
}

double weight(double birth, double death, Weighting scheme, Limits limits) {
    const double p = death - birth;
    const double span = limits.max - limits.min;
    switch (scheme) {
        case Weighting::none: return 1.0;
        case Weighting::linear: return p / span;
        case Weighting::exponential: return std::expm1(4.0 * p / span) / std::expm1(4.0);
    }
    throw std::logic_error("unreachable");
}

PersistenceDiagram remove_outliers(const PersistenceDiagram& d, Limits limits) {
    PersistenceDiagram out{{}, limits, d.essential_policy};
    for (const auto& iv : d.intervals)
        if (!(iv.birth < limits.min || iv.death > limits.max)) out.intervals.push_back(iv);
    return out;
}

PersistenceImage persistence_image(const PersistenceDiagram& d, const PiParams& params) {
    params.validate();
    PersistenceDiagram filtered;
    if (params.outlier_removal) filtered = remove_outliers(d, params.limits);
    const PersistenceDiagram& diagram = params.outlier_removal ? filtered : d;

    const auto R = static_cast<std::size_t>(params.resolution);
    const double lo = params.limits.min;
    const double span = params.limits.max - params.limits.min;
    std::vector<double> edge(R + 1);
    for (std::size_t i = 0; i <= R; ++i) edge[i] = lo + span * static_cast<double>(i) / static_cast<double>(R);

    PersistenceImage img{params, Grid<double>(R, R, 0.0)};
    std::vector<double> mx(R), my(R);
    for (const auto& iv : diagram.intervals) {
        if (!std::isfinite(iv.birth) || !std::isfinite(iv.death))
            throw std::invalid_argument("persistence_image: non-finite interval");
        const double g = weight(iv.birth, iv.death, params.weighting, params.limits);
        if (g == 0.0) continue;
        for (std::size_t i = 0; i < R; ++i) {
            mx[i] = normal_mass((edge[i] - iv.birth) / params.sigma_x, (edge[i + 1] - iv.birth) / params.sigma_x);
            my[i] = normal_mass((edge[i] - iv.death) / params.sigma_y, (edge[i + 1] - iv.death) / params.sigma_y);
        }
        for (std::size_t i = 0; i < R; ++i) {
            if (mx[i] == 0.0) continue;
            const double gx = g * mx[i];
            for (std::size_t j = 0; j < R; ++j) img.pixels(i, j) += gx * my[j];
        }
    }
    for (double v : img.pixels.values())
        if (!std::isfinite(v)) throw std::runtime_error("persistence_image: non-finite accumulation");
    return img;
}

FeatureVector vectorize_pi(const PersistenceImage& img) {
    const auto R = img.pixels.rows();
    FeatureVector v;
    v.values.reserve(R * (R + 1) / 2);
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = i; j < R; ++j) v.values.push_back(img.pixels(i, j));
    v.descriptor = "pi";
    return v;
}

int pi_resolution_for_length(std::size_t length) {
    const auto r = static_cast<int>(std::llround((std::sqrt(8.0 * static_cast<double>(length) + 1.0) - 1.0) / 2.0));
    if (r < 1 || pi_vector_length(r) != length)
        throw std::invalid_argument("length " + std::to_string(length) + " is not a triangular PI size");
    return r;
}

Grid<double> unvectorize_pi(const std::vector<double>& values, int resolution) {
    if (values.size() != pi_vector_length(resolution))
        throw std::invalid_argument("unvectorize_pi: length does not match resolution");
    const auto R = static_cast<std::size_t>(resolution);
    Grid<double> g(R, R, 0.0);
    std::size_t k = 0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = i; j < R; ++j) g(i, j) = values[k++];
    return g;
}

std::string to_string(Weighting w) {
    switch (w) {
        case Weighting::none: return "none";
        case Weighting::linear: return "linear";
        case Weighting::exponential: return "exponential";
    }
    return "?";
}

Weighting parse_weighting(const std::string& s) {
    if (s == "none") return Weighting::none;
    if (s == "linear") return Weighting::linear;
    if (s == "exponential") return Weighting::exponential;
    throw std::invalid_argument("unknown weighting '" + s + "'");
}

}  // namespace topotex
