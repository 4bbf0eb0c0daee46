#include "topotex/pipeline.hpp"

#include <cmath>
#include <stdexcept>

#include "topotex/parallel.hpp"

namespace topotex {

void DescriptorConfig::validate() const {
    pi.validate();
    if (descriptors.empty()) throw std::invalid_argument("descriptor config: no descriptors selected");
    if (essential == EssentialPolicy::keep)
        throw std::invalid_argument("descriptor config: essential policy 'keep' leaves infinite intervals");
    if (prefilter == PrefilterMode::schmid || prefilter == PrefilterMode::mr)
        if (filter_size < 3 || filter_size % 2 == 0)
            throw std::invalid_argument("descriptor config: filter_size must be odd and >= 3");
    if (prefilter == PrefilterMode::clbp) clbp.validate();
    if (!channel_limits.empty() && channel_limits.size() != channel_count(*this))
        throw std::invalid_argument("descriptor config: channel_limits has " + std::to_string(channel_limits.size()) +
                                    " entries, expected " + std::to_string(channel_count(*this)));
    for (const auto& l : channel_limits)
        if (!(l.max > l.min)) throw std::invalid_argument("descriptor config: channel limits need max > min");
}

Limits default_limits(LocalNorm norm) {
    return norm == LocalNorm::minmax ? Limits{0.0, 1.0} : Limits{-5.0, 5.0};
}

std::size_t channel_count(const DescriptorConfig& cfg) {
    switch (cfg.prefilter) {
        case PrefilterMode::none: return 1;
        case PrefilterMode::schmid: return 13;
        case PrefilterMode::mr: return 8;
        case PrefilterMode::clbp: return 2;
    }
    return 1;
}

std::size_t block_length(const DescriptorConfig& cfg) {
    std::size_t n = 0;
    for (auto k : cfg.descriptors) n += k == DescriptorKind::pi ? pi_vector_length(cfg.pi.resolution) : 12;
    return n;
}

std::size_t feature_length(const DescriptorConfig& cfg) { return channel_count(cfg) * block_length(cfg); }

std::vector<std::string> column_names(const DescriptorConfig& cfg) {
    std::vector<std::string> names;
    const std::size_t channels = channel_count(cfg);
    for (std::size_t c = 0; c < channels; ++c) {
        const std::string prefix = channels > 1 ? "c" + std::to_string(c) + "/" : "";
        for (auto k : cfg.descriptors) {
            if (k == DescriptorKind::pi) {
                for (int i = 0; i < cfg.pi.resolution; ++i)
                    for (int j = i; j < cfg.pi.resolution; ++j)
                        names.push_back(prefix + "pi_b" + std::to_string(i) + "_d" + std::to_string(j));
            } else {
                for (const char* s : kPdAggNames) names.push_back(prefix + "pdagg_" + s);
            }
        }
    }
    return names;
}

std::string descriptor_tag(const DescriptorConfig& cfg) {
    std::string tag;
    for (auto k : cfg.descriptors) tag += (tag.empty() ? "" : "+") + to_string(k);
    return tag;
}

FeatureExtractor::FeatureExtractor(DescriptorConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.prefilter == PrefilterMode::schmid) bank_ = std::make_unique<FilterBank>(schmid_bank(cfg_.filter_size));
    if (cfg_.prefilter == PrefilterMode::mr) bank_ = std::make_unique<FilterBank>(mr_bank(cfg_.filter_size));
}

FeatureExtractor::~FeatureExtractor() = default;

const BankConvolver& FeatureExtractor::convolver(std::size_t rows, std::size_t cols) const {
    std::lock_guard lock(mutex_);
    auto& slot = convolvers_[{rows, cols}];
    if (!slot) slot = std::make_unique<BankConvolver>(*bank_, rows, cols);
    return *slot;
}

std::vector<Grid<double>> FeatureExtractor::channels(const Grid<double>& patch) const {
    Grid<double> p = local_normalize(patch, cfg_.local_norm);
    switch (cfg_.prefilter) {
        case PrefilterMode::none: return {std::move(p)};
        case PrefilterMode::schmid: return convolver(p.rows(), p.cols()).apply(p);
        case PrefilterMode::mr: return collapse_mr(convolver(p.rows(), p.cols()).apply(p));
        case PrefilterMode::clbp: {
            const ClbpMaps maps = clbp(p, cfg_.clbp);
            std::vector<Grid<double>> out;
            for (const auto* m : {&maps.s_map, &maps.m_map}) {
                Grid<double> g(m->rows(), m->cols());
                for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = m->values()[i];
                out.push_back(std::move(g));
            }
            return out;
        }
    }
    throw std::logic_error("unreachable");
}

Limits FeatureExtractor::limits_for(std::size_t channel) const {
    return cfg_.channel_limits.empty() ? cfg_.pi.limits : cfg_.channel_limits[channel];
}

std::vector<PersistenceDiagram> FeatureExtractor::diagrams(const Grid<double>& patch) const {
    std::vector<PersistenceDiagram> out;
    const auto ch = channels(patch);
    for (std::size_t c = 0; c < ch.size(); ++c)
        out.push_back(select_degrees(patch_persistence(ch[c], cfg_.essential, limits_for(c)), cfg_.degrees));
    return out;
}

FeatureVector FeatureExtractor::extract(const Grid<double>& patch) const { return vectorize(diagrams(patch)); }

FeatureVector FeatureExtractor::vectorize(const std::vector<PersistenceDiagram>& ds) const {
    if (ds.size() != channel_count(cfg_)) throw std::invalid_argument("vectorize: one diagram per channel needed");
    FeatureVector v;
    v.descriptor = descriptor_tag(cfg_);
    v.values.reserve(feature_length(cfg_));
    for (std::size_t c = 0; c < ds.size(); ++c) {
        PiParams params = cfg_.pi;
        params.limits = limits_for(c);
        for (auto k : cfg_.descriptors) {
            if (k == DescriptorKind::pi) {
                const auto pv = vectorize_pi(persistence_image(ds[c], params));
                v.values.insert(v.values.end(), pv.values.begin(), pv.values.end());
            } else {
                const auto agg = pd_agg(params.outlier_removal ? remove_outliers(ds[c], params.limits) : ds[c]);
                v.values.insert(v.values.end(), agg.begin(), agg.end());
            }
        }
    }
    return v;
}

std::vector<double> FeatureExtractor::pi_vector(const Grid<double>& patch) const {
    std::vector<double> out;
    const auto ds = diagrams(patch);
    for (std::size_t c = 0; c < ds.size(); ++c) {
        PiParams params = cfg_.pi;
        params.limits = limits_for(c);
        const auto pv = vectorize_pi(persistence_image(ds[c], params));
        out.insert(out.end(), pv.values.begin(), pv.values.end());
    }
    return out;
}

std::vector<std::vector<double>> FeatureExtractor::extract_all(const std::vector<Patch>& patches) const {
    std::vector<std::vector<double>> rows(patches.size());
    parallel_for(patches.size(), [&](std::size_t i) { rows[i] = extract(patches[i].values).values; });
    return rows;
}

void FeatureExtractor::fit_channel_limits(const std::vector<Patch>& patches, bool force) {
    if (cfg_.prefilter == PrefilterMode::none && !force) return;
    if (patches.empty()) throw std::invalid_argument("fit_channel_limits: no patches");
    const std::size_t nc = channel_count(cfg_);
    std::vector<std::vector<double>> sums(patches.size(), std::vector<double>(2 * nc, 0.0));
    std::vector<std::size_t> counts(patches.size(), 0);
    parallel_for(patches.size(), [&](std::size_t i) {
        const auto ch = channels(patches[i].values);
        for (std::size_t c = 0; c < nc; ++c)
            for (double v : ch[c].values()) {
                sums[i][2 * c] += v;
                sums[i][2 * c + 1] += v * v;
            }
        counts[i] = ch[0].size();
    });
    std::vector<Limits> limits(nc);
    double n = 0.0;
    for (auto k : counts) n += static_cast<double>(k);
    for (std::size_t c = 0; c < nc; ++c) {
        double s = 0.0, s2 = 0.0;
        for (const auto& row : sums) {
            s += row[2 * c];
            s2 += row[2 * c + 1];
        }
        const double mean = s / n;
        const double sd = std::sqrt(std::max(0.0, s2 / n - mean * mean));
        const double half = sd > 0.0 ? 5.0 * sd : 0.5;
        limits[c] = {mean - half, mean + half};
    }
    cfg_.channel_limits = std::move(limits);
}

std::string to_string(PrefilterMode m) {
    switch (m) {
        case PrefilterMode::none: return "none";
        case PrefilterMode::schmid: return "schmid";
        case PrefilterMode::mr: return "mr";
        case PrefilterMode::clbp: return "clbp";
    }
    return "?";
}

PrefilterMode parse_prefilter(const std::string& s) {
    if (s == "none") return PrefilterMode::none;
    if (s == "schmid") return PrefilterMode::schmid;
    if (s == "mr") return PrefilterMode::mr;
    if (s == "clbp") return PrefilterMode::clbp;
    throw std::invalid_argument("unknown prefilter '" + s + "'");
}

std::string to_string(DescriptorKind k) { return k == DescriptorKind::pi ? "pi" : "pdagg"; }

DescriptorKind parse_descriptor_kind(const std::string& s) {
    if (s == "pi") return DescriptorKind::pi;
    if (s == "pdagg" || s == "pd_agg") return DescriptorKind::pdagg;
    throw std::invalid_argument("unknown descriptor '" + s + "'");
}

std::string to_string(DegreeSet d) {
    switch (d) {
        case DegreeSet::h0: return "h0";
        case DegreeSet::h1: return "h1";
        case DegreeSet::both: return "both";
    }
    return "?";
}

DegreeSet parse_degree_set(const std::string& s) {
    if (s == "h0" || s == "0") return DegreeSet::h0;
    if (s == "h1" || s == "1") return DegreeSet::h1;
    if (s == "both" || s == "01") return DegreeSet::both;
    throw std::invalid_argument("unknown degree set '" + s + "'");
}

std::string to_string(EssentialPolicy p) {
    switch (p) {
        case EssentialPolicy::cap_at_max_value: return "cap_at_max_value";
        case EssentialPolicy::cap_at_limit: return "cap_at_limit";
        case EssentialPolicy::drop: return "drop";
        case EssentialPolicy::keep: return "keep";
    }
    return "?";
}

EssentialPolicy parse_essential_policy(const std::string& s) {
    if (s == "cap_at_max_value") return EssentialPolicy::cap_at_max_value;
    if (s == "cap_at_limit") return EssentialPolicy::cap_at_limit;
    if (s == "drop") return EssentialPolicy::drop;
    if (s == "keep") return EssentialPolicy::keep;
    throw std::invalid_argument("unknown essential policy '" + s + "'");
}

}  // namespace topotex
