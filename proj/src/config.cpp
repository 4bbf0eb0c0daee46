#include "topotex/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "topotex/feature_csv.hpp"
#include "topotex/seed.hpp"

namespace topotex {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object and rejects the ones nobody asked for.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    template <class T>
    void get(const char* key, T& out) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where() + "." + key + ": " + e.what());
        }
    }

    template <class Parse, class T>
    void get_enum(const char* key, T& out, Parse parse) {
        std::string s;
        if (!j_.contains(key)) return;
        get(key, s);
        try {
            out = parse(s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(where() + "." + key + ": " + e.what());
        }
    }

    Limits limits(const json& v, const std::string& key) const {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            throw ConfigError(where() + "." + key + " must be [min, max]");
        return {v[0].get<double>(), v[1].get<double>()};
    }

    void get_limits(const char* key, Limits& out) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        out = limits(j_.at(key), key);
    }

    Reader child(const char* key) {
        used_.insert(key);
        return Reader(j_.at(key), path_ + "." + key);
    }

    const json& raw(const char* key) {
        used_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw ConfigError("unknown key " + path_ + "." + k);
    }

    std::string where() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

json limits_json(const Limits& l) { return json::array({l.min, l.max}); }

json descriptor_to(const DescriptorConfig& d) {
    json desc = json::array();
    for (auto k : d.descriptors) desc.push_back(to_string(k));
    json cl = json::array();
    for (const auto& l : d.channel_limits) cl.push_back(limits_json(l));
    return {{"local_norm", to_string(d.local_norm)},
            {"prefilter", to_string(d.prefilter)},
            {"filter_size", d.filter_size},
            {"clbp", {{"n", d.clbp.n}, {"r", d.clbp.r}, {"encoding", to_string(d.clbp.encoding)}}},
            {"descriptors", desc},
            {"degrees", to_string(d.degrees)},
            {"essential_policy", to_string(d.essential)},
            {"pi",
             {{"resolution", d.pi.resolution},
              {"sigma_x", d.pi.sigma_x},
              {"sigma_y", d.pi.sigma_y},
              {"limits", limits_json(d.pi.limits)},
              {"weighting", to_string(d.pi.weighting)},
              {"outlier_removal", d.pi.outlier_removal}}},
            {"channel_limits", cl}};
}

DescriptorConfig descriptor_from(Reader r) {
    DescriptorConfig d;
    r.get_enum("local_norm", d.local_norm, parse_local_norm);
    r.get_enum("prefilter", d.prefilter, parse_prefilter);
    r.get("filter_size", d.filter_size);
    if (r.has("clbp")) {
        Reader c = r.child("clbp");
        c.get("n", d.clbp.n);
        c.get("r", d.clbp.r);
        c.get_enum("encoding", d.clbp.encoding, parse_clbp_encoding);
        c.finish();
    }
    if (r.has("descriptors")) {
        const json& v = r.raw("descriptors");
        if (!v.is_array()) throw ConfigError(r.where() + ".descriptors must be a list");
        d.descriptors.clear();
        for (const auto& s : v) {
            if (!s.is_string()) throw ConfigError(r.where() + ".descriptors must hold strings");
            try {
                d.descriptors.push_back(parse_descriptor_kind(s.get<std::string>()));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(r.where() + ".descriptors: " + e.what());
            }
        }
    }
    r.get_enum("degrees", d.degrees, parse_degree_set);
    r.get_enum("essential_policy", d.essential, parse_essential_policy);
    bool limits_given = false;
    if (r.has("pi")) {
        Reader p = r.child("pi");
        p.get("resolution", d.pi.resolution);
        if (p.has("sigma")) {
            double s = 0.0;
            p.get("sigma", s);
            d.pi.sigma_x = d.pi.sigma_y = s;
        }
        p.get("sigma_x", d.pi.sigma_x);
        p.get("sigma_y", d.pi.sigma_y);
        limits_given = p.has("limits");
        p.get_limits("limits", d.pi.limits);
        p.get_enum("weighting", d.pi.weighting, parse_weighting);
        p.get("outlier_removal", d.pi.outlier_removal);
        p.finish();
    }
    if (!limits_given) d.pi.limits = default_limits(d.local_norm);
    if (r.has("channel_limits")) {
        const json& v = r.raw("channel_limits");
        if (!v.is_array()) throw ConfigError(r.where() + ".channel_limits must be a list");
        for (const auto& l : v) d.channel_limits.push_back(r.limits(l, "channel_limits"));
    }
    r.finish();
    try {
        d.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return d;
}

}  // namespace

std::string descriptor_json(const DescriptorConfig& d) { return descriptor_to(d).dump(); }

DescriptorConfig parse_descriptor_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("descriptor config: ") + e.what());
    }
    return descriptor_from(Reader(j, "descriptor"));
}

std::string descriptor_hash(const DescriptorConfig& d, std::size_t patch_size, std::size_t stride) {
    return hex64(fnv1a64(descriptor_json(d) + "|" + std::to_string(patch_size) + "|" + std::to_string(stride)));
}

RunConfig parse_run_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig cfg;
    Reader r(j, "config");
    r.get("patch_size", cfg.patch_size);
    r.get("stride", cfg.stride);
    r.get("label_threshold", cfg.label_threshold);
    r.get("seed", cfg.seed);
    if (r.has("descriptor")) cfg.descriptor = descriptor_from(r.child("descriptor"));
    if (r.has("learner")) {
        Reader l = r.child("learner");
        l.get("rounds", cfg.learner.rounds);
        l.get("max_depth", cfg.learner.max_depth);
        l.get("undersample", cfg.learner.undersample);
        l.get("balance_ratio", cfg.learner.balance_ratio);
        l.finish();
    }
    if (r.has("protocol")) {
        Reader p = r.child("protocol");
        p.get("repetitions", cfg.protocol.repetitions);
        p.get("subset_fraction", cfg.protocol.subset_fraction);
        p.get("folds", cfg.protocol.folds);
        p.get("depths", cfg.protocol.depths);
        p.get("rounds", cfg.protocol.rounds);
        p.get("balance_ratio", cfg.protocol.balance_ratio);
        if (p.has("selection")) {
            Reader s = p.child("selection");
            s.get("enabled", cfg.protocol.selection.enabled);
            s.get_enum("method", cfg.protocol.selection.method, parse_ranking_method);
            s.get("percent", cfg.protocol.selection.percent);
            s.finish();
        }
        p.finish();
    }
    if (r.has("stability")) {
        Reader s = r.child("stability");
        s.get("snr_levels", cfg.stability.snr_levels);
        s.get("offsets", cfg.stability.offsets);
        s.get("patches", cfg.stability.patches);
        s.finish();
    }
    if (r.has("sweep")) {
        Reader s = r.child("sweep");
        s.get("resolutions", cfg.sweep.resolutions);
        s.get("sigmas", cfg.sweep.sigmas);
        s.finish();
    }
    if (r.has("synth")) {
        Reader s = r.child("synth");
        auto& d = cfg.synth;
        s.get("size", d.size);
        s.get("natural_per_split", d.natural_per_split);
        s.get("engraved_per_split", d.engraved_per_split);
        s.get("spacing_i", d.spacing_i);
        s.get("spacing_ii", d.spacing_ii);
        s.get("jitter", d.jitter);
        s.get("pit_depth", d.base.pit_depth);
        s.get("pit_sigma", d.base.pit_sigma);
        s.get("noise_rms", d.base.noise_rms);
        s.get("noise_corr_len", d.base.noise_corr_len);
        s.finish();
    }
    r.finish();

    if (cfg.patch_size < 2 || cfg.stride < 1) throw ConfigError("config: need patch_size >= 2 and stride >= 1");
    if (!(cfg.label_threshold > 0.0 && cfg.label_threshold <= 1.0))
        throw ConfigError("config: label_threshold must be in (0, 1]");
    try {
        cfg.protocol.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_run_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string to_json(const RunConfig& cfg) {
    const auto& p = cfg.protocol;
    const auto& s = cfg.synth;
    json j = {
        {"patch_size", cfg.patch_size},
        {"stride", cfg.stride},
        {"label_threshold", cfg.label_threshold},
        {"seed", cfg.seed},
        {"descriptor", descriptor_to(cfg.descriptor)},
        {"learner",
         {{"rounds", cfg.learner.rounds},
          {"max_depth", cfg.learner.max_depth},
          {"undersample", cfg.learner.undersample},
          {"balance_ratio", cfg.learner.balance_ratio}}},
        {"protocol",
         {{"repetitions", p.repetitions},
          {"subset_fraction", p.subset_fraction},
          {"folds", p.folds},
          {"depths", p.depths},
          {"rounds", p.rounds},
          {"balance_ratio", p.balance_ratio},
          {"selection",
           {{"enabled", p.selection.enabled},
            {"method", to_string(p.selection.method)},
            {"percent", p.selection.percent}}}}},
        {"stability",
         {{"snr_levels", cfg.stability.snr_levels},
          {"offsets", cfg.stability.offsets},
          {"patches", cfg.stability.patches}}},
        {"sweep", {{"resolutions", cfg.sweep.resolutions}, {"sigmas", cfg.sweep.sigmas}}},
        {"synth",
         {{"size", s.size},
          {"natural_per_split", s.natural_per_split},
          {"engraved_per_split", s.engraved_per_split},
          {"spacing_i", s.spacing_i},
          {"spacing_ii", s.spacing_ii},
          {"jitter", s.jitter},
          {"pit_depth", s.base.pit_depth},
          {"pit_sigma", s.base.pit_sigma},
          {"noise_rms", s.base.noise_rms},
          {"noise_corr_len", s.base.noise_corr_len}}},
    };
    return j.dump(2);
}

}  // namespace topotex
