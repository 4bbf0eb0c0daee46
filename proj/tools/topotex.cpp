// topotex: command-line front end for extraction, training, evaluation and
// the synthetic/stability/sweep experiments.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "topotex/config.hpp"
#include "topotex/eval.hpp"
#include "topotex/feature_csv.hpp"
#include "topotex/grid_io.hpp"
#include "topotex/learn.hpp"
#include "topotex/parallel.hpp"
#include "topotex/pipeline.hpp"
#include "topotex/seed.hpp"
#include "topotex/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace topotex;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
};

RunConfig resolve(const Globals& g) {
    RunConfig cfg = g.config_path.empty() ? parse_run_config("{}") : load_run_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Every output directory records the configuration and seed it was made with.
fs::path prepare_out(const std::string& dir, const RunConfig& cfg) {
    fs::path out(dir);
    fs::create_directories(out);
    write_text(out / "run_config.json", to_json(cfg) + "\n");
    write_text(out / "seed.txt", std::to_string(cfg.seed) + "\n");
    return out;
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

MapFormat format_for(const fs::path& p, const std::string& format) {
    return format == "auto" ? format_from_path(p) : parse_map_format(format);
}

// Unique source ids from file stems.
std::vector<std::string> source_ids(const std::vector<std::string>& paths) {
    std::vector<std::string> ids;
    std::map<std::string, int> seen;
    for (const auto& p : paths) {
        std::string id = fs::path(p).stem().string();
        const int n = seen[id]++;
        ids.push_back(n ? id + "_" + std::to_string(n) : id);
    }
    return ids;
}

struct Source {
    std::string id;
    DepthMap map;
    std::optional<LabelMask> mask;
};

// Manifest: CSV with header id,surface,split,map,mask; paths relative to the manifest.
std::vector<std::pair<std::string, Source>> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "id,surface,split,map,mask")
        throw ParseError(path.string() + ": expected header 'id,surface,split,map,mask'", 0);
    std::vector<std::pair<std::string, Source>> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            ++line_no;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (cells.size() != 5) throw ParseError(path.string() + ": expected 5 fields", line_no);
        const fs::path base = path.parent_path();
        Source s;
        s.id = cells[0];
        s.map = load_depth_map(base / cells[3], format_from_path(cells[3]));
        if (!cells[4].empty()) s.mask = load_label_mask(base / cells[4]);
        out.emplace_back(cells[2], std::move(s));
        ++line_no;
    }
    return out;
}

struct Extracted {
    FeatureTable table;
    std::vector<std::vector<PersistenceDiagram>> diagrams;  // per row, kept for sweeps
};

std::vector<Patch> patches_of(const std::vector<Source>& sources, const RunConfig& cfg) {
    std::vector<Patch> all;
    for (const auto& s : sources) {
        auto ps = extract_patches(s.map, cfg.patch_size, cfg.stride, s.id);
        all.insert(all.end(), ps.patches.begin(), ps.patches.end());
    }
    return all;
}

FeatureTable build_table(const std::vector<Source>& sources, const FeatureExtractor& fx, const RunConfig& cfg,
                         std::vector<std::vector<PersistenceDiagram>>* diagrams = nullptr) {
    FeatureTable t;
    t.descriptor = descriptor_tag(fx.config());
    t.config_hash = descriptor_hash(fx.config(), cfg.patch_size, cfg.stride);
    t.config_json = descriptor_json(fx.config());
    t.patch_size = cfg.patch_size;
    t.stride = cfg.stride;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (const auto& s : sources) {
        if (s.mask && (s.mask->height() != s.map.height() || s.mask->width() != s.map.width()))
            throw std::invalid_argument("mask of '" + s.id + "' does not match its map size");
        const PatchSet ps = extract_patches(s.map, cfg.patch_size, cfg.stride, s.id);
        std::vector<std::vector<double>> feats(ps.patches.size());
        std::vector<std::vector<PersistenceDiagram>> ds(ps.patches.size());
        parallel_for(ps.patches.size(), [&](std::size_t i) {
            ds[i] = fx.diagrams(ps.patches[i].values);
            feats[i] = fx.vectorize(ds[i]).values;
        });
        for (std::size_t i = 0; i < ps.patches.size(); ++i) {
            rows.push_back(std::move(feats[i]));
            labels.push_back(s.mask ? patch_label(*s.mask, ps.patches[i], cfg.label_threshold) : 0);
            if (diagrams) diagrams->push_back(std::move(ds[i]));
        }
        t.sources.push_back({s.id, s.map.height(), s.map.width(), ps.patches.size()});
    }
    t.matrix = FeatureMatrix(std::move(rows), std::move(labels), column_names(fx.config()));
    return t;
}

std::string summary(const ProtocolReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "DSC %.4f +- %.4f over %zu repetitions (all class 2: %.4f)", r.mean, r.std,
                  r.repetitions.size(), r.trivial_dsc);
    return buf;
}

json report_json(const ProtocolReport& r) {
    json reps = json::array();
    for (const auto& x : r.repetitions)
        reps.push_back({{"seed", x.seed},
                        {"subset_rows", x.subset_rows},
                        {"features", x.features},
                        {"depth", x.depth},
                        {"rounds", x.rounds},
                        {"cv_dsc", x.cv_dsc},
                        {"dsc", x.dsc}});
    return {{"master_seed", r.master_seed},
            {"mean_dsc", r.mean},
            {"std_dsc", r.std},
            {"trivial_dsc", r.trivial_dsc},
            {"repetitions", reps}};
}

void write_grid_csv(const Grid<double>& g, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) out << (c ? "," : "") << g17(g(r, c));
        out << '\n';
    }
}

// ---- subcommands ----

struct ExtractArgs {
    std::vector<std::string> maps;
    std::vector<std::string> masks;
    std::string format = "auto";
    std::string out;
    bool fit_limits = false;
    std::string limits_from;
};

void cmd_extract(const Globals& g, const ExtractArgs& a) {
    RunConfig cfg = resolve(g);
    if (!a.masks.empty() && a.masks.size() != a.maps.size())
        throw std::invalid_argument("--masks needs one mask per map");
    if (a.fit_limits && !a.limits_from.empty())
        throw std::invalid_argument("--fit-limits and --limits-from are exclusive");
    const auto ids = source_ids(a.maps);
    std::vector<Source> sources;
    for (std::size_t i = 0; i < a.maps.size(); ++i) {
        Source s{ids[i], load_depth_map(a.maps[i], format_for(a.maps[i], a.format)), {}};
        if (!a.masks.empty()) s.mask = load_label_mask(a.masks[i]);
        sources.push_back(std::move(s));
    }
    DescriptorConfig d = cfg.descriptor;
    if (!a.limits_from.empty()) {
        const FeatureTable ref = read_feature_csv(a.limits_from);
        if (ref.config_json.empty()) throw std::invalid_argument(a.limits_from + ": no descriptor config recorded");
        d.channel_limits = parse_descriptor_json(ref.config_json).channel_limits;
    }
    FeatureExtractor fx(d);
    if (a.fit_limits) fx.fit_channel_limits(patches_of(sources, cfg));
    cfg.descriptor = fx.config();

    const FeatureTable t = build_table(sources, fx, cfg);
    const fs::path out = prepare_out(a.out, cfg);
    write_feature_csv(t, out / "features.csv");
    std::cout << "features: " << t.matrix.rows() << " rows x " << t.matrix.cols() + 1 << " columns, hash "
              << t.config_hash << " -> " << (out / "features.csv").string() << "\n";
}

struct TrainArgs {
    std::string features;
    std::string out;
};

void cmd_train(const Globals& g, const TrainArgs& a) {
    const RunConfig cfg = resolve(g);
    const FeatureTable t = read_feature_csv(a.features);
    BoostModel m = rusboost_train(t.matrix, cfg.learner, derive_seed(cfg.seed, "train"));
    m.provenance = t.config_hash;
    const fs::path out = prepare_out(a.out, cfg);
    std::ofstream f(out / "model.txt");
    if (!f) throw std::runtime_error("cannot write " + (out / "model.txt").string());
    save_model(m, f);
    const auto p = predict_labels(m, t.matrix);
    std::size_t right = 0;
    for (std::size_t i = 0; i < p.size(); ++i) right += p[i] == t.matrix.labels()[i];
    std::cout << "model: " << m.trees.size() << " trees on " << t.matrix.rows() << " rows, training accuracy "
              << static_cast<double>(right) / static_cast<double>(p.size()) << " -> "
              << (out / "model.txt").string() << "\n";
}

struct PredictArgs {
    std::string model;
    std::string features;
    std::vector<std::string> masks;
    std::string out;
};

void cmd_predict(const Globals& g, const PredictArgs& a) {
    const RunConfig cfg = resolve(g);
    std::ifstream mf(a.model);
    if (!mf) throw std::runtime_error("cannot open " + a.model);
    const BoostModel m = load_model(mf);
    const FeatureTable t = read_feature_csv(a.features);
    if (m.provenance != t.config_hash)
        throw std::runtime_error("provenance mismatch: model was trained on features with hash '" + m.provenance +
                                 "', " + a.features + " has '" + t.config_hash + "'");
    if (m.n_features != t.matrix.cols()) throw std::runtime_error("model and feature widths differ");
    if (!a.masks.empty() && a.masks.size() != t.sources.size())
        throw std::invalid_argument("--masks needs one mask per source in the feature file");

    const fs::path out = prepare_out(a.out, cfg);
    const auto refs = patch_refs(t);
    std::vector<Prediction> preds(t.matrix.rows());
    parallel_for(preds.size(), [&](std::size_t i) { preds[i] = predict(m, t.matrix.row(i)); });
    {
        std::ofstream f(out / "predictions.csv");
        f << "source,row,col,label,score\n";
        for (std::size_t i = 0; i < preds.size(); ++i)
            f << t.sources[refs[i].source].id << ',' << refs[i].row << ',' << refs[i].col << ',' << preds[i].label
              << ',' << g17(preds[i].score) << '\n';
    }
    std::vector<LabelMask> truth;
    const bool labelled = t.matrix.count(0) == 0;
    if (!a.masks.empty())
        for (const auto& p : a.masks) truth.push_back(load_label_mask(p));
    else if (labelled)
        truth = truth_from_patch_labels(t);

    Overlap pooled;
    std::size_t row = 0;
    for (std::size_t s = 0; s < t.sources.size(); ++s) {
        std::vector<std::pair<std::size_t, std::size_t>> origins;
        std::vector<int> cls;
        for (std::size_t k = 0; k < t.sources[s].rows; ++k, ++row) {
            origins.emplace_back(refs[row].row, refs[row].col);
            cls.push_back(preds[row].label);
        }
        const LabelMask mask = rasterize_votes(t.sources[s].height, t.sources[s].width, t.patch_size, origins, cls);
        save_label_mask(mask, out / (t.sources[s].id + "_pred.pgm"));
        if (!truth.empty()) {
            if (truth[s].height() != mask.height() || truth[s].width() != mask.width())
                throw std::invalid_argument("truth mask of '" + t.sources[s].id + "' has the wrong size");
            const auto p = mask.labels().values(), q = truth[s].labels().values();
            for (std::size_t i = 0; i < p.size(); ++i) pooled.add(p[i], q[i]);
        }
    }
    std::cout << "predicted " << preds.size() << " patches over " << t.sources.size() << " maps";
    if (!truth.empty()) std::cout << ", DSC " << pooled.dsc();
    std::cout << " -> " << out.string() << "\n";
}

struct EvaluateArgs {
    std::string train;
    std::string test;
    std::vector<std::string> external;
    std::vector<std::string> test_masks;
    std::string out;
};

void cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
    const RunConfig cfg = resolve(g);
    FeatureTable tr = read_feature_csv(a.train), te = read_feature_csv(a.test);
    if (!a.external.empty()) {
        tr = concat_tables(tr, read_feature_csv(a.external[0]));
        te = concat_tables(te, read_feature_csv(a.external[1]));
    }
    if (tr.config_hash != te.config_hash)
        throw std::runtime_error("provenance mismatch: train features have hash '" + tr.config_hash +
                                 "', test features '" + te.config_hash + "'");
    if (tr.matrix.column_names() != te.matrix.column_names())
        throw std::runtime_error("train and test columns differ");

    std::vector<LabelMask> truth;
    if (!a.test_masks.empty()) {
        for (const auto& p : a.test_masks) truth.push_back(load_label_mask(p));
    } else {
        if (te.matrix.count(0) != 0)
            throw std::invalid_argument("test features carry no labels; pass --test-masks");
        truth = truth_from_patch_labels(te);
    }
    const EvaluationSet test(te, std::move(truth));
    const ProtocolReport r = run_protocol(tr.matrix, test, cfg.protocol, cfg.seed);

    const fs::path out = prepare_out(a.out, cfg);
    write_text(out / "report.json", report_json(r).dump(2) + "\n");
    std::ofstream f(out / "repetitions.csv");
    f << "repetition,seed,subset_rows,features,depth,rounds,cv_dsc,dsc\n";
    for (std::size_t i = 0; i < r.repetitions.size(); ++i) {
        const auto& x = r.repetitions[i];
        f << i << ',' << x.seed << ',' << x.subset_rows << ',' << x.features << ',' << x.depth << ',' << x.rounds
          << ',' << g17(x.cv_dsc) << ',' << g17(x.dsc) << '\n';
    }
    std::cout << summary(r) << " -> " << out.string() << "\n";
}

struct SynthArgs {
    std::string out;
    std::string format = "f64raw";
};

void cmd_synth(const Globals& g, const SynthArgs& a) {
    const RunConfig cfg = resolve(g);
    const MapFormat fmt = parse_map_format(a.format);
    if (fmt == MapFormat::pgm16) throw std::invalid_argument("synth: pgm16 would quantize standardized depths");
    const std::string ext = fmt == MapFormat::csv ? ".csv" : ".f64";
    const auto maps = make_dataset(cfg.synth, cfg.seed);
    const fs::path out = prepare_out(a.out, cfg);
    std::ofstream manifest(out / "manifest.csv");
    manifest << "id,surface,split,map,mask\n";
    std::map<std::string, int> counts;
    for (const auto& m : maps) {
        save_depth_map(m.map, out / (m.id + ext), fmt);
        save_label_mask(m.mask, out / (m.id + "_mask.pgm"));
        manifest << m.id << ',' << m.surface << ',' << m.split << ',' << m.id + ext << ',' << m.id + "_mask.pgm\n";
        ++counts[m.surface];
    }
    std::cout << maps.size() << " maps (";
    bool first = true;
    for (const auto& [k, v] : counts) {
        std::cout << (first ? "" : ", ") << k << " " << v;
        first = false;
    }
    std::cout << ") -> " << out.string() << "\n";
}

struct StabilityArgs {
    std::vector<std::string> maps;
    std::string manifest;
    std::vector<std::string> prefilters;
    std::string format = "auto";
    std::string out;
};

void cmd_stability(const Globals& g, const StabilityArgs& a) {
    const RunConfig cfg = resolve(g);
    std::vector<Source> sources;
    if (!a.manifest.empty())
        for (auto& [split, s] : read_manifest(a.manifest)) sources.push_back(std::move(s));
    const auto ids = source_ids(a.maps);
    for (std::size_t i = 0; i < a.maps.size(); ++i)
        sources.push_back({ids[i], load_depth_map(a.maps[i], format_for(a.maps[i], a.format)), {}});
    if (sources.empty()) throw std::invalid_argument("stability: no maps given");
    std::vector<DepthMap> maps;
    for (const auto& s : sources) maps.push_back(s.map);
    const auto patches = patches_of(sources, cfg);

    std::vector<PrefilterMode> modes;
    for (const auto& p : a.prefilters) modes.push_back(parse_prefilter(p));
    if (modes.empty()) modes.push_back(cfg.descriptor.prefilter);

    const fs::path out = prepare_out(a.out, cfg);
    std::ofstream f(out / "stability.csv");
    f << "kind,prefilter,magnitude,patch,patch_diff,pi_diff\n";
    for (auto mode : modes) {
        DescriptorConfig d = cfg.descriptor;
        d.prefilter = mode;
        if (d.channel_limits.size() != channel_count(d)) d.channel_limits.clear();
        const auto noise = noise_stability(patches, cfg.stability.snr_levels, d, derive_seed(cfg.seed, "stability-noise"),
                                           cfg.stability.patches);
        const auto disp = displacement_stability(maps, cfg.stability.offsets, d, cfg.patch_size, cfg.stability.patches,
                                                 derive_seed(cfg.seed, "stability-displacement"));
        for (const auto* rep : {&noise, &disp}) {
            for (const auto& t : rep->trials)
                f << rep->kind << ',' << rep->prefilter << ',' << g17(t.magnitude) << ',' << t.patch << ','
                  << g17(t.patch_diff) << ',' << g17(t.pi_diff) << '\n';
            std::cout << rep->kind << " [" << rep->prefilter << "]";
            for (double mag : rep->magnitudes()) std::cout << "  " << mag << ": " << rep->mean_pi_diff(mag);
            std::cout << "\n";
        }
    }
    std::cout << "-> " << (out / "stability.csv").string() << "\n";
}

struct SweepArgs {
    std::string manifest;
    std::string out;
};

void cmd_sweep(const Globals& g, const SweepArgs& a) {
    const RunConfig cfg = resolve(g);
    std::vector<Source> train, test;
    for (auto& [split, s] : read_manifest(a.manifest)) {
        if (!s.mask) throw std::invalid_argument("sweep: map '" + s.id + "' has no mask");
        if (split == "train")
            train.push_back(std::move(s));
        else if (split == "test")
            test.push_back(std::move(s));
        else
            throw std::invalid_argument("sweep: split must be train or test, got '" + split + "'");
    }
    if (train.empty() || test.empty()) throw std::invalid_argument("sweep: need train and test maps");

    // Diagrams do not depend on the PI resolution or sigma; compute them once.
    FeatureExtractor base(cfg.descriptor);
    base.fit_channel_limits(patches_of(train, cfg));
    std::vector<std::vector<PersistenceDiagram>> dtr, dte;
    const FeatureTable ttr = build_table(train, base, cfg, &dtr), tte = build_table(test, base, cfg, &dte);
    std::vector<LabelMask> truth;
    for (const auto& s : test) truth.push_back(*s.mask);

    RunConfig resolved = cfg;
    resolved.descriptor = base.config();
    const fs::path out = prepare_out(a.out, resolved);
    std::ofstream f(out / "sweep.csv");
    f << "resolution,sigma,features,mean_dsc,std_dsc,trivial_dsc\n";
    for (int R : cfg.sweep.resolutions)
        for (double sigma : cfg.sweep.sigmas) {
            DescriptorConfig d = base.config();
            d.pi.resolution = R;
            d.pi.sigma_x = d.pi.sigma_y = sigma;
            const FeatureExtractor fx(d);
            auto matrix = [&](const FeatureTable& t, const std::vector<std::vector<PersistenceDiagram>>& ds) {
                std::vector<std::vector<double>> rows(ds.size());
                parallel_for(ds.size(), [&](std::size_t i) { rows[i] = fx.vectorize(ds[i]).values; });
                return FeatureMatrix(std::move(rows), t.matrix.labels(), column_names(d));
            };
            FeatureTable cell_test = tte;
            cell_test.matrix = matrix(tte, dte);
            const EvaluationSet es(cell_test, truth);
            const auto r = run_protocol(matrix(ttr, dtr), es, cfg.protocol, cfg.seed);
            f << R << ',' << g17(sigma) << ',' << feature_length(d) << ',' << g17(r.mean) << ',' << g17(r.std) << ','
              << g17(r.trivial_dsc) << '\n';
            f.flush();
            std::cout << "R " << R << " sigma " << sigma << ": " << summary(r) << "\n";
        }
    std::cout << "-> " << (out / "sweep.csv").string() << "\n";
}

struct ImportanceArgs {
    std::string features;
    std::string out;
};

void cmd_importance(const Globals& g, const ImportanceArgs& a) {
    const RunConfig cfg = resolve(g);
    const FeatureTable t = read_feature_csv(a.features);
    const BoostModel m = rusboost_train(t.matrix, cfg.learner, derive_seed(cfg.seed, "importance"));
    const auto maps = importance_maps(t.matrix, m);
    const auto avg = class_average_pi(t.matrix);

    const fs::path out = prepare_out(a.out, cfg);
    write_grid_csv(maps.fisher, out / "fisher.csv");
    write_grid_csv(maps.gini, out / "gini.csv");
    json s;
    for (const auto& [cls, grid] : avg) {
        write_grid_csv(grid, out / ("class_average_" + std::to_string(cls) + ".csv"));
        s["half_max_regions"][std::to_string(cls)] = half_max_regions(grid);
    }
    for (const auto& [name, grid] : {std::pair{"fisher", &maps.fisher}, std::pair{"gini", &maps.gini}}) {
        const auto loc = importance_locality(*grid);
        s["locality"][name] = {{"top_decile_median", loc.top_decile_median},
                               {"all_median", loc.all_median},
                               {"near_diagonal", loc.near_diagonal()}};
    }
    write_text(out / "importance.json", s.dump(2) + "\n");
    std::cout << s.dump() << "\n-> " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Topological descriptors for depth-map surface texture classification"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "Run configuration (JSON); defaults apply to missing keys")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Master seed; overrides TOPOTEX_SEED and the config")->envname("TOPOTEX_SEED");

    ExtractArgs ex;
    auto* extract = app.add_subcommand("extract", "Patch features of depth maps to a feature CSV");
    extract->add_option("maps", ex.maps, "Depth maps (csv, pgm, f64)")->required()->check(CLI::ExistingFile);
    extract->add_option("--masks", ex.masks, "Label masks, one per map, for patch labels")->check(CLI::ExistingFile);
    extract->add_option("--format", ex.format, "Map format: auto, csv, pgm16, f64raw")->capture_default_str();
    extract->add_option("--out", ex.out, "Output directory")->required();
    extract->add_flag("--fit-limits", ex.fit_limits, "Fit per-channel diagram limits on these maps");
    extract->add_option("--limits-from", ex.limits_from, "Reuse the channel limits recorded in a feature CSV")
        ->check(CLI::ExistingFile);

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Train a RUSBoost model on a feature CSV");
    train->add_option("features", tr.features, "Labelled feature CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--out", tr.out, "Output directory")->required();

    PredictArgs pr;
    auto* pred = app.add_subcommand("predict", "Classify patches and rasterize label masks");
    pred->add_option("--model", pr.model, "Model file from train")->required()->check(CLI::ExistingFile);
    pred->add_option("features", pr.features, "Feature CSV")->required()->check(CLI::ExistingFile);
    pred->add_option("--masks", pr.masks, "Pixel truth, one mask per source, for a DSC report")
        ->check(CLI::ExistingFile);
    pred->add_option("--out", pr.out, "Output directory")->required();

    EvaluateArgs ev;
    auto* eval = app.add_subcommand("evaluate", "Run the repeated subset / cross-validation protocol");
    eval->add_option("--train", ev.train, "Training feature CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--test", ev.test, "Test feature CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--external-features", ev.external,
                     "Extra feature CSVs for train and test, joined column-wise per patch")
        ->expected(2)
        ->check(CLI::ExistingFile);
    eval->add_option("--test-masks", ev.test_masks, "Pixel truth per test source; default: from patch labels")
        ->check(CLI::ExistingFile);
    eval->add_option("--out", ev.out, "Output directory")->required();

    SynthArgs sy;
    auto* synth = app.add_subcommand("synth", "Generate the synthetic natural/engraved dataset");
    synth->add_option("--out", sy.out, "Output directory")->required();
    synth->add_option("--format", sy.format, "Map format: f64raw or csv")->capture_default_str();

    StabilityArgs st;
    auto* stab = app.add_subcommand("stability", "Noise and displacement stability of persistence images");
    stab->add_option("maps", st.maps, "Depth maps")->check(CLI::ExistingFile);
    stab->add_option("--manifest", st.manifest, "Dataset manifest (all maps are used)")->check(CLI::ExistingFile);
    stab->add_option("--prefilter", st.prefilters, "Prefilter modes to compare; default: the config's");
    stab->add_option("--format", st.format, "Map format for positional maps")->capture_default_str();
    stab->add_option("--out", st.out, "Output directory")->required();

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "Evaluate the PI resolution x sigma grid");
    sweep->add_option("--manifest", sw.manifest, "Dataset manifest with train/test splits and masks")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--out", sw.out, "Output directory")->required();

    ImportanceArgs im;
    auto* imp = app.add_subcommand("importance", "Fisher/Gini importance and class averages on the PI grid");
    imp->add_option("features", im.features, "Labelled PI feature CSV")->required()->check(CLI::ExistingFile);
    imp->add_option("--out", im.out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*extract) cmd_extract(g, ex);
        if (*train) cmd_train(g, tr);
        if (*pred) cmd_predict(g, pr);
        if (*eval) cmd_evaluate(g, ev);
        if (*synth) cmd_synth(g, sy);
        if (*stab) cmd_stability(g, st);
        if (*sweep) cmd_sweep(g, sw);
        if (*imp) cmd_importance(g, im);
    } catch (const std::exception& e) {
        std::cerr << "topotex: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
