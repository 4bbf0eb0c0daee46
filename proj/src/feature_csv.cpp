#include "topotex/feature_csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "topotex/grid_io.hpp"
#include "topotex/seed.hpp"

namespace topotex {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_feature_csv(const FeatureTable& t, const std::filesystem::path& path) {
    const auto& X = t.matrix;
    if (X.column_names().size() != X.cols()) throw std::invalid_argument("write_feature_csv: column names missing");
    json meta = {{"descriptor", t.descriptor},
                 {"hash", t.config_hash},
                 {"patch_size", t.patch_size},
                 {"stride", t.stride},
                 {"sources", json::array()}};
    for (const auto& s : t.sources)
        meta["sources"].push_back({{"id", s.id}, {"height", s.height}, {"width", s.width}, {"rows", s.rows}});
    if (!t.config_json.empty()) meta["config"] = json::parse(t.config_json);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << '#' << meta.dump() << '\n';
    for (const auto& n : X.column_names()) {
        if (n.find(',') != std::string::npos) throw std::invalid_argument("column name contains a comma: " + n);
        out << n << ',';
    }
    out << "label\n";
    char buf[40];
    for (std::size_t r = 0; r < X.rows(); ++r) {
        for (std::size_t c = 0; c < X.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", X(r, c));
            out << buf << ',';
        }
        out << X.labels()[r] << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::string file = path.string();
    std::string line;
    if (!std::getline(in, line) || line.empty() || line[0] != '#')
        throw ParseError(file + ": missing '#' metadata line", 0);
    FeatureTable t;
    try {
        const json meta = json::parse(line.substr(1));
        t.descriptor = meta.at("descriptor").get<std::string>();
        t.config_hash = meta.at("hash").get<std::string>();
        t.patch_size = meta.at("patch_size").get<std::size_t>();
        t.stride = meta.at("stride").get<std::size_t>();
        for (const auto& s : meta.at("sources"))
            t.sources.push_back({s.at("id").get<std::string>(), s.at("height").get<std::size_t>(),
                                 s.at("width").get<std::size_t>(), s.at("rows").get<std::size_t>()});
        if (meta.contains("config")) t.config_json = meta["config"].dump();
    } catch (const json::exception& e) {
        throw ParseError(file + ": bad metadata: " + e.what(), 0);
    }

    if (!std::getline(in, line)) throw ParseError(file + ": missing column header", 1);
    std::vector<std::string> names;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) names.push_back(cell);
    }
    if (names.empty() || names.back() != "label") throw ParseError(file + ": last column must be 'label'", 1);
    names.pop_back();

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            ++line_no;
            continue;
        }
        std::vector<double> row;
        row.reserve(names.size());
        const char* p = line.data();
        const char* end = p + line.size();
        std::size_t col = 0;
        while (true) {
            const char* comma = std::find(p, end, ',');
            if (col == names.size()) {
                int label = 0;
                auto [q, ec] = std::from_chars(p, comma, label);
                if (ec != std::errc() || q != comma || comma != end)
                    throw ParseError(file + ": bad label", line_no, col);
                labels.push_back(label);
                break;
            }
            if (comma == end) throw ParseError(file + ": too few columns", line_no, col);
            double v = 0.0;
            auto [q, ec] = std::from_chars(p, comma, v);
            if (ec != std::errc() || q != comma) throw ParseError(file + ": bad number", line_no, col);
            if (!std::isfinite(v)) throw ParseError(file + ": non-finite value", line_no, col);
            row.push_back(v);
            p = comma + 1;
            ++col;
        }
        rows.push_back(std::move(row));
        ++line_no;
    }
    t.matrix = FeatureMatrix(std::move(rows), std::move(labels), std::move(names));
    std::size_t expected = 0;
    for (const auto& s : t.sources) expected += s.rows;
    if (!t.sources.empty() && expected != t.matrix.rows())
        throw ParseError(file + ": metadata lists " + std::to_string(expected) + " rows, file has " +
                         std::to_string(t.matrix.rows()));
    return t;
}

std::vector<PatchRef> patch_refs(const FeatureTable& t) {
    std::vector<PatchRef> refs;
    if (t.patch_size == 0 || t.stride == 0) throw std::invalid_argument("patch_refs: table has no patch geometry");
    for (std::size_t s = 0; s < t.sources.size(); ++s) {
        const auto& src = t.sources[s];
        if (src.height < t.patch_size || src.width < t.patch_size)
            throw std::invalid_argument("patch_refs: source '" + src.id + "' smaller than a patch");
        const std::size_t per_row = (src.width - t.patch_size) / t.stride + 1;
        if (patch_count(src.height, src.width, t.patch_size, t.stride) != src.rows)
            throw std::invalid_argument("patch_refs: row count of '" + src.id + "' does not match its geometry");
        for (std::size_t k = 0; k < src.rows; ++k)
            refs.push_back({s, (k / per_row) * t.stride, (k % per_row) * t.stride});
    }
    return refs;
}

FeatureTable concat_tables(const FeatureTable& a, const FeatureTable& b) {
    if (a.patch_size != b.patch_size || a.stride != b.stride)
        throw std::invalid_argument("concat_tables: patch geometry differs");
    if (a.sources.size() != b.sources.size()) throw std::invalid_argument("concat_tables: sources differ");
    for (std::size_t i = 0; i < a.sources.size(); ++i) {
        const auto &x = a.sources[i], &y = b.sources[i];
        if (x.id != y.id || x.height != y.height || x.width != y.width || x.rows != y.rows)
            throw std::invalid_argument("concat_tables: source '" + x.id + "' does not match '" + y.id + "'");
    }
    FeatureTable out = a;
    out.descriptor = a.descriptor + "+" + b.descriptor;
    out.config_hash = hex64(fnv1a64(a.config_hash + "|" + b.config_hash));
    out.config_json.clear();
    // an unlabeled side adopts the other side's labels
    auto unlabeled = [](const FeatureMatrix& m) { return m.count(0) == m.rows(); };
    FeatureMatrix left = a.matrix, right = b.matrix;
    if (unlabeled(left)) left.labels() = right.labels();
    if (unlabeled(right)) right.labels() = left.labels();
    out.matrix = hconcat(left, right);
    return out;
}

}  // namespace topotex
