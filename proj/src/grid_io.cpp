#include "topotex/grid_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace topotex {

namespace {

std::string position_suffix(std::optional<std::size_t> row, std::optional<std::size_t> col) {
    if (!row) return {};
    std::string s = " (row " + std::to_string(*row);
    if (col) s += ", col " + std::to_string(*col);
    return s + ")";
}

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

DepthMap parse_csv(const std::vector<char>& bytes) {
    std::string_view text(bytes.data(), bytes.size());
    std::vector<double> values;
    std::size_t width = 0;
    std::size_t height = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        std::string_view line = trim(text.substr(0, eol));
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        if (line.empty()) continue;
        std::size_t col = 0;
        while (true) {
            const auto comma = line.find(',');
            std::string_view cell = trim(line.substr(0, comma));
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size())
                throw ParseError("csv: cannot parse '" + std::string(cell) + "'", height, col);
            if (!std::isfinite(v)) throw ParseError("csv: non-finite value", height, col);
            values.push_back(v);
            ++col;
            if (comma == std::string_view::npos) break;
            line = line.substr(comma + 1);
        }
        if (height == 0) width = col;
        else if (col != width)
            throw ParseError("csv: row has " + std::to_string(col) + " values, expected " +
                                 std::to_string(width),
                             height);
        ++height;
    }
    if (height == 0) throw ParseError("csv: empty file");
    return DepthMap(Grid<double>(height, width, std::move(values)));
}

struct PgmImage {
    std::size_t width = 0;
    std::size_t height = 0;
    unsigned maxval = 0;
    std::vector<std::uint16_t> samples;
};

PgmImage parse_pgm(const std::vector<char>& bytes) {
    std::size_t pos = 0;
    auto skip_ws_and_comments = [&] {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_uint = [&](const char* what) {
        skip_ws_and_comments();
        std::size_t value = 0;
        const auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), value);
        if (ec != std::errc()) throw ParseError(std::string("pgm: malformed header field ") + what);
        pos = static_cast<std::size_t>(ptr - bytes.data());
        return value;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw ParseError("pgm: missing P5 magic");
    pos = 2;
    PgmImage img;
    img.width = read_uint("width");
    img.height = read_uint("height");
    const std::size_t maxval = read_uint("maxval");
    if (img.width == 0 || img.height == 0) throw ParseError("pgm: zero dimension");
    if (maxval == 0 || maxval > 65535) throw ParseError("pgm: maxval out of range");
    img.maxval = static_cast<unsigned>(maxval);
    if (pos >= bytes.size()) throw ParseError("pgm: truncated header");
    ++pos;  // single whitespace before the raster
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t n = img.width * img.height;
    if (bytes.size() - pos < n * bps) throw ParseError("pgm: truncated raster");
    img.samples.resize(n);
    const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (std::size_t i = 0; i < n; ++i) {
        img.samples[i] = bps == 2 ? static_cast<std::uint16_t>((raster[2 * i] << 8) | raster[2 * i + 1])
                                  : raster[i];
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               unsigned maxval, const std::vector<std::uint16_t>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P5\n" << width << ' ' << height << '\n' << maxval << '\n';
    for (auto s : samples) {
        if (maxval > 255) out.put(static_cast<char>(s >> 8));
        out.put(static_cast<char>(s & 0xff));
    }
}

std::uint64_t read_le64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void write_le64(std::ostream& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

DepthMap parse_f64raw(const std::vector<char>& bytes) {
    if (bytes.size() < 16) throw ParseError("f64raw: truncated header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint64_t width = read_le64(p);
    const std::uint64_t height = read_le64(p + 8);
    if (width == 0 || height == 0) throw ParseError("f64raw: zero dimension");
    const std::uint64_t available = (bytes.size() - 16) / 8;
    if (width > available || height > available / width)
        throw ParseError("f64raw: payload shorter than width*height doubles");
    std::vector<double> values(width * height);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint64_t bits = read_le64(p + 16 + 8 * i);
        double v;
        static_assert(sizeof(v) == sizeof(bits));
        std::memcpy(&v, &bits, sizeof v);
        if (!std::isfinite(v)) throw ParseError("f64raw: non-finite value", i / width, i % width);
        values[i] = v;
    }
    return DepthMap(Grid<double>(height, width, std::move(values)));
}

}  // namespace

ParseError::ParseError(const std::string& what, std::optional<std::size_t> row,
                       std::optional<std::size_t> col)
    : std::runtime_error(what + position_suffix(row, col)), row_(row), col_(col) {}

ParseError::ParseError(Prefixed, const std::string& message, std::optional<std::size_t> row,
                       std::optional<std::size_t> col)
    : std::runtime_error(message), row_(row), col_(col) {}

ParseError ParseError::in_file(const std::string& file) const {
    return ParseError(Prefixed{}, file + ": " + what(), row_, col_);
}

DepthMap::DepthMap(Grid<double> depth, std::optional<double> pixel_pitch_mm)
    : depth_(std::move(depth)), pitch_(pixel_pitch_mm) {
    if (depth_.rows() == 0 || depth_.cols() == 0) throw std::invalid_argument("DepthMap: empty grid");
    for (std::size_t r = 0; r < depth_.rows(); ++r)
        for (std::size_t c = 0; c < depth_.cols(); ++c)
            if (!std::isfinite(depth_(r, c))) throw ParseError("DepthMap: non-finite depth", r, c);
    if (pitch_ && !(*pitch_ > 0.0)) throw std::invalid_argument("DepthMap: pixel pitch must be positive");
}

LabelMask::LabelMask(Grid<std::uint8_t> labels) : labels_(std::move(labels)) {
    for (std::size_t r = 0; r < labels_.rows(); ++r)
        for (std::size_t c = 0; c < labels_.cols(); ++c)
            if (labels_(r, c) != 1 && labels_(r, c) != 2)
                throw ParseError("label mask: only classes 1 and 2 are allowed", r, c);
}

MapFormat parse_map_format(const std::string& name) {
    if (name == "csv") return MapFormat::csv;
    if (name == "pgm16" || name == "pgm") return MapFormat::pgm16;
    if (name == "f64raw" || name == "raw") return MapFormat::f64raw;
    throw std::invalid_argument("unknown depth map format '" + name + "'");
}

MapFormat format_from_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return MapFormat::csv;
    if (ext == ".pgm") return MapFormat::pgm16;
    if (ext == ".f64" || ext == ".raw") return MapFormat::f64raw;
    throw std::invalid_argument("cannot infer depth map format from '" + path.string() + "'");
}

DepthMap load_depth_map(const std::filesystem::path& path, MapFormat format) {
    const auto bytes = read_file(path);
    try {
        switch (format) {
            case MapFormat::csv: return parse_csv(bytes);
            case MapFormat::pgm16: {
                auto img = parse_pgm(bytes);
                std::vector<double> values(img.samples.begin(), img.samples.end());
                return DepthMap(Grid<double>(img.height, img.width, std::move(values)));
            }
            case MapFormat::f64raw: return parse_f64raw(bytes);
        }
    } catch (const ParseError& e) {
        throw e.in_file(path.string());
    }
    throw std::logic_error("unreachable");
}

void save_depth_map(const DepthMap& map, const std::filesystem::path& path, MapFormat format) {
    switch (format) {
        case MapFormat::csv: {
            std::ofstream out(path);
            if (!out) throw std::runtime_error("cannot write " + path.string());
            char buf[32];
            for (std::size_t r = 0; r < map.height(); ++r) {
                for (std::size_t c = 0; c < map.width(); ++c) {
                    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, map(r, c));
                    if (c) out.put(',');
                    out.write(buf, end - buf);
                }
                out.put('\n');
            }
            return;
        }
        case MapFormat::pgm16: {
            std::vector<std::uint16_t> samples;
            samples.reserve(map.width() * map.height());
            for (double v : map.depth().values()) {
                if (v < 0.0 || v > 65535.0 || v != std::floor(v))
                    throw std::invalid_argument("pgm16 output requires integer depths in [0, 65535]");
                samples.push_back(static_cast<std::uint16_t>(v));
            }
            write_pgm(path, map.width(), map.height(), 65535, samples);
            return;
        }
        case MapFormat::f64raw: {
            std::ofstream out(path, std::ios::binary);
            if (!out) throw std::runtime_error("cannot write " + path.string());
            write_le64(out, map.width());
            write_le64(out, map.height());
            for (double v : map.depth().values()) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, sizeof bits);
                write_le64(out, bits);
            }
            return;
        }
    }
}

LabelMask load_label_mask(const std::filesystem::path& path) {
    try {
        auto img = parse_pgm(read_file(path));
        std::vector<std::uint8_t> labels(img.samples.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const auto s = img.samples[i];
            if (s != 1 && s != 2) throw ParseError("label mask: only classes 1 and 2 are allowed", i / img.width, i % img.width);
            labels[i] = static_cast<std::uint8_t>(s);
        }
        return LabelMask(Grid<std::uint8_t>(img.height, img.width, std::move(labels)));
    } catch (const ParseError& e) {
        throw e.in_file(path.string());
    }
}

void save_label_mask(const LabelMask& mask, const std::filesystem::path& path) {
    const auto& v = mask.labels().raw();
    write_pgm(path, mask.width(), mask.height(), 255, std::vector<std::uint16_t>(v.begin(), v.end()));
}

DepthMap z_standardize_global(const DepthMap& map) {
    const auto values = map.depth().values();
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= n;
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) throw std::invalid_argument("z_standardize_global: constant depth map (std = 0)");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (values[i] - mean) / sd;
    return DepthMap(Grid<double>(map.height(), map.width(), std::move(out)), map.pixel_pitch_mm());
}

std::size_t patch_count(std::size_t height, std::size_t width, std::size_t size, std::size_t stride) {
    if (size == 0 || stride == 0 || size > height || size > width) return 0;
    return ((height - size) / stride + 1) * ((width - size) / stride + 1);
}

PatchSet extract_patches(const DepthMap& map, std::size_t size, std::size_t stride, std::string source_id) {
    if (size == 0) throw std::invalid_argument("extract_patches: size must be positive");
    if (stride == 0) throw std::invalid_argument("extract_patches: stride must be positive");
    if (size > map.height() || size > map.width())
        throw std::invalid_argument("extract_patches: patch size " + std::to_string(size) +
                                    " exceeds map dimension " + std::to_string(map.height()) + "x" +
                                    std::to_string(map.width()));
    PatchSet set;
    set.patch_size = size;
    set.stride = stride;
    set.source_id = std::move(source_id);
    set.patches.reserve(patch_count(map.height(), map.width(), size, stride));
    for (std::size_t r0 = 0; r0 + size <= map.height(); r0 += stride) {
        for (std::size_t c0 = 0; c0 + size <= map.width(); c0 += stride) {
            Patch p{r0, c0, Grid<double>(size, size)};
            for (std::size_t r = 0; r < size; ++r)
                for (std::size_t c = 0; c < size; ++c) p.values(r, c) = map(r0 + r, c0 + c);
            set.patches.push_back(std::move(p));
        }
    }
    return set;
}

int patch_label(const LabelMask& mask, const Patch& patch, double class1_threshold) {
    const std::size_t s = patch.size();
    if (patch.row + s > mask.height() || patch.col + s > mask.width())
        throw std::out_of_range("patch_label: patch footprint outside the mask");
    std::size_t ones = 0;
    for (std::size_t r = 0; r < s; ++r)
        for (std::size_t c = 0; c < s; ++c) ones += mask(patch.row + r, patch.col + c) == 1;
    const double fraction = static_cast<double>(ones) / static_cast<double>(s * s);
    return fraction >= class1_threshold ? 1 : 2;
}

}  // namespace topotex
