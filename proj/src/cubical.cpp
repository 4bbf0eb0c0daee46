#include "topotex/cubical.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace topotex {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

}  // namespace

CubicalFiltration::CubicalFiltration(const Grid<double>& pixels) : size_(pixels.rows()) {
    if (pixels.rows() != pixels.cols()) throw std::invalid_argument("CubicalFiltration: patch must be square");
    if (size_ < 2) throw std::invalid_argument("CubicalFiltration: patch size must be at least 2");
    const std::size_t n = side();
    const std::size_t npix = size_ * size_;
    // Every cell is owned by its lowest incident pixel (ties to the lower pixel
    // index); ownership drives the bucketed sort below. Pixels are offered in
    // index order, so a strict comparison keeps the lower index on ties.
    values_.assign(n * n, std::numeric_limits<double>::infinity());
    std::vector<std::uint32_t> owner(n * n, kNone);
    for (std::size_t pr = 0; pr < size_; ++pr) {
        for (std::size_t pc = 0; pc < size_; ++pc) {
            const double v = pixels(pr, pc);
            const auto pix = static_cast<std::uint32_t>(pr * size_ + pc);
            const std::size_t ci = 2 * pr + 1, cj = 2 * pc + 1;
            for (std::size_t i = ci - 1; i <= ci + 1; ++i) {
                for (std::size_t j = cj - 1; j <= cj + 1; ++j) {
                    const std::size_t cell = i * n + j;
                    if (v < values_[cell]) {
                        values_[cell] = v;
                        owner[cell] = pix;
                    }
                }
            }
        }
    }

    std::vector<std::uint32_t> pix_order(npix);
    std::iota(pix_order.begin(), pix_order.end(), 0u);
    const auto& pv = pixels.raw();
    std::sort(pix_order.begin(), pix_order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return pv[a] < pv[b] || (pv[a] == pv[b] && a < b);
    });
    max_value_ = pv[pix_order.back()];

    // Cells owned by each pixel, in CSR layout.
    std::vector<std::uint32_t> start(npix + 1, 0);
    for (auto o : owner) ++start[o + 1];
    std::partial_sum(start.begin(), start.end(), start.begin());
    std::vector<std::uint32_t> owned(n * n);
    {
        std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
        for (std::uint32_t cell = 0; cell < owner.size(); ++cell) owned[fill[owner[cell]]++] = cell;
    }

    order_.reserve(n * n);
    for (std::size_t k = 0; k < npix;) {
        std::size_t e = k;
        while (e < npix && pv[pix_order[e]] == pv[pix_order[k]]) ++e;
        const std::size_t group_begin = order_.size();
        for (std::size_t q = k; q < e; ++q) {
            const auto pix = pix_order[q];
            order_.insert(order_.end(), owned.begin() + start[pix], owned.begin() + start[pix + 1]);
        }
        std::sort(order_.begin() + static_cast<std::ptrdiff_t>(group_begin), order_.end(),
                  [this](std::uint32_t a, std::uint32_t b) {
                      const int da = dimension(a), db = dimension(b);
                      return da < db || (da == db && a < b);
                  });
        k = e;
    }
}

PersistenceDiagram compute_persistence(const CubicalFiltration& f, EssentialPolicy policy, Limits limits) {
    const std::size_t n = f.side();
    const std::size_t total = f.cell_count();
    const auto& order = f.order();

    std::vector<std::uint32_t> pos(total);
    for (std::uint32_t k = 0; k < total; ++k) pos[order[k]] = k;

    // pivot_owner[row] = column (filtration position) whose reduced low is `row`.
    std::vector<std::uint32_t> pivot_owner(total, kNone);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (birth pos, death pos)
    pairs.reserve(total / 2);

    // Dimension 2: squares -> edges. Reduced columns are appended to an arena.
    std::vector<std::uint32_t> arena;
    arena.reserve(total * 2);
    std::vector<std::uint32_t> col_begin(total, 0), col_len(total, 0);
    std::vector<std::uint32_t> work, scratch;
    work.reserve(64);
    scratch.reserve(64);
    for (std::uint32_t k = 0; k < total; ++k) {
        const std::uint32_t cell = order[k];
        if (f.dimension(cell) != 2) continue;
        const std::size_t i = cell / n, j = cell % n;
        std::array<std::uint32_t, 4> b{pos[(i - 1) * n + j], pos[(i + 1) * n + j], pos[i * n + j - 1],
                                       pos[i * n + j + 1]};
        std::sort(b.begin(), b.end());
        work.assign(b.begin(), b.end());
        while (!work.empty()) {
            const std::uint32_t owner = pivot_owner[work.back()];
            if (owner == kNone) break;
            const auto* other = arena.data() + col_begin[owner];
            scratch.clear();
            std::set_symmetric_difference(work.begin(), work.end(), other, other + col_len[owner],
                                          std::back_inserter(scratch));
            work.swap(scratch);
        }
        if (work.empty()) continue;  // positive square; cannot happen on a planar patch
        pivot_owner[work.back()] = k;
        col_begin[k] = static_cast<std::uint32_t>(arena.size());
        col_len[k] = static_cast<std::uint32_t>(work.size());
        arena.insert(arena.end(), work.begin(), work.end());
        pairs.emplace_back(work.back(), k);
    }

    // Dimension 1: edges -> vertices. Edges that are pivots above are positive
    // and cleared. Each reduced edge column keeps exactly two vertices.
    std::vector<std::uint32_t> edge_other(total, kNone);
    std::vector<std::uint32_t> essential;
    for (std::uint32_t k = 0; k < total; ++k) {
        const std::uint32_t cell = order[k];
        if (f.dimension(cell) != 1) continue;
        if (pivot_owner[k] != kNone) continue;  // clearing
        const std::size_t i = cell / n, j = cell % n;
        std::uint32_t a, b;
        if (i % 2 == 0) {
            a = pos[i * n + j - 1];
            b = pos[i * n + j + 1];
        } else {
            a = pos[(i - 1) * n + j];
            b = pos[(i + 1) * n + j];
        }
        if (a > b) std::swap(a, b);
        bool zero = false;
        while (true) {
            const std::uint32_t owner = pivot_owner[b];
            if (owner == kNone) break;
            const std::uint32_t c = edge_other[owner];
            if (c == a) {
                zero = true;
                break;
            }
            b = std::max(a, c);
            a = std::min(a, c);
        }
        if (zero) {
            essential.push_back(k);  // an unkilled cycle; impossible on a full patch
            continue;
        }
        pivot_owner[b] = k;
        edge_other[k] = a;
        pairs.emplace_back(b, k);
    }
    for (std::uint32_t k = 0; k < total; ++k)
        if (f.dimension(order[k]) == 0 && pivot_owner[k] == kNone) essential.push_back(k);

    PersistenceDiagram d;
    d.limits = limits;
    d.essential_policy = policy;
    d.intervals.reserve(pairs.size() + essential.size());
    for (auto [bp, dp] : pairs) {
        const double birth = f.value(order[bp]);
        const double death = f.value(order[dp]);
        if (death == birth) continue;
        d.intervals.push_back({birth, death, f.dimension(order[bp])});
    }
    for (auto k : essential) {
        const double birth = f.value(order[k]);
        double death = std::numeric_limits<double>::infinity();
        switch (policy) {
            case EssentialPolicy::cap_at_max_value: death = f.max_value(); break;
            case EssentialPolicy::cap_at_limit: death = std::max(limits.max, birth); break;
            case EssentialPolicy::drop: continue;
            case EssentialPolicy::keep: break;
        }
        if (death == birth) continue;
        d.intervals.push_back({birth, death, f.dimension(order[k])});
    }
    return d;
}

PersistenceDiagram patch_persistence(const Grid<double>& pixels, EssentialPolicy policy, Limits limits) {
    return compute_persistence(CubicalFiltration(pixels), policy, limits);
}

PersistenceDiagram select_degrees(const PersistenceDiagram& d, DegreeSet degrees) {
    if (degrees == DegreeSet::both) return d;
    const int keep = degrees == DegreeSet::h0 ? 0 : 1;
    PersistenceDiagram out{{}, d.limits, d.essential_policy};
    for (const auto& iv : d.intervals)
        if (iv.degree == keep) out.intervals.push_back(iv);
    return out;
}

BettiNumbers betti_at(const PersistenceDiagram& d, double r) {
    BettiNumbers b;
    for (const auto& iv : d.intervals) {
        if (!(iv.birth <= r && r < iv.death)) continue;
        if (iv.degree == 0) ++b.b0;
        else if (iv.degree == 1) ++b.b1;
    }
    return b;
}

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0u); }
    std::uint32_t find(std::uint32_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void attach(std::uint32_t child_root, std::uint32_t parent_root) { parent_[child_root] = parent_root; }

private:
    std::vector<std::uint32_t> parent_;
};

}  // namespace

std::vector<PersistenceInterval> oracle_persistence_h0(const Patch& p) {
    const std::size_t s = p.size();
    if (s == 0 || p.values.cols() != s) throw std::invalid_argument("oracle_persistence_h0: square patch required");
    const std::size_t nv = s + 1;
    auto pixel = [&](long r, long c) {
        if (r < 0 || c < 0 || r >= static_cast<long>(s) || c >= static_cast<long>(s))
            return std::numeric_limits<double>::infinity();
        return p.values(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    };
    // Vertex (r, c) touches pixels (r-1..r, c-1..c).
    std::vector<double> vval(nv * nv);
    for (std::size_t r = 0; r < nv; ++r)
        for (std::size_t c = 0; c < nv; ++c) {
            const long R = static_cast<long>(r), C = static_cast<long>(c);
            vval[r * nv + c] = std::min({pixel(R - 1, C - 1), pixel(R - 1, C), pixel(R, C - 1), pixel(R, C)});
        }
    struct Edge {
        double value;
        std::uint32_t u, v;
    };
    std::vector<Edge> edges;
    for (std::size_t r = 0; r < nv; ++r)
        for (std::size_t c = 0; c + 1 < nv; ++c) {
            const long R = static_cast<long>(r), C = static_cast<long>(c);
            edges.push_back({std::min(pixel(R - 1, C), pixel(R, C)), static_cast<std::uint32_t>(r * nv + c),
                             static_cast<std::uint32_t>(r * nv + c + 1)});
        }
    for (std::size_t r = 0; r + 1 < nv; ++r)
        for (std::size_t c = 0; c < nv; ++c) {
            const long R = static_cast<long>(r), C = static_cast<long>(c);
            edges.push_back({std::min(pixel(R, C - 1), pixel(R, C)), static_cast<std::uint32_t>(r * nv + c),
                             static_cast<std::uint32_t>((r + 1) * nv + c)});
        }

    std::vector<double> levels(vval);
    for (const auto& e : edges) levels.push_back(e.value);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    UnionFind uf(nv * nv);
    std::vector<double> birth(nv * nv);  // birth of the component rooted here
    std::vector<PersistenceInterval> out;
    for (double level : levels) {
        for (std::uint32_t v = 0; v < vval.size(); ++v)
            if (vval[v] == level) birth[v] = level;
        for (const auto& e : edges) {
            if (e.value != level) continue;
            auto a = uf.find(e.u), b = uf.find(e.v);
            if (a == b) continue;
            if (birth[a] > birth[b]) std::swap(a, b);  // a is the elder
            if (birth[b] < level) out.push_back({birth[b], level, 0});
            uf.attach(b, a);
        }
    }
    std::uint32_t root = uf.find(0);
    out.push_back({birth[root], std::numeric_limits<double>::infinity(), 0});
    return out;
}

void write_diagram(std::ostream& out, const PersistenceDiagram& d) {
    char buf[96];
    for (const auto& iv : d.intervals) {
        if (iv.essential())
            std::snprintf(buf, sizeof buf, "%d %.17g inf\n", iv.degree, iv.birth);
        else
            std::snprintf(buf, sizeof buf, "%d %.17g %.17g\n", iv.degree, iv.birth, iv.death);
        out << buf;
    }
}

std::vector<PersistenceInterval> sorted_intervals(std::vector<PersistenceInterval> v) {
    std::sort(v.begin(), v.end(), [](const PersistenceInterval& a, const PersistenceInterval& b) {
        if (a.degree != b.degree) return a.degree < b.degree;
        if (a.birth != b.birth) return a.birth < b.birth;
        return a.death < b.death;
    });
    return v;
}

}  // namespace topotex
