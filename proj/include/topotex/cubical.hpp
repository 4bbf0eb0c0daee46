#pragma once

// Lower-star cubical filtration of a square patch and its persistent homology.
//
// Cells live on the (2S+1)x(2S+1) grid of a patch with S x S pixels: an entry
// (i, j) with both coordinates odd is a pixel square, with both even a vertex,
// otherwise an edge. Squares take the pixel depth, lower-dimensional cells the
// minimum over their incident squares.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "topotex/grid.hpp"
#include "topotex/grid_io.hpp"

namespace topotex {

struct Limits {
    double min = -5.0;
    double max = 5.0;
    bool operator==(const Limits&) const = default;
};

class CubicalFiltration {
public:
    /// Requires a square patch with S >= 2.
    explicit CubicalFiltration(const Grid<double>& pixels);

    std::size_t size() const { return size_; }
    std::size_t side() const { return 2 * size_ + 1; }
    std::size_t cell_count() const { return values_.size(); }
    std::size_t vertex_count() const { return (size_ + 1) * (size_ + 1); }
    std::size_t edge_count() const { return 2 * size_ * (size_ + 1); }
    std::size_t square_count() const { return size_ * size_; }

    int dimension(std::uint32_t cell) const {
        const auto r = cell / side();
        const auto c = cell % side();
        return static_cast<int>((r & 1u) + (c & 1u));
    }
    double value(std::uint32_t cell) const { return values_[cell]; }
    const std::vector<double>& values() const { return values_; }

    /// Cells sorted by (value, dimension, cell index).
    const std::vector<std::uint32_t>& order() const { return order_; }
    double max_value() const { return max_value_; }

private:
    std::size_t size_;
    std::vector<double> values_;
    std::vector<std::uint32_t> order_;
    double max_value_;
};

inline CubicalFiltration build_filtration(const Patch& p) { return CubicalFiltration(p.values); }

struct PersistenceInterval {
    double birth = 0.0;
    double death = std::numeric_limits<double>::infinity();  // infinity marks an essential class
    int degree = 0;

    bool essential() const { return death == std::numeric_limits<double>::infinity(); }
    double length() const { return death - birth; }
    bool operator==(const PersistenceInterval&) const = default;
};

/// How the single essential H0 class is turned into a finite interval.
/// `keep` leaves death = +inf (Betti counting, debug dumps).
enum class EssentialPolicy { cap_at_max_value, cap_at_limit, drop, keep };

struct PersistenceDiagram {
    std::vector<PersistenceInterval> intervals;
    Limits limits;
    EssentialPolicy essential_policy = EssentialPolicy::cap_at_max_value;
};

enum class DegreeSet { h0, h1, both };

/// Twist/clearing boundary-matrix reduction over Z/2. Zero-length pairs are dropped.
PersistenceDiagram compute_persistence(const CubicalFiltration& f,
                                       EssentialPolicy policy = EssentialPolicy::cap_at_max_value,
                                       Limits limits = {});

/// Convenience: filtration + persistence for raw pixels.
PersistenceDiagram patch_persistence(const Grid<double>& pixels,
                                     EssentialPolicy policy = EssentialPolicy::cap_at_max_value,
                                     Limits limits = {});

PersistenceDiagram select_degrees(const PersistenceDiagram& d, DegreeSet degrees);

struct BettiNumbers {
    int b0 = 0;
    int b1 = 0;
    bool operator==(const BettiNumbers&) const = default;
};

/// Number of intervals with birth <= r < death, per degree.
BettiNumbers betti_at(const PersistenceDiagram& d, double r);

/// Independent H0 reference: sweeps the distinct values upward and merges
/// components with a union-find, the older birth surviving. The essential
/// class is reported with death = +inf. Intended for small patches.
std::vector<PersistenceInterval> oracle_persistence_h0(const Patch& p);

/// "degree birth death" per line, "inf" for essential classes.
void write_diagram(std::ostream& out, const PersistenceDiagram& d);

/// Intervals sorted by (degree, birth, death); handy for comparisons.
std::vector<PersistenceInterval> sorted_intervals(std::vector<PersistenceInterval> v);

}  // namespace topotex
