#pragma once

// Fixed-length descriptors of persistence diagrams: PD_AGG statistics and
// persistence images.

#include <array>
#include <string>
#include <vector>

#include "topotex/cubical.hpp"
#include "topotex/grid.hpp"

namespace topotex {

/// count, min, max, mean, std, variance, q1, median, q3, sum sqrt(d), sum d, sum d^2
/// over interval lengths d = death - birth. Population moments, type-7 quantiles.
using PdAggVector = std::array<double, 12>;

inline constexpr std::array<const char*, 12> kPdAggNames = {
    "count", "min", "max", "mean", "std", "variance", "q1", "median", "q3", "sum_sqrt", "sum", "sum_sq"};

PdAggVector pd_agg(const PersistenceDiagram& d);

enum class Weighting { none, linear, exponential };

struct PiParams {
    int resolution = 16;
    double sigma_x = 0.001;
    double sigma_y = 0.001;
    Limits limits{-5.0, 5.0};
    Weighting weighting = Weighting::none;
    bool outlier_removal = false;

    /// Throws std::invalid_argument unless R >= 2, sigmas > 0 and max > min.
    void validate() const;
};

/// Pixel grid over (birth, death) in [min, max]^2. Row index = birth bin,
/// column index = death bin; pixels(i, j) with j < i lie below the diagonal.
struct PersistenceImage {
    PiParams params;
    Grid<double> pixels;
};

struct FeatureVector {
    std::vector<double> values;
    std::string descriptor;  // which descriptor/params produced the values
    std::string patch_id;    // source patch; empty when not tied to one
};

/// Weight of a diagram point; none -> 1, linear -> p/L, exponential ->
/// (exp(p/tau) - 1)/(exp(L/tau) - 1) with tau = L/4, for persistence p = e - b
/// and L = max - min.
double weight(double birth, double death, Weighting scheme, Limits limits);

/// Drops intervals with birth < min or death > max.
PersistenceDiagram remove_outliers(const PersistenceDiagram& d, Limits limits);
inline PersistenceDiagram remove_outliers(const PersistenceDiagram& d) { return remove_outliers(d, d.limits); }

/// Exact box integrals of weighted axis-aligned Gaussians centered at each
/// (birth, death). Points outside the limits still contribute through their tails
/// unless outlier_removal is set.
PersistenceImage persistence_image(const PersistenceDiagram& d, const PiParams& params);

/// Row-major pixels with death bin >= birth bin; length (R^2 + R) / 2.
FeatureVector vectorize_pi(const PersistenceImage& img);

/// Inverse of the vectorization; pixels below the diagonal are zero.
Grid<double> unvectorize_pi(const std::vector<double>& values, int resolution);

/// R such that (R^2 + R)/2 == length; throws if there is none.
int pi_resolution_for_length(std::size_t length);

inline std::size_t pi_vector_length(int resolution) {
    return static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution + 1) / 2;
}

std::string to_string(Weighting w);
Weighting parse_weighting(const std::string& s);

}  // namespace topotex
