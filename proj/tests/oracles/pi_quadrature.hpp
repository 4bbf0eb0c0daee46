#pragma once

// Persistence image by adaptive Gauss-Kronrod quadrature of the Gaussian
// densities. The 2D integral of each point's Gaussian over a box is the
// product of two 1D integrals; each 1D integral is split at the mean so the
// integrand is monotone on every piece.

#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "topotex/cubical.hpp"
#include "topotex/grid.hpp"

namespace oracle {

enum class Weight { none, linear, exponential };

inline double point_weight(double b, double d, Weight w, topotex::Limits lim) {
    const double L = lim.max - lim.min, p = d - b, tau = L / 4.0;
    switch (w) {
        case Weight::none: return 1.0;
        case Weight::linear: return p / L;
        case Weight::exponential: return (std::exp(p / tau) - 1.0) / (std::exp(L / tau) - 1.0);
    }
    return 0.0;
}

inline double gauss_mass(double a, double b, double mu, double sigma) {
    using boost::math::quadrature::gauss_kronrod;
    const double norm = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
    auto f = [&](double x) { return norm * std::exp(-(x - mu) * (x - mu) / (2.0 * sigma * sigma)); };
    auto piece = [&](double lo, double hi) {
        if (!(hi > lo)) return 0.0;
        return gauss_kronrod<double, 31>::integrate(f, lo, hi, 20, 1e-10);
    };
    if (mu <= a || mu >= b) return piece(a, b);
    return piece(a, mu) + piece(mu, b);
}

/// pixels(i, j): birth bin i, death bin j.
inline topotex::Grid<double> pi_quadrature(const std::vector<topotex::PersistenceInterval>& pts, int R,
                                           double sx, double sy, topotex::Limits lim, Weight w) {
    const double h = (lim.max - lim.min) / R;
    topotex::Grid<double> g(static_cast<std::size_t>(R), static_cast<std::size_t>(R), 0.0);
    for (const auto& p : pts) {
        const double wt = point_weight(p.birth, p.death, w, lim);
        std::vector<double> mx(static_cast<std::size_t>(R)), my(static_cast<std::size_t>(R));
        for (int i = 0; i < R; ++i) {
            const double a = lim.min + i * h, b = lim.min + (i + 1) * h;
            mx[static_cast<std::size_t>(i)] = gauss_mass(a, b, p.birth, sx);
            my[static_cast<std::size_t>(i)] = gauss_mass(a, b, p.death, sy);
        }
        for (std::size_t i = 0; i < mx.size(); ++i)
            for (std::size_t j = 0; j < my.size(); ++j) g(i, j) += wt * mx[i] * my[j];
    }
    return g;
}

}  // namespace oracle
