#pragma once

// Per-patch transforms applied before the topological pipeline: local
// normalization, Schmid and MR filter banks, and CLBP sign/magnitude maps.

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "topotex/grid.hpp"
#include "topotex/grid_io.hpp"

namespace topotex {

enum class LocalNorm { none, zstd, minmax, pstd };

/// zstd: (P - mean) / std (population); minmax: (P - min) / (max - min);
/// pstd: (P - median) / MAD with MAD = median |P - median(P)|.
/// Throws std::domain_error naming the scheme when the denominator is zero.
Grid<double> local_normalize(const Grid<double>& p, LocalNorm scheme);
Patch local_normalize(const Patch& p, LocalNorm scheme);

std::string to_string(LocalNorm n);
LocalNorm parse_local_norm(const std::string& s);

enum class BankKind { schmid, mr };

struct KernelInfo {
    std::string kind;  // schmid, edge, bar, gaussian, log
    double sigma = 0.0;
    double tau = 0.0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
    double orientation = 0.0;  // radians
};

struct FilterBank {
    BankKind kind = BankKind::schmid;
    std::vector<Grid<double>> kernels;  // odd square, zero mean, unit L1 norm
    std::vector<KernelInfo> info;
};

/// 13 radial kernels cos(pi tau r / sigma) exp(-r^2 / 2 sigma^2) at the usual
/// (sigma, tau) pairs, tau halved.
FilterBank schmid_bank(int size = 49);

/// 38 kernels: 18 edge, 18 bar (3 scales x 6 orientations, scale-major),
/// then a Gaussian and a Laplacian of Gaussian, both sigma 10.
FilterBank mr_bank(int size = 49);

/// Same-size convolution with mirror padding (edge sample repeated), via FFT.
/// Plans and kernel spectra are built once for a fixed input shape; apply()
/// is const and may run concurrently.
class BankConvolver {
public:
    BankConvolver(const FilterBank& bank, std::size_t rows, std::size_t cols);
    ~BankConvolver();
    BankConvolver(const BankConvolver&) = delete;
    BankConvolver& operator=(const BankConvolver&) = delete;

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t kernel_count() const { return spectra_.size(); }

    std::vector<Grid<double>> apply(const Grid<double>& x) const;

private:
    struct Plans;
    std::size_t rows_, cols_, radius_, frows_, fcols_;
    std::vector<std::vector<std::complex<double>>> spectra_;
    std::unique_ptr<Plans> plans_;
};

/// One response per kernel.
std::vector<Grid<double>> apply_bank(const Grid<double>& p, const FilterBank& bank);

/// Collapses MR responses to 8 channels: per (kind, scale) the per-pixel
/// maximum of |response| over orientations, then Gaussian and LoG.
std::vector<Grid<double>> collapse_mr(const std::vector<Grid<double>>& responses);
std::vector<Grid<double>> apply_mr(const Grid<double>& p);

enum class ClbpEncoding { ri, riu2 };

struct ClbpParams {
    int n = 8;
    int r = 3;
    ClbpEncoding encoding = ClbpEncoding::riu2;
    void validate() const;
};

struct ClbpMaps {
    Grid<int> s_map;
    Grid<int> m_map;
    ClbpParams params;
};

/// Sign and magnitude codes over n bilinearly interpolated samples on a circle
/// of radius r; the border of width r is code 0.
ClbpMaps clbp(const Grid<double>& p, const ClbpParams& params);

/// Size of the code alphabet: n + 2 for riu2, the number of binary necklaces for ri.
int clbp_code_count(int n, ClbpEncoding encoding);

/// Lookup table from raw n-bit pattern to encoded value.
const std::vector<int>& clbp_mapping(int n, ClbpEncoding encoding);

std::string to_string(ClbpEncoding e);
ClbpEncoding parse_clbp_encoding(const std::string& s);

/// Mirror index into [0, n) with the edge sample repeated (..., 1, 0, 0, 1, ...).
inline std::size_t mirror_index(long long i, std::size_t n) {
    const long long period = 2 * static_cast<long long>(n);
    long long m = i % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < static_cast<long long>(n) ? m : period - 1 - m);
}

}  // namespace topotex
