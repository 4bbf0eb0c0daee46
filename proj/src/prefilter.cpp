#include "topotex/prefilter.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace topotex {

namespace {

constexpr double kPi = std::numbers::pi;

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double hi = *mid;
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

// Zero mean, then unit sum of absolute values.
void normalise(Grid<double>& k) {
    double mean = 0.0;
    for (double v : k.values()) mean += v;
    mean /= static_cast<double>(k.size());
    double l1 = 0.0;
    for (double& v : k.values()) {
        v -= mean;
        l1 += std::abs(v);
    }
    if (l1 > 0.0)
        for (double& v : k.values()) v /= l1;
}

void check_kernel_size(int size) {
    if (size < 3 || size % 2 == 0) throw std::invalid_argument("filter size must be odd and >= 3");
}

// 1D Gaussian and its first two derivatives.
double gauss1d(double sigma, double x, int order) {
    const double var = sigma * sigma;
    const double g = std::exp(-x * x / (2.0 * var)) / std::sqrt(2.0 * kPi * var);
    switch (order) {
        case 0: return g;
        case 1: return -g * x / var;
        default: return g * (x * x - var) / (var * var);
    }
}

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (!p) throw std::bad_alloc();
    return FftwBuffer<T>(p);
}

}  // namespace

Grid<double> local_normalize(const Grid<double>& p, LocalNorm scheme) {
    if (scheme == LocalNorm::none) return p;
    if (p.empty()) throw std::invalid_argument("local_normalize: empty patch");
    const auto vals = p.values();
    double shift = 0.0, scale = 0.0;
    switch (scheme) {
        case LocalNorm::zstd: {
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double var = 0.0;
            for (double v : vals) var += (v - mean) * (v - mean);
            shift = mean;
            scale = std::sqrt(var / static_cast<double>(vals.size()));
            break;
        }
        case LocalNorm::minmax: {
            const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
            shift = *lo;
            scale = *hi - *lo;
            break;
        }
        case LocalNorm::pstd: {
            shift = median_of(std::vector<double>(vals.begin(), vals.end()));
            std::vector<double> dev;
            dev.reserve(vals.size());
            for (double v : vals) dev.push_back(std::abs(v - shift));
            scale = median_of(std::move(dev));
            break;
        }
        case LocalNorm::none: break;
    }
    if (!(scale > 0.0)) throw std::domain_error("local_normalize(" + to_string(scheme) + "): zero denominator");
    Grid<double> out(p.rows(), p.cols());
    auto o = out.values();
    for (std::size_t i = 0; i < vals.size(); ++i) o[i] = (vals[i] - shift) / scale;
    return out;
}

Patch local_normalize(const Patch& p, LocalNorm scheme) {
    return Patch{p.row, p.col, local_normalize(p.values, scheme)};
}

std::string to_string(LocalNorm n) {
    switch (n) {
        case LocalNorm::none: return "none";
        case LocalNorm::zstd: return "zstd";
        case LocalNorm::minmax: return "minmax";
        case LocalNorm::pstd: return "pstd";
    }
    return "?";
}

LocalNorm parse_local_norm(const std::string& s) {
    if (s == "none") return LocalNorm::none;
    if (s == "zstd" || s == "z-std") return LocalNorm::zstd;
    if (s == "minmax") return LocalNorm::minmax;
    if (s == "pstd" || s == "p-std") return LocalNorm::pstd;
    throw std::invalid_argument("unknown local normalization '" + s + "'");
}

FilterBank schmid_bank(int size) {
    check_kernel_size(size);
    static constexpr std::array<std::pair<double, double>, 13> pairs = {{
        {2, 1}, {4, 1}, {4, 2}, {6, 1}, {6, 2}, {6, 3}, {8, 1}, {8, 2}, {8, 3}, {10, 1}, {10, 2}, {10, 3}, {10, 4},
    }};
    const int h = size / 2;
    FilterBank bank;
    bank.kind = BankKind::schmid;
    for (const auto& [sigma, tau0] : pairs) {
        const double tau = tau0 / 2.0;
        Grid<double> k(static_cast<std::size_t>(size), static_cast<std::size_t>(size));
        for (int y = -h; y <= h; ++y)
            for (int x = -h; x <= h; ++x) {
                // depends on x*x + y*y only, so k(x, y) == k(-x, -y) bit for bit
                const double r = std::sqrt(static_cast<double>(x * x + y * y));
                k(static_cast<std::size_t>(y + h), static_cast<std::size_t>(x + h)) =
                    std::cos(r * (kPi * tau / sigma)) * std::exp(-(r * r) / (2.0 * sigma * sigma));
            }
        normalise(k);
        bank.kernels.push_back(std::move(k));
        bank.info.push_back({"schmid", sigma, tau, 0, 0, 0});
    }
    return bank;
}

FilterBank mr_bank(int size) {
    check_kernel_size(size);
    constexpr int kOrient = 6;
    constexpr std::array<double, 3> scales = {1, 2, 4};
    const int h = size / 2;
    const auto S = static_cast<std::size_t>(size);

    auto oriented = [&](double scale, double angle, int order) {
        const double c = std::cos(angle), s = std::sin(angle);
        Grid<double> k(S, S);
        for (int y = -h; y <= h; ++y)
            for (int x = -h; x <= h; ++x) {
                const double rx = c * x - s * y;
                const double ry = s * x + c * y;
                k(static_cast<std::size_t>(y + h), static_cast<std::size_t>(x + h)) =
                    gauss1d(3.0 * scale, rx, 0) * gauss1d(scale, ry, order);
            }
        normalise(k);
        return k;
    };

    FilterBank bank;
    bank.kind = BankKind::mr;
    for (int order : {1, 2})
        for (double scale : scales)
            for (int o = 0; o < kOrient; ++o) {
                const double angle = kPi * o / kOrient;
                bank.kernels.push_back(oriented(scale, angle, order));
                bank.info.push_back({order == 1 ? "edge" : "bar", 0, 0, scale, 3.0 * scale, angle});
            }

    const double sigma = 10.0;
    Grid<double> g(S, S), log(S, S);
    for (int y = -h; y <= h; ++y)
        for (int x = -h; x <= h; ++x) {
            const double r2 = static_cast<double>(x * x + y * y);
            const double e = std::exp(-r2 / (2.0 * sigma * sigma));
            g(static_cast<std::size_t>(y + h), static_cast<std::size_t>(x + h)) = e;
            log(static_cast<std::size_t>(y + h), static_cast<std::size_t>(x + h)) =
                e * (r2 - 2.0 * sigma * sigma) / std::pow(sigma, 4);
        }
    normalise(g);
    normalise(log);
    bank.kernels.push_back(std::move(g));
    bank.info.push_back({"gaussian", sigma, 0, 0, 0, 0});
    bank.kernels.push_back(std::move(log));
    bank.info.push_back({"log", sigma, 0, 0, 0, 0});
    return bank;
}

struct BankConvolver::Plans {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
    ~Plans() {
        std::lock_guard lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (inverse) fftw_destroy_plan(inverse);
    }
};

BankConvolver::BankConvolver(const FilterBank& bank, std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), radius_(0), plans_(std::make_unique<Plans>()) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("BankConvolver: empty input shape");
    if (bank.kernels.empty()) throw std::invalid_argument("BankConvolver: empty bank");
    const std::size_t K = bank.kernels.front().rows();
    for (const auto& k : bank.kernels)
        if (k.rows() != K || k.cols() != K || K % 2 == 0)
            throw std::invalid_argument("BankConvolver: kernels must share one odd square size");
    radius_ = K / 2;
    frows_ = rows + 2 * radius_;
    fcols_ = cols + 2 * radius_;
    const std::size_t nreal = frows_ * fcols_;
    const std::size_t ncplx = frows_ * (fcols_ / 2 + 1);

    auto real = fftw_buffer<double>(nreal);
    auto cplx = fftw_buffer<fftw_complex>(ncplx);
    {
        std::lock_guard lock(planner_mutex());
        plans_->forward = fftw_plan_dft_r2c_2d(static_cast<int>(frows_), static_cast<int>(fcols_), real.get(),
                                               cplx.get(), FFTW_ESTIMATE);
        plans_->inverse = fftw_plan_dft_c2r_2d(static_cast<int>(frows_), static_cast<int>(fcols_), cplx.get(),
                                               real.get(), FFTW_ESTIMATE);
    }
    if (!plans_->forward || !plans_->inverse) throw std::runtime_error("BankConvolver: FFTW planning failed");

    for (const auto& k : bank.kernels) {
        std::fill(real.get(), real.get() + nreal, 0.0);
        for (std::size_t r = 0; r < K; ++r)
            for (std::size_t c = 0; c < K; ++c) real[r * fcols_ + c] = k(r, c);
        fftw_execute_dft_r2c(plans_->forward, real.get(), cplx.get());
        std::vector<std::complex<double>> spec(ncplx);
        for (std::size_t i = 0; i < ncplx; ++i) spec[i] = {cplx[i][0], cplx[i][1]};
        spectra_.push_back(std::move(spec));
    }
}

BankConvolver::~BankConvolver() = default;

std::vector<Grid<double>> BankConvolver::apply(const Grid<double>& x) const {
    if (x.rows() != rows_ || x.cols() != cols_) throw std::invalid_argument("BankConvolver: input shape mismatch");
    const std::size_t nreal = frows_ * fcols_;
    const std::size_t ncplx = frows_ * (fcols_ / 2 + 1);
    auto real = fftw_buffer<double>(nreal);
    auto xf = fftw_buffer<fftw_complex>(ncplx);
    auto prod = fftw_buffer<fftw_complex>(ncplx);

    const auto r = static_cast<long long>(radius_);
    for (std::size_t i = 0; i < frows_; ++i) {
        const std::size_t si = mirror_index(static_cast<long long>(i) - r, rows_);
        for (std::size_t j = 0; j < fcols_; ++j)
            real[i * fcols_ + j] = x(si, mirror_index(static_cast<long long>(j) - r, cols_));
    }
    fftw_execute_dft_r2c(plans_->forward, real.get(), xf.get());

    const double scale = 1.0 / static_cast<double>(nreal);
    std::vector<Grid<double>> out;
    out.reserve(spectra_.size());
    for (const auto& spec : spectra_) {
        for (std::size_t i = 0; i < ncplx; ++i) {
            const std::complex<double> z = std::complex<double>(xf[i][0], xf[i][1]) * spec[i];
            prod[i][0] = z.real();
            prod[i][1] = z.imag();
        }
        fftw_execute_dft_c2r(plans_->inverse, prod.get(), real.get());
        // the circular result is alias-free from offset 2r onwards
        Grid<double> g(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                g(i, j) = real[(i + 2 * radius_) * fcols_ + j + 2 * radius_] * scale;
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<Grid<double>> apply_bank(const Grid<double>& p, const FilterBank& bank) {
    return BankConvolver(bank, p.rows(), p.cols()).apply(p);
}

std::vector<Grid<double>> collapse_mr(const std::vector<Grid<double>>& responses) {
    if (responses.size() != 38) throw std::invalid_argument("collapse_mr: expected 38 MR responses");
    std::vector<Grid<double>> out;
    for (std::size_t group = 0; group < 6; ++group) {
        Grid<double> m(responses[0].rows(), responses[0].cols(), 0.0);
        for (std::size_t o = 0; o < 6; ++o) {
            const auto src = responses[group * 6 + o].values();
            auto dst = m.values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(dst[i], std::abs(src[i]));
        }
        out.push_back(std::move(m));
    }
    out.push_back(responses[36]);
    out.push_back(responses[37]);
    return out;
}

std::vector<Grid<double>> apply_mr(const Grid<double>& p) {
    static const FilterBank bank = mr_bank();
    return collapse_mr(apply_bank(p, bank));
}

// ---- CLBP ----

void ClbpParams::validate() const {
    if (n != 8 && n != 16) throw std::invalid_argument("CLBP: n must be 8 or 16");
    if (r < 1) throw std::invalid_argument("CLBP: radius must be positive");
}

namespace {

unsigned rotate_left(unsigned v, int n) {
    const unsigned mask = (1u << n) - 1u;
    return ((v << 1) | (v >> (n - 1))) & mask;
}

std::vector<int> build_mapping(int n, ClbpEncoding enc) {
    const unsigned count = 1u << n;
    std::vector<int> table(count);
    if (enc == ClbpEncoding::riu2) {
        for (unsigned i = 0; i < count; ++i) {
            const int transitions = std::popcount(i ^ rotate_left(i, n));
            table[i] = transitions <= 2 ? std::popcount(i) : n + 1;
        }
        return table;
    }
    // ri: classes numbered by their smallest rotation, ascending
    std::vector<int> index(count, -1);
    int next = 0;
    for (unsigned i = 0; i < count; ++i) {
        unsigned rm = i, r = i;
        for (int j = 1; j < n; ++j) {
            r = rotate_left(r, n);
            rm = std::min(rm, r);
        }
        if (index[rm] < 0) index[rm] = next++;
        table[i] = index[rm];
    }
    return table;
}

}  // namespace

const std::vector<int>& clbp_mapping(int n, ClbpEncoding encoding) {
    if (n != 8 && n != 16) throw std::invalid_argument("CLBP: n must be 8 or 16");
    static const std::array<std::vector<int>, 4> tables = {
        build_mapping(8, ClbpEncoding::ri), build_mapping(8, ClbpEncoding::riu2),
        build_mapping(16, ClbpEncoding::ri), build_mapping(16, ClbpEncoding::riu2)};
    return tables[(n == 16 ? 2 : 0) + (encoding == ClbpEncoding::riu2 ? 1 : 0)];
}

int clbp_code_count(int n, ClbpEncoding encoding) {
    const auto& t = clbp_mapping(n, encoding);
    return *std::max_element(t.begin(), t.end()) + 1;
}

ClbpMaps clbp(const Grid<double>& p, const ClbpParams& params) {
    params.validate();
    const auto R = static_cast<std::size_t>(params.r);
    if (p.rows() <= 2 * R || p.cols() <= 2 * R) throw std::invalid_argument("CLBP: patch too small for radius");
    const int n = params.n;
    const std::size_t H = p.rows() - 2 * R, W = p.cols() - 2 * R;  // interior centers

    // neighbor differences, one interior-sized plane per sample point
    std::vector<std::vector<double>> diff(static_cast<std::size_t>(n), std::vector<double>(H * W));
    double sum_abs = 0.0;
    for (int s = 0; s < n; ++s) {
        const double a = 2.0 * kPi * s / n;
        const double dy = -params.r * std::sin(a);
        const double dx = params.r * std::cos(a);
        const double ry = std::round(dy), rx = std::round(dx);
        const bool exact = std::abs(dy - ry) < 1e-6 && std::abs(dx - rx) < 1e-6;
        const double fy = std::floor(dy), fx = std::floor(dx);
        const double ty = dy - fy, tx = dx - fx;
        const double w1 = (1 - tx) * (1 - ty), w2 = tx * (1 - ty), w3 = (1 - tx) * ty, w4 = tx * ty;
        const auto off = [](double v) { return static_cast<long long>(v); };
        auto& d = diff[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                const long long ci = static_cast<long long>(i + R), cj = static_cast<long long>(j + R);
                const auto at = [&](long long di, long long dj) {
                    return p(static_cast<std::size_t>(ci + di), static_cast<std::size_t>(cj + dj));
                };
                double v;
                if (exact) {
                    v = at(off(ry), off(rx));
                } else {
                    const long long y0 = off(fy), x0 = off(fx);
                    const long long y1 = off(std::ceil(dy)), x1 = off(std::ceil(dx));
                    v = w1 * at(y0, x0) + w2 * at(y0, x1) + w3 * at(y1, x0) + w4 * at(y1, x1);
                }
                const double dv = v - at(0, 0);
                d[i * W + j] = dv;
                sum_abs += std::abs(dv);
            }
    }
    const double mean_abs = sum_abs / static_cast<double>(static_cast<std::size_t>(n) * H * W);

    const auto& table = clbp_mapping(n, params.encoding);
    ClbpMaps maps{Grid<int>(p.rows(), p.cols(), 0), Grid<int>(p.rows(), p.cols(), 0), params};
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
            unsigned s_code = 0, m_code = 0;
            for (int s = 0; s < n; ++s) {
                const double dv = diff[static_cast<std::size_t>(s)][i * W + j];
                if (dv >= 0.0) s_code |= 1u << s;
                if (std::abs(dv) >= mean_abs) m_code |= 1u << s;
            }
            maps.s_map(i + R, j + R) = table[s_code];
            maps.m_map(i + R, j + R) = table[m_code];
        }
    return maps;
}

std::string to_string(ClbpEncoding e) { return e == ClbpEncoding::ri ? "ri" : "riu2"; }

ClbpEncoding parse_clbp_encoding(const std::string& s) {
    if (s == "ri") return ClbpEncoding::ri;
    if (s == "riu2") return ClbpEncoding::riu2;
    throw std::invalid_argument("unknown CLBP encoding '" + s + "'");
}

}  // namespace topotex
