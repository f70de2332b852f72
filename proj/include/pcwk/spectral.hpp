#ifndef PCWK_SPECTRAL_HPP
#define PCWK_SPECTRAL_HPP

/// @file
/// K x K matrix spectral densities stored as trigonometric polynomials
///   f(lambda) = sum_m F(m) e^{i m lambda},  F(-m) = F(m)^*,
/// and pointwise matrix functions on the uniform grid
///   lambda_g = -pi + 2 pi g / G,  g = 0..G-1.

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "error.hpp"
#include "lift.hpp"

namespace pcwk {

inline constexpr int default_grid_size = 2048;
inline constexpr double psd_tolerance = 1e-10;
inline constexpr double default_cond_threshold = 1e12;

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline double grid_node(int g, int grid_size) {
    return -std::numbers::pi + 2.0 * std::numbers::pi * g / grid_size;
}

struct SpectralDensity {
    int dim = 1;
    std::map<int, Mat> coeffs;
    int grid_size = default_grid_size;

    SpectralDensity() = default;
    SpectralDensity(int k, std::map<int, Mat> c, int grid = default_grid_size)
        : dim(k), coeffs(std::move(c)), grid_size(grid) {}

    static SpectralDensity constant(const Mat& value, int grid = default_grid_size) {
        return SpectralDensity(static_cast<int>(value.rows()), {{0, value}}, grid);
    }

    static SpectralDensity scalar(std::map<int, cplx> c, int grid = default_grid_size) {
        std::map<int, Mat> m;
        for (auto& [lag, v] : c) m[lag] = Mat::Constant(1, 1, v);
        return SpectralDensity(1, std::move(m), grid);
    }

    /// f = P P^* for P(lambda) = sum_u d(u) e^{-i u lambda}; d(u) is K x M.
    static SpectralDensity from_moving_average(const std::vector<Mat>& d,
                                               int grid = default_grid_size) {
        if (d.empty()) fail(ErrorKind::invalid_argument, "moving average: no coefficients");
        const int k = static_cast<int>(d.front().rows());
        const int q = static_cast<int>(d.size()) - 1;
        std::map<int, Mat> c;
        for (int m = -q; m <= q; ++m) {
            Mat acc = Mat::Zero(k, k);
            for (int u = 0; u <= q; ++u) {
                const int v = u + m;
                if (v < 0 || v > q) continue;
                acc += d[u] * d[v].adjoint();
            }
            c[m] = acc;
        }
        return SpectralDensity(k, std::move(c), grid);
    }

    Mat coeff(int m) const {
        const auto it = coeffs.find(m);
        return it == coeffs.end() ? Mat::Zero(dim, dim) : it->second;
    }

    int max_lag() const {
        int out = 0;
        for (const auto& [m, v] : coeffs) out = std::max(out, std::abs(m));
        return out;
    }

    /// Zero-lag trace, i.e. (1/2pi) int Tr f.
    double power() const { return coeff(0).trace().real(); }

    SpectralDensity scaled(double c) const {
        SpectralDensity out = *this;
        for (auto& [m, v] : out.coeffs) v *= c;
        return out;
    }

    SpectralDensity plus(const SpectralDensity& o) const {
        if (o.dim != dim) fail(ErrorKind::invalid_argument, "density sum: dimension mismatch");
        SpectralDensity out = *this;
        for (const auto& [m, v] : o.coeffs) {
            auto it = out.coeffs.find(m);
            if (it == out.coeffs.end()) out.coeffs[m] = v;
            else it->second += v;
        }
        return out;
    }
};

/// Pointwise matrix function on the frequency grid.
struct GridMatrixFunction {
    int dim = 1;
    std::vector<Mat> values;

    GridMatrixFunction() = default;
    GridMatrixFunction(int k, int grid) : dim(k), values(grid, Mat::Zero(k, k)) {}

    int grid_size() const { return static_cast<int>(values.size()); }
    const Mat& operator[](int g) const { return values[g]; }
    Mat& operator[](int g) { return values[g]; }

    static GridMatrixFunction constant(const Mat& v, int grid) {
        GridMatrixFunction out(static_cast<int>(v.rows()), grid);
        for (auto& x : out.values) x = v;
        return out;
    }
};

namespace detail {

inline void check_grid(int grid) {
    if (!is_power_of_two(grid) || grid < 8)
        fail(ErrorKind::invalid_argument, "grid size must be a power of two >= 8");
}

inline void check_same_grid(const GridMatrixFunction& a, const GridMatrixFunction& b) {
    if (a.dim != b.dim || a.grid_size() != b.grid_size())
        fail(ErrorKind::invalid_argument, "grid functions differ in dimension or grid size");
}

inline double hermitian_defect(const Mat& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

} // namespace detail

/// values[g] = sum_m F(m) e^{i m lambda_g}; exact for any lag (wrap-around
/// preserves e^{i m lambda_g} because G is even).
inline GridMatrixFunction evaluate_on_grid(const SpectralDensity& f) {
    const int grid = f.grid_size;
    detail::check_grid(grid);
    const int k = f.dim;
    GridMatrixFunction out(k, grid);
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    std::vector<cplx> series(grid), spectrum(grid);
    for (int r = 0; r < k; ++r) {
        for (int c = 0; c < k; ++c) {
            std::fill(series.begin(), series.end(), cplx{0.0, 0.0});
            for (const auto& [m, v] : f.coeffs) {
                const int slot = ((m % grid) + grid) % grid;
                series[slot] += (m % 2 == 0 ? 1.0 : -1.0) * v(r, c);
            }
            fft.inv(spectrum, series);
            for (int g = 0; g < grid; ++g) out[g](r, c) = spectrum[g];
        }
    }
    for (auto& v : out.values) v = 0.5 * (v + v.adjoint()).eval();
    return out;
}

/// Like evaluate_on_grid but without forcing Hermitian symmetry; for
/// general (e.g. causal factor) coefficient maps.
inline GridMatrixFunction evaluate_series_on_grid(const std::map<int, Mat>& coeffs, int rows,
                                                  int cols, int grid) {
    detail::check_grid(grid);
    GridMatrixFunction out;
    out.dim = rows;
    out.values.assign(grid, Mat::Zero(rows, cols));
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    std::vector<cplx> series(grid), spectrum(grid);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            std::fill(series.begin(), series.end(), cplx{0.0, 0.0});
            for (const auto& [m, v] : coeffs) {
                const int slot = ((m % grid) + grid) % grid;
                series[slot] += (m % 2 == 0 ? 1.0 : -1.0) * v(r, c);
            }
            fft.inv(spectrum, series);
            for (int g = 0; g < grid; ++g) out[g](r, c) = spectrum[g];
        }
    }
    return out;
}

/// All coefficients (1/2pi) int M(lambda) e^{-i j lambda} d lambda for
/// |j| <= max_lag, indexed j + max_lag. Requires max_lag < G/2.
inline std::vector<Mat> fourier_coefficients(const GridMatrixFunction& m, int max_lag) {
    const int grid = m.grid_size();
    detail::check_grid(grid);
    if (max_lag < 0 || 2 * max_lag >= grid)
        fail(ErrorKind::aliasing, "fourier coefficient lag " + std::to_string(max_lag) +
                                      " not below G/2 = " + std::to_string(grid / 2));
    const int rows = static_cast<int>(m.values.front().rows());
    const int cols = static_cast<int>(m.values.front().cols());
    std::vector<Mat> out(2 * max_lag + 1, Mat::Zero(rows, cols));
    Eigen::FFT<double> fft;
    std::vector<cplx> series(grid), spectrum(grid);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            for (int g = 0; g < grid; ++g) series[g] = m[g](r, c);
            fft.fwd(spectrum, series);
            for (int j = -max_lag; j <= max_lag; ++j) {
                const int slot = ((j % grid) + grid) % grid;
                out[j + max_lag](r, c) = (j % 2 == 0 ? 1.0 : -1.0) * spectrum[slot] / double(grid);
            }
        }
    }
    return out;
}

/// (1/2pi) int M(lambda) e^{-i j lambda} d lambda by the G-node trapezoid
/// rule; exact for trigonometric polynomials of degree below G/2.
inline Mat fourier_coefficient(const GridMatrixFunction& m, int lag) {
    const int grid = m.grid_size();
    detail::check_grid(grid);
    if (2 * std::abs(lag) >= grid)
        fail(ErrorKind::aliasing, "fourier coefficient lag " + std::to_string(lag) +
                                      " not below G/2 = " + std::to_string(grid / 2));
    Mat acc = Mat::Zero(m.values.front().rows(), m.values.front().cols());
    for (int g = 0; g < grid; ++g) {
        const double ph = -lag * grid_node(g, grid);
        acc += m[g] * cplx(std::cos(ph), std::sin(ph));
    }
    return acc / double(grid);
}

// Pointwise algebra.

inline GridMatrixFunction operator+(const GridMatrixFunction& a, const GridMatrixFunction& b) {
    detail::check_same_grid(a, b);
    GridMatrixFunction out = a;
    for (int g = 0; g < a.grid_size(); ++g) out[g] += b[g];
    return out;
}

inline GridMatrixFunction operator*(const GridMatrixFunction& a, const GridMatrixFunction& b) {
    if (a.grid_size() != b.grid_size())
        fail(ErrorKind::invalid_argument, "grid product: grid size mismatch");
    GridMatrixFunction out;
    out.dim = a.dim;
    out.values.resize(a.grid_size());
    for (int g = 0; g < a.grid_size(); ++g) out[g] = a[g] * b[g];
    return out;
}

inline GridMatrixFunction scaled(const GridMatrixFunction& a, double c) {
    GridMatrixFunction out = a;
    for (auto& v : out.values) v *= c;
    return out;
}

inline GridMatrixFunction transposed(const GridMatrixFunction& a) {
    GridMatrixFunction out = a;
    for (auto& v : out.values) v = v.transpose().eval();
    return out;
}

/// Smallest and largest eigenvalue of a Hermitian matrix.
inline std::pair<double, double> hermitian_eig_range(const Mat& m) {
    if (m.rows() == 1) return {m(0, 0).real(), m(0, 0).real()};
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

/// Pointwise inverse of a Hermitian positive definite grid function; throws
/// singular-density when any node is beyond the condition threshold.
inline GridMatrixFunction hermitian_inverse(const GridMatrixFunction& a,
                                            double cond_threshold = default_cond_threshold) {
    GridMatrixFunction out = a;
    for (int g = 0; g < a.grid_size(); ++g) {
        const auto [lo, hi] = hermitian_eig_range(a[g]);
        if (!(lo > 0.0) || hi / lo > cond_threshold)
            fail(ErrorKind::singular_density,
                 "minimality condition (6) violated: density singular at grid node " +
                     std::to_string(g) + " (lambda=" + std::to_string(grid_node(g, a.grid_size())) +
                     ")");
        Mat inv = a[g].ldlt().solve(Mat::Identity(a.dim, a.dim));
        out[g] = 0.5 * (inv + inv.adjoint());
    }
    return out;
}

/// Coefficient map from grid values for |m| <= max_lag, Hermitian-symmetrized,
/// with negligible trailing lags trimmed.
inline SpectralDensity density_from_grid(const GridMatrixFunction& values, int max_lag) {
    const int grid = values.grid_size();
    const auto c = fourier_coefficients(values, max_lag);
    double scale = 0.0;
    for (const auto& m : c) scale = std::max(scale, m.cwiseAbs().maxCoeff());
    int keep = max_lag;
    while (keep > 0 && c[max_lag + keep].cwiseAbs().maxCoeff() <= 1e-15 * scale &&
           c[max_lag - keep].cwiseAbs().maxCoeff() <= 1e-15 * scale)
        --keep;
    std::map<int, Mat> coeffs;
    coeffs[0] = 0.5 * (c[max_lag] + c[max_lag].adjoint());
    for (int m = 1; m <= keep; ++m) {
        Mat pos = 0.5 * (c[max_lag + m] + c[max_lag - m].adjoint());
        coeffs[m] = pos;
        coeffs[-m] = pos.adjoint();
    }
    return SpectralDensity(values.dim, std::move(coeffs), grid);
}

/// Density whose grid values are the inverse of a positive trigonometric
/// polynomial, truncated at max_lag (default G/4).
inline SpectralDensity inverse_density(const SpectralDensity& poly, int max_lag = -1) {
    const auto grid = evaluate_on_grid(poly);
    if (max_lag < 0) max_lag = poly.grid_size / 4;
    return density_from_grid(hermitian_inverse(grid), max_lag);
}

struct MinimalityReport {
    double integral = std::numeric_limits<double>::infinity(); // int Tr[(f+g)^{-1}] d lambda
    double max_condition = std::numeric_limits<double>::infinity();
    int worst_node = -1;
    bool pass = false;
    std::string message;
};

/// Quadrature of int Tr[(f+g)^{-1}] d lambda with conditioning diagnostics;
/// g may be absent (noiseless condition).
inline MinimalityReport check_minimality(const SpectralDensity& f, const SpectralDensity* g,
                                         double cond_threshold = default_cond_threshold) {
    if (g && (g->dim != f.dim || g->grid_size != f.grid_size))
        fail(ErrorKind::invalid_argument, "check_minimality: f and g differ in K or grid");
    auto total = evaluate_on_grid(f);
    if (g) total = total + evaluate_on_grid(*g);
    MinimalityReport r;
    r.max_condition = 0.0;
    double integral = 0.0;
    const int grid = total.grid_size();
    for (int n = 0; n < grid; ++n) {
        const auto [lo, hi] = hermitian_eig_range(total[n]);
        const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
        if (cond > r.max_condition) {
            r.max_condition = cond;
            r.worst_node = n;
        }
        if (lo > 0.0) integral += total[n].ldlt().solve(Mat::Identity(f.dim, f.dim)).trace().real();
    }
    r.pass = r.max_condition <= cond_threshold;
    if (r.pass) {
        r.integral = integral * 2.0 * std::numbers::pi / grid;
    } else {
        r.message = std::string(g ? "minimality condition (6)" : "minimality condition (13)") +
                    " violated: singular at grid node " + std::to_string(r.worst_node) +
                    " (lambda=" + std::to_string(grid_node(r.worst_node, grid)) + ")";
    }
    return r;
}

inline MinimalityReport check_minimality(const SpectralDensity& f,
                                         const std::optional<SpectralDensity>& g,
                                         double cond_threshold = default_cond_threshold) {
    return check_minimality(f, g ? &*g : nullptr, cond_threshold);
}

struct DensityReport {
    bool hermitian = true;
    bool psd = true;
    bool finite = true;
    double min_eigenvalue = 0.0;
    int min_node = -1;
    std::vector<std::string> issues;

    bool ok() const { return hermitian && psd && finite; }
};

inline DensityReport validate_density(const SpectralDensity& f) {
    DensityReport r;
    double scale = 0.0;
    for (const auto& [m, v] : f.coeffs) {
        if (v.rows() != f.dim || v.cols() != f.dim) {
            r.finite = false;
            r.issues.push_back("coefficient at lag " + std::to_string(m) + " has wrong shape");
            return r;
        }
        if (!v.allFinite()) {
            r.finite = false;
            r.issues.push_back("non-finite coefficient at lag " + std::to_string(m));
        }
        scale = std::max(scale, v.cwiseAbs().maxCoeff());
    }
    if (!r.finite) return r;
    for (const auto& [m, v] : f.coeffs) {
        const Mat partner = f.coeff(-m);
        if ((partner - v.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale)) {
            r.hermitian = false;
            r.issues.push_back("Hermitian symmetry violated: F(" + std::to_string(-m) +
                               ") != F(" + std::to_string(m) + ")^*");
        }
    }
    const auto grid = evaluate_on_grid(f);
    r.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (int g = 0; g < grid.grid_size(); ++g) {
        const double lo = hermitian_eig_range(grid[g]).first;
        if (lo < r.min_eigenvalue) {
            r.min_eigenvalue = lo;
            r.min_node = g;
        }
    }
    if (r.min_eigenvalue < -psd_tolerance) {
        r.psd = false;
        r.issues.push_back("density not positive semidefinite at grid node " +
                           std::to_string(r.min_node) + " (lambda=" +
                           std::to_string(grid_node(r.min_node, grid.grid_size())) +
                           ", min eigenvalue " + std::to_string(r.min_eigenvalue) + ")");
    }
    return r;
}

} // namespace pcwk

#endif // PCWK_SPECTRAL_HPP
