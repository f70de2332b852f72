#ifndef PCWK_ESTIMATORS_HPP
#define PCWK_ESTIMATORS_HPP

/// @file
/// Optimal linear estimation under spectral certainty: interpolation of a
/// gap {0..N}, extrapolation from the past, and filtering, each from
/// observations of zeta + theta (or zeta alone for the noiseless variants).
///
/// Conventions. A stationary block sequence zeta_j = int e^{ij lambda} Z(d lambda)
/// with E Z Z^* = f d lambda / 2pi. An estimate is int h^T Z^{zeta+theta}, so
/// the lag-j Fourier coefficient of h multiplies the observation at block j.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "error.hpp"
#include "lift.hpp"
#include "linalg.hpp"
#include "spectral.hpp"

namespace pcwk {

enum class Task { interpolation, extrapolation, extrapolation_finite, filtering };

inline const char* to_string(Task t) {
    switch (t) {
    case Task::interpolation: return "interpolation";
    case Task::extrapolation: return "extrapolation";
    case Task::extrapolation_finite: return "extrapolation_finite";
    case Task::filtering: return "filtering";
    }
    return "?";
}

enum class BlockKind { B, D, R, U, V, W };

struct BlockMatrix {
    BlockKind kind = BlockKind::B;
    int dim = 1;
    int row_begin = 0, row_end = 0; // inclusive block index ranges
    int col_begin = 0, col_end = 0;
    Mat dense;

    Mat block(int row, int col) const {
        return dense.block((row - row_begin) * dim, (col - col_begin) * dim, dim, dim);
    }
};

struct SolverOptions {
    double cond_threshold = default_cond_threshold;
    int truncation = 0;             // 0 = automatic doubling
    double truncation_tol = 1e-8;   // mse change that stops the doubling
};

struct EstimateSolution {
    Task task = Task::interpolation;
    int dim = 1;
    std::vector<Vec> h_grid;        // h(e^{i lambda_g})
    std::vector<Vec> h_coeffs;      // lags -coeff_lag..coeff_lag
    int coeff_lag = 0;
    std::vector<Vec> solved_blocks; // c_j, d_j or (Ad)_l
    int solved_first = 0;           // block index of solved_blocks.front()
    double mse = 0.0;
    int truncation = 0;
    bool truncation_converged = true;
    SolveDiagnostics solve;

    int grid_size() const { return static_cast<int>(h_grid.size()); }

    const Vec& h_coeff(int lag) const { return h_coeffs.at(lag + coeff_lag); }
};

namespace detail {

/// values[g] = sum_j blocks[j] e^{i sign (first + j) lambda_g}.
inline std::vector<Vec> vector_series_on_grid(const std::vector<Vec>& blocks, int first, int sign,
                                              int dim, int grid) {
    std::vector<Vec> out(grid, Vec::Zero(dim));
    if (blocks.empty()) return out;
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    std::vector<cplx> series(grid), values(grid);
    for (int k = 0; k < dim; ++k) {
        std::fill(series.begin(), series.end(), cplx{0.0, 0.0});
        for (std::size_t j = 0; j < blocks.size(); ++j) {
            const int m = sign * (first + static_cast<int>(j));
            const int slot = ((m % grid) + grid) % grid;
            series[slot] += (m % 2 == 0 ? 1.0 : -1.0) * blocks[j][k];
        }
        fft.inv(values, series);
        for (int g = 0; g < grid; ++g) out[g][k] = values[g];
    }
    return out;
}

inline std::vector<Vec> vector_coefficients(const std::vector<Vec>& values, int max_lag) {
    const int grid = static_cast<int>(values.size());
    const int dim = static_cast<int>(values.front().size());
    std::vector<Vec> out(2 * max_lag + 1, Vec::Zero(dim));
    Eigen::FFT<double> fft;
    std::vector<cplx> series(grid), spectrum(grid);
    for (int k = 0; k < dim; ++k) {
        for (int g = 0; g < grid; ++g) series[g] = values[g][k];
        fft.fwd(spectrum, series);
        for (int j = -max_lag; j <= max_lag; ++j) {
            const int slot = ((j % grid) + grid) % grid;
            out[j + max_lag][k] = (j % 2 == 0 ? 1.0 : -1.0) * spectrum[slot] / double(grid);
        }
    }
    return out;
}

/// Task functional A(e^{i lambda}) on the grid: sum_j a_j e^{ij lambda}, or
/// sum_j a_j e^{-ij lambda} for filtering.
inline std::vector<Vec> functional_on_grid(const FunctionalWeights& w, Task task, int grid) {
    return vector_series_on_grid(w.blocks, 0, task == Task::filtering ? -1 : 1, w.dim(), grid);
}

inline void check_inputs(const SpectralDensity& f, const std::optional<SpectralDensity>& g,
                         const FunctionalWeights& w) {
    w.validate();
    if (w.dim() != f.dim)
        fail(ErrorKind::invalid_argument, "weights have K=" + std::to_string(w.dim()) +
                                              " but density has K=" + std::to_string(f.dim));
    if (g && (g->dim != f.dim || g->grid_size != f.grid_size))
        fail(ErrorKind::invalid_argument, "noise density differs from signal density in K or grid");
}

} // namespace detail

/// Grid values of f, g and the pointwise kernels whose Fourier coefficients
/// fill the block matrices: S = (f+g)^{-1}, f S, f S g (transposed as the
/// element formulas require).
class SpectralKernels {
public:
    SpectralKernels(const GridMatrixFunction& f, const std::optional<GridMatrixFunction>& g,
                    double cond_threshold = default_cond_threshold)
        : f_(f), g_(g) {
        const GridMatrixFunction total = g ? f + *g : f;
        inv_ = hermitian_inverse(total, cond_threshold);
        f_inv_ = f * inv_;
        if (g) f_inv_g_ = f_inv_ * *g;
        else f_inv_g_ = GridMatrixFunction(f.dim, f.grid_size());
    }

    SpectralKernels(const SpectralDensity& f, const std::optional<SpectralDensity>& g,
                    double cond_threshold = default_cond_threshold)
        : SpectralKernels(evaluate_on_grid(f),
                          g ? std::optional<GridMatrixFunction>(evaluate_on_grid(*g)) : std::nullopt,
                          cond_threshold) {}

    int dim() const { return f_.dim; }
    int grid_size() const { return f_.grid_size(); }
    bool noisy() const { return g_.has_value(); }
    const GridMatrixFunction& f() const { return f_; }
    const std::optional<GridMatrixFunction>& g() const { return g_; }
    const GridMatrixFunction& inverse() const { return inv_; }

    /// Prepares Fourier coefficients up to |lag| <= max_lag.
    void prepare(int max_lag) {
        if (max_lag <= prepared_) return;
        coef_inv_ = fourier_coefficients(transposed(inv_), max_lag);
        coef_f_inv_ = fourier_coefficients(transposed(f_inv_), max_lag);
        coef_f_inv_g_ = fourier_coefficients(transposed(f_inv_g_), max_lag);
        prepared_ = max_lag;
    }

    int max_prepared_lag() const { return prepared_; }

    /// Block (row, col) of the given kind.
    Mat block(BlockKind kind, int row, int col) {
        int lag = 0;
        switch (kind) {
        case BlockKind::B:
        case BlockKind::D:
        case BlockKind::R:
        case BlockKind::U: lag = row - col; break;
        case BlockKind::V: lag = row + col; break;
        case BlockKind::W: lag = col - row; break;
        }
        if (std::abs(lag) > prepared_) prepare(std::min(std::abs(lag) * 2, grid_size() / 2 - 1));
        if (std::abs(lag) > prepared_)
            fail(ErrorKind::aliasing, "block lag " + std::to_string(lag) + " exceeds G/2");
        switch (kind) {
        case BlockKind::B:
        case BlockKind::U: return coef_inv_[lag + prepared_];
        case BlockKind::D:
        case BlockKind::V: return coef_f_inv_[lag + prepared_];
        case BlockKind::R:
        case BlockKind::W: return coef_f_inv_g_[lag + prepared_];
        }
        return Mat();
    }

    BlockMatrix build(BlockKind kind, int row_begin, int row_end, int col_begin, int col_end) {
        BlockMatrix out;
        out.kind = kind;
        out.dim = dim();
        out.row_begin = row_begin;
        out.row_end = row_end;
        out.col_begin = col_begin;
        out.col_end = col_end;
        const int rows = row_end - row_begin + 1;
        const int cols = col_end - col_begin + 1;
        if (rows <= 0 || cols <= 0) {
            out.dense = Mat::Zero(std::max(rows, 0) * dim(), std::max(cols, 0) * dim());
            return out;
        }
        out.dense = assemble_blocks(rows, cols, dim(), [&](int r, int c) {
            return block(kind, r + row_begin, c + col_begin);
        });
        return out;
    }

private:
    GridMatrixFunction f_;
    std::optional<GridMatrixFunction> g_;
    GridMatrixFunction inv_, f_inv_, f_inv_g_;
    std::vector<Mat> coef_inv_, coef_f_inv_, coef_f_inv_g_;
    int prepared_ = -1;
};

/// Block (l, j) is the Fourier coefficient of the kind's integrand:
/// B, U: [(f+g)^{-1}]^T;  D, V: [f (f+g)^{-1}]^T;  R, W: [f (f+g)^{-1} g]^T.
/// Without g the B kind uses f^{-1}.
inline BlockMatrix build_block_matrix(BlockKind kind, const SpectralDensity& f,
                                      const std::optional<SpectralDensity>& g, int row_begin,
                                      int row_end, int col_begin, int col_end,
                                      double cond_threshold = default_cond_threshold) {
    SpectralKernels kernels(f, g, cond_threshold);
    return kernels.build(kind, row_begin, row_end, col_begin, col_end);
}

/// Quadrature of the mean square error of an arbitrary characteristic h:
/// (1/2pi) int (A-h)^T f conj(A-h) + h^T g conj(h).
inline double evaluate_mse(const std::vector<Vec>& h_grid, const GridMatrixFunction& f,
                           const std::optional<GridMatrixFunction>& g,
                           const FunctionalWeights& w, Task task) {
    const int grid = f.grid_size();
    if (static_cast<int>(h_grid.size()) != grid)
        fail(ErrorKind::invalid_argument, "evaluate_mse: h is on a different grid");
    const auto a = detail::functional_on_grid(w, task, grid);
    double acc = 0.0;
    for (int n = 0; n < grid; ++n) {
        const Vec e = a[n] - h_grid[n];
        acc += (e.transpose() * f[n] * e.conjugate())(0, 0).real();
        if (g) acc += (h_grid[n].transpose() * (*g)[n] * h_grid[n].conjugate())(0, 0).real();
    }
    return acc / grid;
}

inline double evaluate_mse(const std::vector<Vec>& h_grid, const SpectralDensity& f,
                           const std::optional<SpectralDensity>& g, const FunctionalWeights& w,
                           Task task) {
    return evaluate_mse(h_grid, evaluate_on_grid(f),
                        g ? std::optional<GridMatrixFunction>(evaluate_on_grid(*g)) : std::nullopt,
                        w, task);
}

namespace detail {

inline void finish_solution(EstimateSolution& s) {
    const int grid = s.grid_size();
    s.coeff_lag = grid / 4;
    s.h_coeffs = vector_coefficients(s.h_grid, s.coeff_lag);
}

/// Interpolation of the gap {0..N}.
inline EstimateSolution interpolate_with(SpectralKernels& kernels, const FunctionalWeights& w,
                                         const SolverOptions& opt) {
    const int k = kernels.dim();
    const int n = w.size() - 1;
    const int grid = kernels.grid_size();
    kernels.prepare(std::min(2 * n + 2, grid / 2 - 1));
    const Vec a = w.stacked(n + 1);

    EstimateSolution s;
    s.task = Task::interpolation;
    s.dim = k;
    s.truncation = n;
    const Mat b = kernels.build(BlockKind::B, 0, n, 0, n).dense;
    Vec c;
    if (kernels.noisy()) {
        const Mat d = kernels.build(BlockKind::D, 0, n, 0, n).dense;
        const Mat r = kernels.build(BlockKind::R, 0, n, 0, n).dense;
        c = hermitian_solve(b, d * a, opt.cond_threshold, &s.solve, "interpolation matrix B_N");
        s.mse = (a.dot(r * a)).real() + (c.dot(b * c)).real();
    } else {
        c = hermitian_solve(b, a, opt.cond_threshold, &s.solve, "interpolation matrix B_N");
        s.mse = c.dot(a).real();
    }
    for (int j = 0; j <= n; ++j) s.solved_blocks.push_back(c.segment(j * k, k));
    s.solved_first = 0;

    const auto a_grid = functional_on_grid(w, Task::interpolation, grid);
    const auto c_grid = vector_series_on_grid(s.solved_blocks, 0, 1, k, grid);
    s.h_grid.resize(grid);
    for (int g = 0; g < grid; ++g) {
        const Mat& inv = kernels.inverse()[g];
        if (kernels.noisy()) {
            const Mat& gm = (*kernels.g())[g];
            s.h_grid[g] = a_grid[g] - inv.transpose() * (gm.transpose() * a_grid[g] + c_grid[g]);
        } else {
            s.h_grid[g] = a_grid[g] - inv.transpose() * c_grid[g];
        }
    }
    finish_solution(s);
    return s;
}

/// Extrapolation with the infinite system truncated to blocks 0..J.
inline EstimateSolution extrapolate_fixed(SpectralKernels& kernels, const FunctionalWeights& w,
                                          int trunc, const SolverOptions& opt) {
    const int k = kernels.dim();
    const int ja = std::max(w.last_nonzero(), 0);
    const int grid = kernels.grid_size();
    if (trunc + ja >= grid / 2)
        fail(ErrorKind::aliasing, "truncation J=" + std::to_string(trunc) + " too large for grid");
    kernels.prepare(std::min(2 * (trunc + ja + 1), grid / 2 - 1));
    const Vec a = w.stacked(ja + 1);

    EstimateSolution s;
    s.task = Task::extrapolation;
    s.dim = k;
    s.truncation = trunc;
    const Mat b = kernels.build(BlockKind::B, 0, trunc, 0, trunc).dense;
    Vec c;
    if (kernels.noisy()) {
        const Mat d = kernels.build(BlockKind::D, 0, trunc, 0, ja).dense;
        const Mat r = kernels.build(BlockKind::R, 0, ja, 0, ja).dense;
        c = hermitian_solve(b, d * a, opt.cond_threshold, &s.solve,
                            "truncated extrapolation matrix B (increase truncation?)");
        s.mse = (a.dot(r * a)).real() + (c.dot(b * c)).real();
    } else {
        Vec padded = Vec::Zero((trunc + 1) * k);
        padded.head(a.size()) = a;
        c = hermitian_solve(b, padded, opt.cond_threshold, &s.solve,
                            "truncated extrapolation matrix B (increase truncation?)");
        s.mse = c.dot(padded).real();
    }
    for (int j = 0; j <= trunc; ++j) s.solved_blocks.push_back(c.segment(j * k, k));
    s.solved_first = 0;

    const auto a_grid = functional_on_grid(w, Task::extrapolation, grid);
    const auto c_grid = vector_series_on_grid(s.solved_blocks, 0, 1, k, grid);
    s.h_grid.resize(grid);
    for (int g = 0; g < grid; ++g) {
        const Mat& inv = kernels.inverse()[g];
        if (kernels.noisy()) {
            const Mat& gm = (*kernels.g())[g];
            s.h_grid[g] = a_grid[g] - inv.transpose() * (gm.transpose() * a_grid[g] + c_grid[g]);
        } else {
            s.h_grid[g] = a_grid[g] - inv.transpose() * c_grid[g];
        }
    }
    return s;
}

/// Filtering with d over blocks 1..J.
inline EstimateSolution filter_fixed(SpectralKernels& kernels, const FunctionalWeights& w,
                                     int trunc, const SolverOptions& opt) {
    const int k = kernels.dim();
    const int ja = std::max(w.last_nonzero(), 0);
    const int grid = kernels.grid_size();
    if (trunc + ja >= grid / 2)
        fail(ErrorKind::aliasing, "truncation J=" + std::to_string(trunc) + " too large for grid");
    kernels.prepare(std::min(2 * (trunc + ja + 1), grid / 2 - 1));
    const Vec a = w.stacked(ja + 1);

    EstimateSolution s;
    s.task = Task::filtering;
    s.dim = k;
    s.truncation = trunc;
    const Mat u = kernels.build(BlockKind::U, 1, trunc, 1, trunc).dense;
    const Mat v = kernels.build(BlockKind::V, 1, trunc, 0, ja).dense;
    const Mat wm = kernels.build(BlockKind::W, 0, ja, 0, ja).dense;
    const Vec d = hermitian_solve(u, v * a, opt.cond_threshold, &s.solve,
                                  "truncated filtering matrix U (increase truncation?)");
    s.mse = (a.dot(wm * a)).real() + (d.dot(u * d)).real();
    for (int j = 1; j <= trunc; ++j) s.solved_blocks.push_back(d.segment((j - 1) * k, k));
    s.solved_first = 1;

    const auto a_grid = functional_on_grid(w, Task::filtering, grid);
    const auto d_grid = vector_series_on_grid(s.solved_blocks, 1, 1, k, grid);
    s.h_grid.resize(grid);
    for (int g = 0; g < grid; ++g) {
        const Mat& inv = kernels.inverse()[g];
        const Mat gm = kernels.g() ? Mat((*kernels.g())[g]) : Mat::Zero(k, k);
        s.h_grid[g] = a_grid[g] - inv.transpose() * (gm.transpose() * a_grid[g] + d_grid[g]);
    }
    return s;
}

/// Runs a truncated solver with the doubling rule: start at
/// max(64, 4 * last nonzero weight) and double until the mse settles.
template <class Solver>
EstimateSolution with_truncation(SpectralKernels& kernels, const FunctionalWeights& w,
                                 const SolverOptions& opt, Solver&& solve) {
    const int ja = std::max(w.last_nonzero(), 0);
    const int cap = kernels.grid_size() / 4;
    if (opt.truncation > 0) {
        auto s = solve(kernels, w, opt.truncation, opt);
        finish_solution(s);
        return s;
    }
    int trunc = std::min(std::max(64, 4 * ja), cap);
    auto s = solve(kernels, w, trunc, opt);
    s.truncation_converged = false;
    while (2 * trunc <= cap) {
        auto next = solve(kernels, w, 2 * trunc, opt);
        const double change = std::abs(next.mse - s.mse);
        s = std::move(next);
        trunc *= 2;
        if (change <= opt.truncation_tol * std::max(1.0, std::abs(s.mse))) {
            s.truncation_converged = true;
            break;
        }
    }
    finish_solution(s);
    return s;
}

} // namespace detail

/// c_N = B_N^{-1} D_N a_N and mse <a,Ra> + <c,Bc>; noiseless when g is absent.
inline EstimateSolution interpolate(const SpectralDensity& f, const std::optional<SpectralDensity>& g,
                                    const FunctionalWeights& w, const SolverOptions& opt = {}) {
    detail::check_inputs(f, g, w);
    SpectralKernels kernels(f, g, opt.cond_threshold);
    return detail::interpolate_with(kernels, w, opt);
}

/// c_N = B_N^{-1} a_N with B from f^{-1}; mse = <c_N, a_N>.
inline EstimateSolution interpolate_noiseless(const SpectralDensity& f, const FunctionalWeights& w,
                                              const SolverOptions& opt = {}) {
    return interpolate(f, std::nullopt, w, opt);
}

inline EstimateSolution extrapolate(const SpectralDensity& f, const std::optional<SpectralDensity>& g,
                                    const FunctionalWeights& w, const SolverOptions& opt = {}) {
    detail::check_inputs(f, g, w);
    SpectralKernels kernels(f, g, opt.cond_threshold);
    return detail::with_truncation(kernels, w, opt, detail::extrapolate_fixed);
}

inline EstimateSolution extrapolate_noiseless(const SpectralDensity& f, const FunctionalWeights& w,
                                              const SolverOptions& opt = {}) {
    return extrapolate(f, std::nullopt, w, opt);
}

/// d = U^{-1} V a over blocks 1..J; mse <a,Wa> + <d,Ud>. An absent g means
/// noiseless observation of zeta (the estimate is then exact).
inline EstimateSolution filter(const SpectralDensity& f, const std::optional<SpectralDensity>& g,
                               const FunctionalWeights& w, const SolverOptions& opt = {}) {
    detail::check_inputs(f, g, w);
    SpectralKernels kernels(f, g, opt.cond_threshold);
    return detail::with_truncation(kernels, w, opt, detail::filter_fixed);
}

inline EstimateSolution filter(SpectralKernels& kernels, const FunctionalWeights& w,
                               const SolverOptions& opt = {}) {
    w.validate();
    if (w.dim() != kernels.dim()) fail(ErrorKind::invalid_argument, "filter: K mismatch");
    return detail::with_truncation(kernels, w, opt, detail::filter_fixed);
}

/// Lags on which h must vanish for the task: {0..N}, {>=0} or {>=1}.
inline bool is_forbidden_lag(Task task, int lag, int horizon_n) {
    switch (task) {
    case Task::interpolation: return lag >= 0 && lag <= horizon_n;
    case Task::extrapolation:
    case Task::extrapolation_finite: return lag >= 0;
    case Task::filtering: return lag >= 1;
    }
    return false;
}

/// Largest |coefficient| of h over the forbidden lags within the stored
/// window, relative to max(1, max_j ||a_j||).
inline double forbidden_lag_violation(const EstimateSolution& s, const FunctionalWeights& w) {
    double scale = 1.0;
    for (const auto& b : w.blocks) scale = std::max(scale, b.norm());
    double worst = 0.0;
    for (int lag = -s.coeff_lag; lag <= s.coeff_lag; ++lag)
        if (is_forbidden_lag(s.task, lag, w.horizon_n()))
            worst = std::max(worst, s.h_coeff(lag).norm());
    return worst / scale;
}

} // namespace pcwk

#endif // PCWK_ESTIMATORS_HPP
