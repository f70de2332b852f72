#ifndef PCWK_FACTORIZATION_HPP
#define PCWK_FACTORIZATION_HPP

/// @file
/// Canonical factorization f = P P^*, P(lambda) = sum_{u>=0} d(u) e^{-iu lambda},
/// by Wilson's Newton iteration on the frequency grid, and the
/// factorization route to extrapolation.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "estimators.hpp"
#include "lift.hpp"
#include "spectral.hpp"

namespace pcwk {

struct FactorizationOptions {
    double tol = 1e-10;
    int max_iter = 100;
    double cond_threshold = default_cond_threshold;
};

struct Factorization {
    int dim = 1;
    int grid_size = default_grid_size;
    std::vector<Mat> d;     // d(0), d(1), ..., d(U_max)
    double residual = 0.0;  // max over grid of |P P^* - f| entries
    int iterations = 0;

    int max_lag() const { return static_cast<int>(d.size()) - 1; }

    /// P(lambda_g) on the grid.
    GridMatrixFunction factor_on_grid() const {
        std::map<int, Mat> c;
        for (int u = 0; u <= max_lag(); ++u) c[-u] = d[u];
        return evaluate_series_on_grid(c, dim, dim, grid_size);
    }

    /// Coefficients of P P^*: F(m) = sum_u d(u) d(u+m)^*.
    SpectralDensity density() const { return SpectralDensity::from_moving_average(d, grid_size); }
};

namespace detail {

inline double grid_max_abs_diff(const GridMatrixFunction& a, const GridMatrixFunction& b) {
    double out = 0.0;
    for (int g = 0; g < a.grid_size(); ++g)
        out = std::max(out, (a[g] - b[g]).cwiseAbs().maxCoeff());
    return out;
}

inline GridMatrixFunction outer_product(const GridMatrixFunction& p) {
    GridMatrixFunction out(p.dim, p.grid_size());
    for (int g = 0; g < p.grid_size(); ++g) out[g] = p[g] * p[g].adjoint();
    return out;
}

} // namespace detail

inline Factorization spectral_factorize(const SpectralDensity& f, const FactorizationOptions& opt = {}) {
    const auto fg = evaluate_on_grid(f);
    const int k = f.dim;
    const int grid = fg.grid_size();
    for (int g = 0; g < grid; ++g) {
        const auto [lo, hi] = hermitian_eig_range(fg[g]);
        if (!(lo > 0.0) || hi / lo > opt.cond_threshold)
            fail(ErrorKind::unsupported,
                 "spectral_factorize: density is rank-deficient or singular at grid node " +
                     std::to_string(g) + "; only full-rank factorization is supported "
                     "(possibly non-regular input)");
    }
    const Mat f0 = 0.5 * (f.coeff(0) + f.coeff(0).adjoint());
    Eigen::LLT<Mat> llt(f0);
    if (llt.info() != Eigen::Success)
        fail(ErrorKind::unsupported, "spectral_factorize: zero-lag coefficient not positive definite");

    const Mat ident = Mat::Identity(k, k);
    GridMatrixFunction psi = GridMatrixFunction::constant(Mat(llt.matrixL()), grid);
    const int max_lag = grid / 2 - 1;
    Factorization out;
    out.dim = k;
    out.grid_size = grid;
    double residual = detail::grid_max_abs_diff(detail::outer_product(psi), fg);
    int iter = 0;
    while (residual > opt.tol && iter < opt.max_iter) {
        GridMatrixFunction gfun(k, grid);
        for (int g = 0; g < grid; ++g) {
            const Mat inv = psi[g].inverse();
            gfun[g] = inv * fg[g] * inv.adjoint() + ident;
        }
        const auto c = fourier_coefficients(gfun, max_lag);
        std::map<int, Mat> plus;
        Mat c0 = c[max_lag];
        Mat lower = c0.triangularView<Eigen::StrictlyLower>();
        lower.diagonal() = 0.5 * c0.diagonal().real().cast<cplx>();
        plus[0] = lower;
        for (int j = -max_lag; j < 0; ++j) plus[j] = c[j + max_lag];
        const auto x = evaluate_series_on_grid(plus, k, k, grid);
        for (int g = 0; g < grid; ++g) psi[g] = (psi[g] * x[g]).eval();
        residual = detail::grid_max_abs_diff(detail::outer_product(psi), fg);
        ++iter;
    }
    if (!(residual <= opt.tol))
        fail(ErrorKind::convergence, "spectral_factorize: no convergence after " +
                                         std::to_string(iter) + " iterations (residual " +
                                         std::to_string(residual) + ")");

    const auto coeffs = fourier_coefficients(psi, max_lag);
    double scale = 0.0;
    for (int u = 0; u <= max_lag; ++u) scale = std::max(scale, coeffs[max_lag - u].cwiseAbs().maxCoeff());
    int keep = max_lag;
    while (keep > 0 && coeffs[max_lag - keep].cwiseAbs().maxCoeff() <= 1e-15 * scale) --keep;
    for (int u = 0; u <= keep; ++u) out.d.push_back(coeffs[max_lag - u]);
    // Exact zeros above the diagonal of d(0).
    out.d[0] = out.d[0].triangularView<Eigen::Lower>();
    out.iterations = iter;
    out.residual = detail::grid_max_abs_diff(detail::outer_product(out.factor_on_grid()), fg);
    return out;
}

/// Q(lambda) with Q P = I on the grid; (P^* P)^{-1} P^* in general.
inline GridMatrixFunction left_inverse_Q(const Factorization& p,
                                         double cond_threshold = default_cond_threshold) {
    const auto pg = p.factor_on_grid();
    GridMatrixFunction q = pg;
    for (int g = 0; g < pg.grid_size(); ++g) {
        Eigen::JacobiSVD<Mat> svd(pg[g]);
        const auto& s = svd.singularValues();
        const double hi = s.maxCoeff();
        const double lo = s.minCoeff();
        if (!(lo > 0.0) || hi / lo > std::sqrt(cond_threshold))
            fail(ErrorKind::singular_factor,
                 "left inverse: factor singular at grid node " + std::to_string(g));
        if (pg[g].rows() == pg[g].cols()) q[g] = pg[g].inverse();
        else q[g] = (pg[g].adjoint() * pg[g]).inverse() * pg[g].adjoint();
    }
    return q;
}

/// Largest coefficient of Q on lags where a causal inverse must vanish.
inline double anticausal_defect(const GridMatrixFunction& q, int max_lag = -1) {
    if (max_lag < 0) max_lag = q.grid_size() / 4;
    const auto c = fourier_coefficients(q, max_lag);
    double out = 0.0;
    for (int j = 1; j <= max_lag; ++j) out = std::max(out, c[j + max_lag].norm());
    return out;
}

namespace detail {

inline EstimateSolution extrapolate_factorized_impl(const Factorization& p, const FunctionalWeights& w,
                                                    int last_block, Task task) {
    w.validate();
    if (w.dim() != p.dim) fail(ErrorKind::invalid_argument, "factorized extrapolation: K mismatch");
    const int k = p.dim;
    const int grid = p.grid_size;
    const int ja = std::min(std::max(w.last_nonzero(), 0), last_block);

    EstimateSolution s;
    s.task = task;
    s.dim = k;
    s.truncation = last_block;
    s.solved_first = 0;
    s.mse = 0.0;
    for (int l = 0; l <= ja; ++l) {
        Vec ad = Vec::Zero(k);  // (Ad)_l as a column, (Ad)_l^T = sum_j a_j^T d(j-l)
        for (int j = l; j <= ja; ++j) {
            const int u = j - l;
            if (u > p.max_lag()) break;
            ad += p.d[u].transpose() * w.blocks[j];
        }
        s.mse += ad.squaredNorm();
        s.solved_blocks.push_back(ad);
    }

    const auto q = left_inverse_Q(p);
    FunctionalWeights used = w;
    used.blocks.resize(ja + 1);
    const auto a_grid = functional_on_grid(used, Task::extrapolation, grid);
    const auto s_grid = vector_series_on_grid(s.solved_blocks, 0, 1, k, grid);
    s.h_grid.resize(grid);
    for (int g = 0; g < grid; ++g) s.h_grid[g] = a_grid[g] - q[g].transpose() * s_grid[g];
    finish_solution(s);
    return s;
}

} // namespace detail

/// mse = sum_l ||(Ad)_l||^2 with (Ad)_l = sum_{j>=l} a_j^T d(j-l); h^T = A^T - S Q.
inline EstimateSolution extrapolate_factorized(const Factorization& p, const FunctionalWeights& w,
                                               int truncation = 0) {
    const int last = truncation > 0 ? truncation : std::max(w.last_nonzero(), 0);
    return detail::extrapolate_factorized_impl(p, w, last, Task::extrapolation);
}

inline EstimateSolution extrapolate_factorized(const SpectralDensity& f, const FunctionalWeights& w,
                                               int truncation = 0,
                                               const FactorizationOptions& opt = {}) {
    return extrapolate_factorized(spectral_factorize(f, opt), w, truncation);
}

/// Finite functional sum_{j=0}^{N} a_j^T zeta_j.
inline EstimateSolution extrapolate_factorized_finite(const Factorization& p, const FunctionalWeights& w) {
    return detail::extrapolate_factorized_impl(p, w, w.horizon_n(), Task::extrapolation_finite);
}

inline EstimateSolution extrapolate_factorized_finite(const SpectralDensity& f, const FunctionalWeights& w,
                                                      const FactorizationOptions& opt = {}) {
    return extrapolate_factorized_finite(spectral_factorize(f, opt), w);
}

} // namespace pcwk

#endif // PCWK_FACTORIZATION_HPP
