#ifndef PCWK_ORACLE_HPP
#define PCWK_ORACLE_HPP

/// @file
/// Time-domain reference computations: covariance tables, brute-force
/// projection onto a finite observation window, simulation of moving-average
/// paths and comparison against the spectral-domain results.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "estimators.hpp"
#include "factorization.hpp"
#include "lift.hpp"
#include "random.hpp"
#include "spectral.hpp"

namespace pcwk {

/// R(j) = E zeta_{t+j} zeta_t^* for |j| <= max_lag.
struct CovarianceTable {
    int dim = 1;
    int max_lag = 0;
    std::vector<Mat> r;

    const Mat& at(int j) const { return r.at(j + max_lag); }
};

/// R(j) = (1/2pi) int e^{ij lambda} f(lambda) d lambda, i.e. F(-j).
inline CovarianceTable covariances_from_density(const SpectralDensity& f, int max_lag) {
    if (max_lag < 0 || 2 * max_lag >= f.grid_size)
        fail(ErrorKind::aliasing, "covariance lag " + std::to_string(max_lag) +
                                      " not below G/2 = " + std::to_string(f.grid_size / 2));
    CovarianceTable t;
    t.dim = f.dim;
    t.max_lag = max_lag;
    const auto c = fourier_coefficients(evaluate_on_grid(f), max_lag);
    for (int j = -max_lag; j <= max_lag; ++j) t.r.push_back(c[-j + max_lag]);
    return t;
}

struct ProjectionResult {
    double mse = 0.0;
    int window = 0;
    int observations = 0;   // number of observed blocks
    double rcond = 0.0;
};

namespace detail {

/// Blocks observed by the oracle for a task and window W.
inline std::vector<int> observation_set(Task task, int horizon_n, int window) {
    std::vector<int> t;
    switch (task) {
    case Task::interpolation:
        for (int j = -window; j <= -1; ++j) t.push_back(j);
        for (int j = horizon_n + 1; j <= horizon_n + window; ++j) t.push_back(j);
        break;
    case Task::extrapolation:
    case Task::extrapolation_finite:
        for (int j = -window; j <= -1; ++j) t.push_back(j);
        break;
    case Task::filtering:
        for (int j = -window; j <= 0; ++j) t.push_back(j);
        break;
    }
    return t;
}

} // namespace detail

/// Solves the normal equations of the projection of sum_j a_j^T zeta_{t_j}
/// onto the observations zeta + theta on the task's window (t_j = j, or -j for
/// filtering). Covariances come straight from the coefficient maps.
inline ProjectionResult time_domain_projection(Task task, const SpectralDensity& f,
                                               const std::optional<SpectralDensity>& g,
                                               const FunctionalWeights& w, int window) {
    w.validate();
    if (w.dim() != f.dim || (g && g->dim != f.dim))
        fail(ErrorKind::invalid_argument, "oracle: dimension mismatch");
    if (window < 1) fail(ErrorKind::invalid_argument, "oracle: window must be >= 1");
    const int k = f.dim;
    ProjectionResult res;
    res.window = window;
    if (w.is_zero()) return res;

    auto lagged = [&](int m, bool with_noise) {
        Mat out = f.coeff(m);
        if (with_noise && g) out += g->coeff(m);
        return out;
    };
    // E x_s x_t^* = F(t - s) for x = zeta (+ theta).
    const int ja = w.last_nonzero();
    std::vector<int> target;
    for (int j = 0; j <= ja; ++j) target.push_back(task == Task::filtering ? -j : j);
    const auto obs = detail::observation_set(task, w.horizon_n(), window);
    res.observations = static_cast<int>(obs.size());

    const int n = static_cast<int>(obs.size());
    Mat cov(n * k, n * k);
    for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t) cov.block(s * k, t * k, k, k) = lagged(obs[t] - obs[s], true);
    Vec cross = Vec::Zero(n * k);
    for (int s = 0; s < n; ++s)
        for (int j = 0; j <= ja; ++j)
            cross.segment(s * k, k) += lagged(target[j] - obs[s], false) * w.blocks[j].conjugate();
    double var = 0.0;
    for (int j = 0; j <= ja; ++j)
        for (int l = 0; l <= ja; ++l)
            var += (w.blocks[j].transpose() * lagged(target[l] - target[j], false) *
                    w.blocks[l].conjugate())(0, 0).real();

    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success)
        fail(ErrorKind::ill_posed, "oracle: observation covariance is singular (no regularization applied)");
    Eigen::LDLT<Mat> ldlt(cov);
    res.rcond = ldlt.rcond();
    if (!(res.rcond > 1e-14))
        fail(ErrorKind::ill_posed, "oracle: observation covariance is ill-conditioned (no regularization applied)");
    const Vec x = llt.solve(cross);
    res.mse = var - cross.dot(x).real();
    return res;
}

struct OracleConvergence {
    ProjectionResult result;
    bool converged = false;
};

/// Doubles the window from start_window until the mse changes by less than
/// rel_tol (relative), up to max_window.
inline OracleConvergence converged_projection(Task task, const SpectralDensity& f,
                                              const std::optional<SpectralDensity>& g,
                                              const FunctionalWeights& w, double rel_tol = 1e-10,
                                              int start_window = 16, int max_window = 512) {
    OracleConvergence out;
    out.result = time_domain_projection(task, f, g, w, start_window);
    for (int window = 2 * start_window; window <= max_window; window *= 2) {
        const auto next = time_domain_projection(task, f, g, w, window);
        const double change = std::abs(next.mse - out.result.mse);
        out.result = next;
        if (change <= rel_tol * std::max(std::abs(next.mse), 1e-300)) {
            out.converged = true;
            break;
        }
    }
    if (w.is_zero()) out.converged = true;
    return out;
}

/// zeta_j = sum_u d(u) eps(j - u) with circular complex Gaussian innovations
/// of identity covariance; U_max warm-up innovations are discarded.
inline std::vector<Vec> simulate_sequence(const Factorization& p, int n_blocks, std::uint64_t seed) {
    if (n_blocks < 0) fail(ErrorKind::invalid_argument, "simulate: n_blocks must be >= 0");
    const int k = p.dim;
    const int u_max = p.max_lag();
    Rng rng(seed);
    std::vector<Vec> eps(static_cast<std::size_t>(n_blocks + u_max), Vec::Zero(k));
    for (auto& e : eps)
        for (int i = 0; i < k; ++i) e[i] = rng.complex_normal();
    std::vector<Vec> path(n_blocks, Vec::Zero(k));
    for (int j = 0; j < n_blocks; ++j)
        for (int u = 0; u <= u_max; ++u) path[j] += p.d[u] * eps[j + u_max - u];
    return path;
}

/// Sample mean of |X_t - hat X_t|^2 over simulated paths, where hat X_t uses the
/// coefficients of h on allowed lags with |lag| <= max_lag.
inline double empirical_mse(const EstimateSolution& s, const FunctionalWeights& w,
                            const Factorization& signal, const std::optional<Factorization>& noise,
                            int n_blocks, std::uint64_t seed, int max_lag = 64) {
    max_lag = std::min(max_lag, s.coeff_lag);
    const int ja = std::max(w.last_nonzero(), 0);
    const int pad = max_lag + ja + 1;
    const auto zeta = simulate_sequence(signal, n_blocks + 2 * pad, derive_seed(seed, 0));
    std::vector<Vec> y = zeta;
    if (noise) {
        const auto theta = simulate_sequence(*noise, n_blocks + 2 * pad, derive_seed(seed, 1));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += theta[i];
    }
    const int sign = s.task == Task::filtering ? -1 : 1;
    double acc = 0.0;
    for (int t = pad; t < pad + n_blocks; ++t) {
        cplx x{0.0, 0.0};
        for (int j = 0; j <= ja; ++j) x += w.blocks[j].cwiseProduct(zeta[t + sign * j]).sum();
        cplx est{0.0, 0.0};
        for (int lag = -max_lag; lag <= max_lag; ++lag) {
            if (is_forbidden_lag(s.task, lag, w.horizon_n())) continue;
            est += s.h_coeff(lag).cwiseProduct(y[t + lag]).sum();
        }
        acc += std::norm(x - est);
    }
    return acc / n_blocks;
}

struct CompareReport {
    double spectral_mse = 0.0;
    double oracle_mse = 0.0;
    double abs_diff = 0.0;
    double rel_diff = 0.0;
    double tolerance = 1e-5;
    bool pass = false;
};

inline CompareReport compare_report(double spectral_mse, double oracle_mse, double rel_tol = 1e-5) {
    CompareReport r;
    r.spectral_mse = spectral_mse;
    r.oracle_mse = oracle_mse;
    r.tolerance = rel_tol;
    r.abs_diff = std::abs(spectral_mse - oracle_mse);
    double scale = std::min(std::abs(oracle_mse), std::abs(spectral_mse));
    if (!(scale > 0.0)) scale = std::max(std::abs(oracle_mse), std::abs(spectral_mse));
    r.rel_diff = scale > 0.0 ? r.abs_diff / scale : 0.0;
    r.pass = r.rel_diff <= rel_tol;
    return r;
}

inline CompareReport compare_report(const EstimateSolution& s, double oracle_mse, double rel_tol = 1e-5) {
    return compare_report(s.mse, oracle_mse, rel_tol);
}

} // namespace pcwk

#endif // PCWK_ORACLE_HPP
