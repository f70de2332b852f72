#ifndef PCWK_MINIMAX_HPP
#define PCWK_MINIMAX_HPP

/// @file
/// Least favorable densities and minimax-robust characteristics for the
/// classes Y, D_M^-, D_0^1 and D_0^2 x D_eps, and sampled saddle-point checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "estimators.hpp"
#include "factorization.hpp"
#include "lift.hpp"
#include "linalg.hpp"
#include "random.hpp"
#include "spectral.hpp"

namespace pcwk {

struct QOperator {
    int dim = 1;
    int blocks = 1;  // p, q = 0 .. blocks-1
    Mat dense;

    Mat block(int p, int q) const { return dense.block(p * dim, q * dim, dim, dim); }
};

/// Q(p,q)_{kn} = sum_s a_{k,s+p} conj(a_{n,s+q}) over blocks 0..last_block
/// (all stored blocks when last_block < 0).
inline QOperator build_q_operator(const FunctionalWeights& w, int last_block = -1) {
    w.validate();
    const int n = last_block < 0 ? w.size() - 1 : std::min(last_block, w.size() - 1);
    QOperator q;
    q.dim = w.dim();
    q.blocks = n + 1;
    const int k = q.dim;
    q.dense = Mat::Zero((n + 1) * k, (n + 1) * k);
    for (int p = 0; p <= n; ++p)
        for (int r = 0; r <= n; ++r) {
            Mat acc = Mat::Zero(k, k);
            for (int s = 0; s + std::max(p, r) <= n; ++s)
                acc += w.blocks[s + p] * w.blocks[s + r].adjoint();
            q.dense.block(p * k, r * k, k, k) = acc;
        }
    return q;
}

/// Named scalar diagnostics in a fixed order.
using Diagnostics = std::vector<std::pair<std::string, double>>;

struct LeastFavorableResult {
    std::string class_name;
    SpectralDensity f0;
    std::optional<SpectralDensity> g0;
    GridMatrixFunction f0_grid;
    std::optional<GridMatrixFunction> g0_grid;
    double minimax_mse = 0.0;
    std::optional<EstimateSolution> h0;
    bool certified = true;
    int iterations = 0;

    double nu2 = 0.0;                 // eigenvalue certificate
    std::vector<Mat> d;               // moving-average coefficients d(0..)
    std::vector<Vec> alpha;           // Lagrange vectors of D_M^-
    std::vector<Mat> p_table;         // P(0..) used for f0^{-1} in D_M^-
    std::vector<Mat> ar_coeffs;       // A_j with f0^{-1} = (sum A_j e^{-ij l})(...)^*
    double alpha2 = 0.0, beta2 = 0.0; // multipliers of the filtering classes
    std::vector<double> phi;          // phi(lambda_g)
    Diagnostics diagnostics;

    double diagnostic(const std::string& name) const {
        for (const auto& [k, v] : diagnostics)
            if (k == name) return v;
        fail(ErrorKind::invalid_argument, "no diagnostic named " + name);
    }
};

namespace detail {

inline Task task_of(const FunctionalWeights& w) {
    switch (w.horizon) {
    case Horizon::interpolation: return Task::interpolation;
    case Horizon::extrapolation: return Task::extrapolation;
    case Horizon::extrapolation_finite: return Task::extrapolation_finite;
    case Horizon::filtering: return Task::filtering;
    }
    return Task::extrapolation;
}

/// h^T = A^T - S Q for the moving average d (K x M blocks), with Q the
/// pointwise left inverse of P(lambda) = sum_u d(u) e^{-iu lambda}.
inline EstimateSolution moving_average_characteristic(const std::vector<Mat>& d,
                                                      const FunctionalWeights& w, int grid, Task task) {
    const int k = w.dim();
    const int m = static_cast<int>(d.front().cols());
    const int ja = std::max(w.last_nonzero(), 0);
    EstimateSolution s;
    s.task = task;
    s.dim = k;
    s.truncation = ja;
    for (int l = 0; l <= ja; ++l) {
        Vec ad = Vec::Zero(m);
        for (int j = l; j <= ja && j - l < static_cast<int>(d.size()); ++j)
            ad += d[j - l].transpose() * w.blocks[j];
        s.mse += ad.squaredNorm();
        s.solved_blocks.push_back(ad);
    }
    std::map<int, Mat> pc;
    for (std::size_t u = 0; u < d.size(); ++u) pc[-static_cast<int>(u)] = d[u];
    const auto pg = evaluate_series_on_grid(pc, k, m, grid);
    const auto a_grid = functional_on_grid(w, Task::extrapolation, grid);
    const auto s_grid = vector_series_on_grid(s.solved_blocks, 0, 1, m, grid);
    s.h_grid.resize(grid);
    for (int g = 0; g < grid; ++g) {
        const Mat gram = pg[g].adjoint() * pg[g];
        Eigen::LDLT<Mat> ldlt(gram);
        if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14))
            fail(ErrorKind::singular_factor,
                 "least favorable factor vanishes at grid node " + std::to_string(g));
        const Mat q = ldlt.solve(pg[g].adjoint());
        s.h_grid[g] = a_grid[g] - q.transpose() * s_grid[g];
    }
    finish_solution(s);
    return s;
}

struct TopEigen {
    double value = 0.0;
    Vec vector;
    double residual = 0.0;
};

inline TopEigen top_eigenpair(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    TopEigen t;
    const auto n = m.rows();
    t.value = es.eigenvalues()[n - 1];
    t.vector = es.eigenvectors().col(n - 1);
    t.residual = (m * t.vector - t.value * t.vector).norm();
    return t;
}

/// d(p) = sqrt(power) conj(v_p) as K x 1 blocks.
inline std::vector<Mat> eigenvector_factor(const Vec& v, int k, double power) {
    std::vector<Mat> d;
    const int blocks = static_cast<int>(v.size()) / k;
    for (int p = 0; p < blocks; ++p) d.push_back(std::sqrt(power) * v.segment(p * k, k).conjugate());
    return d;
}

inline double grid_mean_trace(const GridMatrixFunction& f) {
    double acc = 0.0;
    for (const auto& v : f.values) acc += v.trace().real();
    return acc / f.grid_size();
}

} // namespace detail

/// Class Y of per-period power P_zeta: nu^2 = top eigenvalue of Q, minimax
/// mse P_zeta nu^2 and the least favorable one-sided moving average.
inline LeastFavorableResult least_favorable_class_y(const FunctionalWeights& w, double p_zeta,
                                                    int last_block = -1,
                                                    int grid = default_grid_size) {
    if (!(p_zeta > 0.0)) fail(ErrorKind::invalid_argument, "class Y: P_zeta must be positive");
    const auto q = build_q_operator(w, last_block);
    const int k = q.dim;
    LeastFavorableResult r;
    r.class_name = "Y";
    const Task task = detail::task_of(w);
    if (w.is_zero()) {
        r.f0 = SpectralDensity::constant(Mat::Identity(k, k) * (p_zeta / k), grid);
        r.f0_grid = evaluate_on_grid(r.f0);
        r.d = {Mat::Identity(k, k) * std::sqrt(p_zeta / k)};
        r.diagnostics = {{"nu2", 0.0}, {"degenerate", 1.0}};
        return r;
    }
    const auto top = detail::top_eigenpair(q.dense);
    r.nu2 = top.value;
    r.minimax_mse = p_zeta * top.value;
    r.d = detail::eigenvector_factor(top.vector, k, p_zeta);
    r.f0 = SpectralDensity::from_moving_average(r.d, grid);
    r.f0_grid = evaluate_on_grid(r.f0);
    FunctionalWeights used = w;
    used.blocks.resize(q.blocks);
    r.h0 = detail::moving_average_characteristic(r.d, used, grid, task);
    r.diagnostics = {{"nu2", r.nu2},
                     {"eigen_residual", top.residual},
                     {"power", r.f0.power()},
                     {"h0_mse", r.h0->mse}};
    return r;
}

/// Class D_0^1 with (1/2pi) int f = P: the same eigen problem, scaled so the
/// total power is trace(P).
inline LeastFavorableResult least_favorable_d01_extrapolation(const FunctionalWeights& w, const Mat& p,
                                                              int last_block = -1,
                                                              int grid = default_grid_size) {
    if (p.rows() != p.cols() || p.rows() != w.dim())
        fail(ErrorKind::invalid_argument, "class D01: P must be K x K");
    if (detail::hermitian_defect(p) > 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff()))
        fail(ErrorKind::invalid_argument, "class D01: P must be Hermitian");
    const double power = p.trace().real();
    if (!(power > 0.0)) fail(ErrorKind::invalid_argument, "class D01: trace(P) must be positive");
    if (hermitian_eig_range(p).first < -psd_tolerance)
        fail(ErrorKind::invalid_argument, "class D01: P must be positive semidefinite");

    LeastFavorableResult r = least_favorable_class_y(w, power, last_block, grid);
    r.class_name = "D01";
    const int k = w.dim();
    Mat sum = Mat::Zero(k, k);
    for (const auto& m : r.d) sum += m * m.adjoint();
    // Eigen-system with the rank-one multiplier block read as nu^2:
    // sum_p conj(a_{r+p}) (Ad)_p = nu^2 d(r).
    double rel_eigen = 0.0;
    if (!w.is_zero()) {
        const int n = static_cast<int>(r.d.size()) - 1;
        double worst = 0.0, scale = 0.0;
        for (int row = 0; row <= n; ++row) {
            Vec lhs = Vec::Zero(k);
            for (int pp = 0; row + pp <= n; ++pp) {
                cplx ad{0.0, 0.0};
                for (int s = 0; s + pp <= n; ++s) ad += (w.blocks[s + pp].transpose() * r.d[s])(0, 0);
                lhs += w.blocks[row + pp].conjugate() * ad;
            }
            worst = std::max(worst, (lhs - r.nu2 * r.d[row].col(0)).norm());
            scale = std::max(scale, lhs.norm());
        }
        rel_eigen = scale > 0.0 ? worst / scale : worst;
    }
    r.diagnostics.push_back({"eigen_residual", rel_eigen});
    r.diagnostics.push_back({"trace_power_error", std::abs(r.f0.power() - power)});
    r.diagnostics.push_back({"block_sum_residual", (sum - p).norm()});
    return r;
}

namespace detail {

inline SpectralDensity constraint_polynomial(const std::vector<Mat>& p, int grid) {
    std::map<int, Mat> c;
    c[0] = 0.5 * (p[0] + p[0].adjoint());
    for (std::size_t m = 1; m < p.size(); ++m) {
        c[static_cast<int>(m)] = p[m];
        c[-static_cast<int>(m)] = p[m].adjoint();
    }
    return SpectralDensity(static_cast<int>(p[0].rows()), std::move(c), grid);
}

inline void require_positive_polynomial(const SpectralDensity& poly, double cond_threshold,
                                        const std::string& what) {
    const auto values = evaluate_on_grid(poly);
    for (int g = 0; g < values.grid_size(); ++g) {
        const auto [lo, hi] = hermitian_eig_range(values[g]);
        if (!(lo > 0.0) || hi / lo > cond_threshold)
            fail(ErrorKind::infeasible_class,
                 what + " is not positive definite at grid node " + std::to_string(g) +
                     " (lambda=" + std::to_string(grid_node(g, values.grid_size())) +
                     ", min eigenvalue " + std::to_string(lo) + ")");
    }
}

} // namespace detail

/// Class D_M^- of densities with prescribed coefficients P(0..M) of f^{-1}:
/// f0 = (sum_{|m|<=M} P(m) e^{im lambda})^{-1}, B_N^0(l,j) = P(l-j)^T, mse = <alpha, a>.
/// For M < N (scalar only) P(M+1..N) are recovered from B_N alpha = a_N with
/// alpha vanishing beyond M.
inline LeastFavorableResult least_favorable_dm_interpolation(const std::vector<Mat>& p_given,
                                                             const FunctionalWeights& w,
                                                             int grid = default_grid_size,
                                                             double cond_threshold = default_cond_threshold) {
    if (p_given.empty()) fail(ErrorKind::invalid_argument, "class D_M^-: no P(m) given");
    w.validate();
    const int k = w.dim();
    for (const auto& m : p_given)
        if (m.rows() != k || m.cols() != k)
            fail(ErrorKind::invalid_argument, "class D_M^-: P(m) must be K x K");
    const int mm = static_cast<int>(p_given.size()) - 1;
    const int n = w.horizon_n();
    if (mm < n && k > 1)
        fail(ErrorKind::unsupported, "class D_M^-: M < N is supported only for K = 1");

    LeastFavorableResult r;
    r.class_name = "DM-";
    const Vec a = w.stacked(n + 1);
    std::vector<Mat> table = p_given;
    auto entry = [&](int lag) -> Mat {
        return lag >= 0 ? table[lag] : Mat(table[-lag].adjoint());
    };

    Vec alpha;
    SolveDiagnostics sd;
    if (mm >= n) {
        detail::require_positive_polynomial(detail::constraint_polynomial(table, grid), cond_threshold,
                                            "constraint polynomial sum P(m) e^{im lambda}");
        const Mat b = assemble_blocks(n + 1, n + 1, k, [&](int l, int j) { return Mat(entry(l - j).transpose()); });
        alpha = hermitian_solve(b, a, cond_threshold, &sd, "matrix B_N^0");
    } else {
        detail::require_positive_polynomial(detail::constraint_polynomial(table, grid), cond_threshold,
                                            "constraint polynomial sum P(m) e^{im lambda}");
        const Mat t = assemble_blocks(mm + 1, mm + 1, 1, [&](int l, int j) { return Mat(entry(l - j).transpose()); });
        const Vec head = hermitian_solve(t, a.head(mm + 1), cond_threshold, &sd, "matrix B_M^0");
        if (std::abs(head[0]) <= 1e-14 * head.norm())
            fail(ErrorKind::infeasible_class, "class D_M^-: leading multiplier vanishes; P(M+1..N) undetermined");
        for (int l = mm + 1; l <= n; ++l) {
            cplx rest = a[l];
            for (int j = 1; j <= mm; ++j) rest -= entry(l - j)(0, 0) * head[j];
            table.push_back(Mat::Constant(1, 1, rest / head[0]));
        }
        alpha = Vec::Zero(n + 1);
        alpha.head(mm + 1) = head;
        detail::require_positive_polynomial(detail::constraint_polynomial(table, grid), cond_threshold,
                                            "extended polynomial sum_{|m|<=N} P(m) e^{im lambda}");
    }
    for (int j = 0; j <= n; ++j) r.alpha.push_back(alpha.segment(j * k, k));
    r.p_table = table;
    r.minimax_mse = alpha.dot(a).real();

    const auto poly = detail::constraint_polynomial(table, grid);
    r.f0 = inverse_density(poly);
    r.f0_grid = evaluate_on_grid(r.f0);
    r.ar_coeffs = spectral_factorize(poly).d;
    SolverOptions opt;
    opt.cond_threshold = cond_threshold;
    r.h0 = interpolate_noiseless(r.f0, w, opt);

    // Coefficients of (f0)^{-1} against the prescribed P(m).
    const auto inv = hermitian_inverse(r.f0_grid, cond_threshold);
    double moment = 0.0;
    for (int m = 0; m <= mm; ++m)
        moment = std::max(moment, (fourier_coefficient(inv, m) - p_given[m]).cwiseAbs().maxCoeff());
    const int q = w.size() - 1;
    const Mat b = assemble_blocks(q + 1, q + 1, k, [&](int l, int j) { return Mat(entry(l - j).transpose()); });
    r.diagnostics = {{"moment_residual", moment},
                     {"system_residual", (b * alpha - a).norm()},
                     {"h0_mse", r.h0->mse},
                     {"rcond", sd.rcond}};
    return r;
}

struct FilteringResiduals {
    double signal_relation = 0.0;            // max_lambda ||lhs - rhs||_F
    double noise_relation = 0.0;
    double signal_relation_relative = 0.0;   // divided by the largest side
    double noise_relation_relative = 0.0;
    double phi_max = 0.0;         // largest phi (must be <= 0)
    bool phi_nonpositive = true;
    double slackness = 0.0;       // max |phi| where Tr g > Tr (1-eps) g2
    double power_f_error = 0.0;   // |(1/2pi) int Tr f - P_zeta|
    double power_g_error = 0.0;
    double mixture_defect = 0.0;  // max(0, -min eig(g - (1-eps) g2))
    double mse = 0.0;
    std::vector<std::string> issues;
};

/// Pointwise residuals of
///   (g conj(A_-) + conj(D)) (A_-^T g + D^T) = alpha^2 (f+g)^2,
///   (f conj(A_-) - conj(D)) (A_-^T f - D^T) = (beta^2 + phi) (f+g)^2,
/// with D from the optimal filter for (f, g), plus the class constraints.
inline FilteringResiduals filtering_relation_residuals(const GridMatrixFunction& f,
                                                       const GridMatrixFunction& g,
                                                       const FunctionalWeights& w, double alpha2,
                                                       double beta2, const std::vector<double>& phi,
                                                       double eps, const GridMatrixFunction& g2,
                                                       double p_zeta, double p_theta,
                                                       const SolverOptions& opt = {}) {
    const int grid = f.grid_size();
    if (g.grid_size() != grid || g2.grid_size() != grid || static_cast<int>(phi.size()) != grid)
        fail(ErrorKind::invalid_argument, "filtering residuals: grid mismatch");
    if (g.dim != f.dim || g2.dim != f.dim || w.dim() != f.dim)
        fail(ErrorKind::invalid_argument, "filtering residuals: dimension mismatch");
    FilteringResiduals r;
    SpectralKernels kernels(f, g, opt.cond_threshold);
    const auto sol = filter(kernels, w, opt);
    r.mse = sol.mse;
    const int k = f.dim;
    const auto a = detail::functional_on_grid(w, Task::filtering, grid);
    const auto dg = detail::vector_series_on_grid(sol.solved_blocks, 1, 1, k, grid);
    double side_signal = 0.0, side_noise = 0.0;
    for (int n = 0; n < grid; ++n) {
        const Vec x = g[n].transpose() * a[n] + dg[n];
        const Vec y = f[n].transpose() * a[n] - dg[n];
        const Mat total = f[n] + g[n];
        const Mat sq = total * total;
        const Mat lhs_signal = x.conjugate() * x.transpose();
        const Mat rhs_signal = alpha2 * sq;
        const Mat lhs_noise = y.conjugate() * y.transpose();
        const Mat rhs_noise = (beta2 + phi[n]) * sq;
        r.signal_relation = std::max(r.signal_relation, (lhs_signal - rhs_signal).norm());
        r.noise_relation = std::max(r.noise_relation, (lhs_noise - rhs_noise).norm());
        side_signal = std::max({side_signal, lhs_signal.norm(), rhs_signal.norm()});
        side_noise = std::max({side_noise, lhs_noise.norm(), rhs_noise.norm()});
        r.phi_max = n == 0 ? phi[n] : std::max(r.phi_max, phi[n]);
        const Mat excess = g[n] - (1.0 - eps) * g2[n];
        const double scale = std::max(1.0, g[n].cwiseAbs().maxCoeff());
        if (excess.trace().real() > 1e-8 * scale) r.slackness = std::max(r.slackness, std::abs(phi[n]));
        r.mixture_defect = std::max(r.mixture_defect, -hermitian_eig_range(0.5 * (excess + excess.adjoint())).first);
    }
    r.signal_relation_relative = side_signal > 0.0 ? r.signal_relation / side_signal : r.signal_relation;
    r.noise_relation_relative = side_noise > 0.0 ? r.noise_relation / side_noise : r.noise_relation;
    r.phi_nonpositive = r.phi_max <= 0.0;
    if (!r.phi_nonpositive)
        r.issues.push_back("phi > 0 at some grid node (precondition phi <= 0 violated)");
    r.power_f_error = std::abs(detail::grid_mean_trace(f) - p_zeta);
    r.power_g_error = std::abs(detail::grid_mean_trace(g) - p_theta);
    if (r.mixture_defect > 1e-8) r.issues.push_back("g below (1-eps) g2 at some grid node");
    return r;
}

struct FilteringMinimaxOptions {
    double tol = 1e-10;   // relative duality-gap bound
    int max_iter = 20000;
    SolverOptions solver;
};

/// Scalar least favorable pair in D_0^2 x D_eps for filtering. Multiplicative
/// ascent f <- f (|A_- - h|^2 / alpha^2)^tau, g1 <- g1 (|h|^2 / beta^2)^tau with
/// power renormalization; stops when the duality-gap bound
/// P_zeta (max|A_- - h|^2 - alpha^2) + R (max|h|^2 - beta^2) falls below tol * mse.
inline LeastFavorableResult least_favorable_d0eps_filtering_scalar(const FunctionalWeights& w,
                                                                   double p_zeta, double p_theta,
                                                                   double eps, const SpectralDensity& g2,
                                                                   const FilteringMinimaxOptions& opt = {}) {
    w.validate();
    if (w.dim() != 1 || g2.dim != 1)
        fail(ErrorKind::unsupported, "D0^2 x D_eps solver is implemented for K = 1 only");
    if (!(p_zeta > 0.0) || !(p_theta >= 0.0))
        fail(ErrorKind::invalid_argument, "D0^2 x D_eps: P_zeta must be positive and P_theta nonnegative");
    if (!(eps >= 0.0 && eps <= 1.0)) fail(ErrorKind::invalid_argument, "D0^2 x D_eps: eps must lie in [0,1]");
    const auto g2_report = validate_density(g2);
    if (!g2_report.ok()) fail(ErrorKind::invalid_input, "g2: " + g2_report.issues.front());

    const int grid = g2.grid_size;
    const auto g2g = evaluate_on_grid(g2);
    const double fixed_power = (1.0 - eps) * detail::grid_mean_trace(g2g);
    double free_power = p_theta - fixed_power;
    const double power_tol = 1e-8 * std::max(1.0, p_theta);
    if (free_power < -power_tol || (eps == 0.0 && std::abs(free_power) > power_tol))
        fail(ErrorKind::infeasible_class,
             "class D_eps is empty: P_theta=" + std::to_string(p_theta) +
                 " but (1-eps) * power(g2)=" + std::to_string(fixed_power));
    free_power = std::max(free_power, 0.0);

    std::vector<double> f(grid, p_zeta), e(grid, free_power), base(grid);
    for (int n = 0; n < grid; ++n) base[n] = (1.0 - eps) * g2g[n](0, 0).real();

    auto to_grid = [&](const std::vector<double>& v, const std::vector<double>* add) {
        GridMatrixFunction out(1, grid);
        for (int n = 0; n < grid; ++n) out[n](0, 0) = v[n] + (add ? (*add)[n] : 0.0);
        return out;
    };
    auto mean = [&](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / grid;
    };

    LeastFavorableResult r;
    r.class_name = "D0^2xDeps";
    const auto a = detail::functional_on_grid(w, Task::filtering, grid);

    // Truncation fixed from the starting point to keep the iteration cheap.
    SolverOptions sopt = opt.solver;
    struct Eval {
        EstimateSolution sol;
        std::vector<double> u, v;
        double alpha2 = 0.0, beta2 = 0.0, gap = 0.0;
    };
    auto evaluate = [&](const std::vector<double>& fv, const std::vector<double>& ev) {
        std::vector<double> gv(grid);
        for (int n = 0; n < grid; ++n) gv[n] = base[n] + ev[n];
        SpectralKernels kernels(to_grid(fv, nullptr), std::optional<GridMatrixFunction>(to_grid(gv, nullptr)),
                                sopt.cond_threshold);
        Eval out;
        out.sol = filter(kernels, w, sopt);
        out.u.resize(grid);
        out.v.resize(grid);
        double umax = 0.0, vmax = 0.0, uf = 0.0, ve = 0.0;
        for (int n = 0; n < grid; ++n) {
            out.u[n] = std::norm(a[n][0] - out.sol.h_grid[n][0]);
            out.v[n] = std::norm(out.sol.h_grid[n][0]);
            umax = std::max(umax, out.u[n]);
            vmax = std::max(vmax, out.v[n]);
            uf += out.u[n] * fv[n];
            ve += out.v[n] * ev[n];
        }
        out.alpha2 = uf / grid / p_zeta;
        out.beta2 = free_power > 0.0 ? ve / grid / free_power : vmax;
        out.gap = p_zeta * (umax - out.alpha2) + free_power * (vmax - out.beta2);
        return out;
    };

    if (w.is_zero()) {
        r.f0_grid = to_grid(f, nullptr);
        r.g0_grid = to_grid(e, &base);
        r.f0 = density_from_grid(r.f0_grid, grid / 4);
        r.g0 = density_from_grid(*r.g0_grid, grid / 4);
        r.phi.assign(grid, 0.0);
        r.h0 = filter(r.f0, r.g0, w, sopt);
        r.diagnostics = {{"gap_bound", 0.0}};
        return r;
    }

    {
        auto first = [&] {
            std::vector<double> gv(grid);
            for (int n = 0; n < grid; ++n) gv[n] = base[n] + e[n];
            SpectralKernels kernels(to_grid(f, nullptr), std::optional<GridMatrixFunction>(to_grid(gv, nullptr)),
                                    sopt.cond_threshold);
            return filter(kernels, w, sopt);
        }();
        if (sopt.truncation <= 0) sopt.truncation = first.truncation;
    }

    Eval cur = evaluate(f, e);
    double tau = 1.0;
    int iter = 0;
    bool converged = cur.gap <= opt.tol * std::max(cur.sol.mse, 1e-300);
    while (!converged && iter < opt.max_iter) {
        std::vector<double> fn(grid), en(grid);
        for (int n = 0; n < grid; ++n) {
            fn[n] = f[n] * std::pow(cur.u[n] / cur.alpha2, tau);
            en[n] = free_power > 0.0 ? e[n] * std::pow(cur.v[n] / cur.beta2, tau) : 0.0;
        }
        const double fs = mean(fn);
        for (auto& x : fn) x *= p_zeta / fs;
        if (free_power > 0.0) {
            const double es = mean(en);
            for (auto& x : en) x *= free_power / es;
        }
        std::optional<Eval> next;
        try {
            next = evaluate(fn, en);
        } catch (const Error& err) {
            if (!is_numerical(err.kind())) throw;
        }
        ++iter;
        if (next && next->sol.mse >= cur.sol.mse - 1e-15 * std::abs(cur.sol.mse)) {
            f = std::move(fn);
            e = std::move(en);
            cur = std::move(*next);
            tau = std::min(tau * 1.25, 8.0);
        } else {
            tau *= 0.5;
            if (tau < 1e-6) break;
        }
        converged = cur.gap <= opt.tol * std::max(cur.sol.mse, 1e-300);
    }

    // Final solve with the automatic truncation rule.
    SolverOptions final_opt = opt.solver;
    r.f0_grid = to_grid(f, nullptr);
    r.g0_grid = to_grid(e, &base);
    try {
        SpectralKernels kernels(r.f0_grid, r.g0_grid, final_opt.cond_threshold);
        r.h0 = filter(kernels, w, final_opt);
    } catch (const Error& err) {
        if (!is_numerical(err.kind())) throw;
        r.h0 = cur.sol;
        converged = false;
    }
    r.f0 = density_from_grid(r.f0_grid, grid / 4);
    r.g0 = density_from_grid(*r.g0_grid, grid / 4);
    r.minimax_mse = r.h0->mse;
    r.alpha2 = cur.alpha2;
    r.beta2 = cur.beta2;
    r.phi.assign(grid, 0.0);
    const double scale = std::max(1.0, *std::max_element(e.begin(), e.end()));
    for (int n = 0; n < grid; ++n)
        if (!(e[n] > 1e-8 * scale)) r.phi[n] = std::min(cur.v[n] - cur.beta2, 0.0);
    r.iterations = iter;
    r.certified = converged;

    const auto res = filtering_relation_residuals(r.f0_grid, *r.g0_grid, w, r.alpha2, r.beta2, r.phi, eps,
                                                  g2g, p_zeta, p_theta, final_opt);
    r.diagnostics = {{"gap_bound", cur.gap},
                     {"signal_relation_relative", res.signal_relation_relative},
                     {"noise_relation_relative", res.noise_relation_relative},
                     {"slackness", res.slackness},
                     {"power_f_error", res.power_f_error},
                     {"power_g_error", res.power_g_error},
                     {"iterations", static_cast<double>(iter)}};
    return r;
}

/// Declared uncertainty class used to validate saddle-check samples.
struct ClassSpec {
    enum class Kind { y, d01, d0eps } kind = Kind::y;
    double p_zeta = 1.0;
    Mat p;                 // D_0^1 power matrix
    double p_theta = 0.0;
    double eps = 1.0;
    std::optional<GridMatrixFunction> g2;
    double tol = 1e-8;
};

struct ClassSample {
    SpectralDensity f;
    std::optional<SpectralDensity> g;
};

struct SaddleReport {
    std::vector<double> margins;
    double min_margin = 0.0;
    double reference = 0.0;   // Delta(h0; f0, g0)
    int accepted = 0;
    int rejected = 0;
    std::vector<std::string> rejections;

    bool pass(double tol = 1e-8) const { return min_margin >= -tol; }
};

inline std::optional<std::string> class_violation(const ClassSpec& spec, const GridMatrixFunction& f,
                                                  const std::optional<GridMatrixFunction>& g) {
    const double tol = spec.tol;
    const double pf = detail::grid_mean_trace(f);
    switch (spec.kind) {
    case ClassSpec::Kind::y:
        if (pf > spec.p_zeta + tol * std::max(1.0, spec.p_zeta))
            return "power " + std::to_string(pf) + " exceeds P_zeta";
        break;
    case ClassSpec::Kind::d01: {
        Mat mean = Mat::Zero(f.dim, f.dim);
        for (const auto& v : f.values) mean += v;
        mean /= double(f.grid_size());
        if ((mean - spec.p).cwiseAbs().maxCoeff() > tol * std::max(1.0, spec.p.cwiseAbs().maxCoeff()))
            return "zero-lag coefficient differs from P";
        break;
    }
    case ClassSpec::Kind::d0eps: {
        if (std::abs(pf - spec.p_zeta) > tol * std::max(1.0, spec.p_zeta)) return "signal power differs from P_zeta";
        if (!g) return "noise density missing";
        const double pg = detail::grid_mean_trace(*g);
        if (std::abs(pg - spec.p_theta) > tol * std::max(1.0, spec.p_theta)) return "noise power differs from P_theta";
        if (spec.g2)
            for (int n = 0; n < g->grid_size(); ++n) {
                const Mat excess = (*g)[n] - (1.0 - spec.eps) * (*spec.g2)[n];
                if (hermitian_eig_range(0.5 * (excess + excess.adjoint())).first < -tol)
                    return "noise below (1-eps) g2 at grid node " + std::to_string(n);
            }
        break;
    }
    }
    for (int n = 0; n < f.grid_size(); ++n)
        if (hermitian_eig_range(f[n]).first < -psd_tolerance) return "signal density not PSD";
    return std::nullopt;
}

/// margin = Delta(h0; f0, g0) - Delta(h0; f, g) for each validated sample.
inline SaddleReport saddle_point_check(const EstimateSolution& h0, const GridMatrixFunction& f0,
                                       const std::optional<GridMatrixFunction>& g0,
                                       const FunctionalWeights& w, const std::vector<ClassSample>& samples,
                                       const ClassSpec& spec) {
    SaddleReport rep;
    rep.reference = evaluate_mse(h0.h_grid, f0, g0, w, h0.task);
    rep.min_margin = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto fg = evaluate_on_grid(samples[i].f);
        std::optional<GridMatrixFunction> gg;
        if (samples[i].g) gg = evaluate_on_grid(*samples[i].g);
        if (fg.grid_size() != f0.grid_size()) {
            ++rep.rejected;
            rep.rejections.push_back("sample " + std::to_string(i) + ": grid differs");
            continue;
        }
        if (const auto why = class_violation(spec, fg, gg)) {
            ++rep.rejected;
            rep.rejections.push_back("sample " + std::to_string(i) + ": " + *why);
            continue;
        }
        const double margin = rep.reference - evaluate_mse(h0.h_grid, fg, gg, w, h0.task);
        rep.margins.push_back(margin);
        rep.min_margin = first ? margin : std::min(rep.min_margin, margin);
        first = false;
        ++rep.accepted;
    }
    return rep;
}

namespace detail {

inline std::vector<Mat> random_ma(int k, int order, Rng& rng) {
    std::vector<Mat> d(order + 1, Mat::Zero(k, k));
    for (auto& m : d)
        for (int r = 0; r < k; ++r)
            for (int c = 0; c < k; ++c) m(r, c) = rng.complex_normal();
    return d;
}

inline std::vector<Mat> random_real_ma(int order, Rng& rng) {
    std::vector<Mat> d(order + 1, Mat::Zero(1, 1));
    for (auto& m : d) m(0, 0) = rng.normal();
    return d;
}

} // namespace detail

/// Random MA(order) densities with trace power P_zeta (class Y members).
inline std::vector<ClassSample> sample_class_y(int k, int order, double p_zeta, int count,
                                               std::uint64_t seed, int grid = default_grid_size) {
    std::vector<ClassSample> out;
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        auto d = detail::random_ma(k, order, rng);
        double total = 0.0;
        for (const auto& m : d) total += m.squaredNorm();
        for (auto& m : d) m *= std::sqrt(p_zeta / total);
        out.push_back({SpectralDensity::from_moving_average(d, grid), std::nullopt});
    }
    return out;
}

/// Random MA(order) densities with (1/2pi) int f = P (class D_0^1 members).
inline std::vector<ClassSample> sample_class_d01(const Mat& p, int order, int count, std::uint64_t seed,
                                                 int grid = default_grid_size) {
    const int k = static_cast<int>(p.rows());
    Eigen::SelfAdjointEigenSolver<Mat> ep(p);
    const Mat p_half = ep.operatorSqrt();
    std::vector<ClassSample> out;
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        auto d = detail::random_ma(k, order, rng);
        Mat f0 = Mat::Zero(k, k);
        for (const auto& m : d) f0 += m * m.adjoint();
        Eigen::SelfAdjointEigenSolver<Mat> ef(f0);
        const Mat t = p_half * ef.operatorInverseSqrt();
        for (auto& m : d) m = (t * m).eval();
        out.push_back({SpectralDensity::from_moving_average(d, grid), std::nullopt});
    }
    return out;
}

/// Random scalar pairs (f, g): f an MA(order) density of power P_zeta,
/// g = (1-eps) g2 + an MA(order) density carrying the remaining noise power.
inline std::vector<ClassSample> sample_class_d0eps(double p_zeta, double p_theta, double eps,
                                                   const SpectralDensity& g2, int order, int count,
                                                   std::uint64_t seed) {
    const int grid = g2.grid_size;
    const double free_power = std::max(p_theta - (1.0 - eps) * g2.power(), 0.0);
    std::vector<ClassSample> out;
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        auto df = detail::random_real_ma(order, rng);
        auto dg = detail::random_real_ma(order, rng);
        auto normalize = [](std::vector<Mat>& d, double power) {
            double total = 0.0;
            for (const auto& m : d) total += m.squaredNorm();
            for (auto& m : d) m *= std::sqrt(power / total);
        };
        normalize(df, p_zeta);
        normalize(dg, free_power);
        auto g = SpectralDensity::from_moving_average(dg, grid).plus(g2.scaled(1.0 - eps));
        out.push_back({SpectralDensity::from_moving_average(df, grid), g});
    }
    return out;
}

} // namespace pcwk

#endif // PCWK_MINIMAX_HPP
