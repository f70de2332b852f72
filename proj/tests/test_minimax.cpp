#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "pcwk/pcwk.hpp"

using namespace pcwk;

namespace {

Vec vec(std::initializer_list<cplx> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    int i = 0;
    for (const auto& x : v) out[i++] = x;
    return out;
}

FunctionalWeights scalar_weights(std::initializer_list<double> a, Horizon h) {
    std::vector<Vec> blocks;
    for (double x : a) blocks.push_back(vec({x}));
    return FunctionalWeights(blocks, h);
}

SpectralDensity white(int k, double level = 1.0) { return SpectralDensity::constant(Mat::Identity(k, k) * level); }

SpectralDensity ma1() { return SpectralDensity::scalar({{-1, 0.5}, {0, 1.25}, {1, 0.5}}); }

// 0.5 + 0.4 cos(lambda)
SpectralDensity g2_density() { return SpectralDensity::scalar({{-1, 0.2}, {0, 0.5}, {1, 0.2}}); }

const double golden_sq = (3.0 + std::sqrt(5.0)) / 2.0;

} // namespace

// ---- Q operator and class Y ----

TEST(QOperator, Examples) {
    EXPECT_NEAR(std::abs(build_q_operator(scalar_weights({1.0}, Horizon::extrapolation_finite)).dense(0, 0) - 1.0),
                0.0, 0.0);
    const auto q = build_q_operator(scalar_weights({1.0, 1.0}, Horizon::extrapolation_finite));
    Mat want(2, 2);
    want << 2.0, 1.0, 1.0, 1.0;
    EXPECT_EQ(q.dense, want);
    EXPECT_EQ(build_q_operator(scalar_weights({0.0, 0.0}, Horizon::extrapolation_finite)).dense.norm(), 0.0);
}

TEST(QOperator, HermitianPsdAndRayleighBound) {
    const FunctionalWeights w({vec({1.0, cplx(0, 1)}), vec({0.5, 0.2}), vec({cplx(0.1, 0.3), -0.4})},
                              Horizon::extrapolation_finite);
    const auto q = build_q_operator(w);
    EXPECT_LE((q.dense - q.dense.adjoint()).norm(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Mat> es(q.dense);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    EXPECT_GE(es.eigenvalues().maxCoeff(), w[0].squaredNorm() - 1e-12);
}

TEST(ClassY, SingleBlock) {
    const auto r = least_favorable_class_y(scalar_weights({1.0}, Horizon::extrapolation_finite), 1.0);
    EXPECT_NEAR(r.nu2, 1.0, 1e-14);
    EXPECT_NEAR(r.minimax_mse, 1.0, 1e-14);
    EXPECT_NEAR(std::abs(r.d[0](0, 0)), 1.0, 1e-14);
    for (int g = 0; g < r.f0_grid.grid_size(); g += 64) EXPECT_NEAR(r.f0_grid[g](0, 0).real(), 1.0, 1e-13);
}

TEST(ClassY, TwoBlocks) {
    const auto w = scalar_weights({1.0, 1.0}, Horizon::extrapolation_finite);
    const auto r = least_favorable_class_y(w, 1.0);
    EXPECT_NEAR(r.minimax_mse, golden_sq, 1e-10);
    EXPECT_NEAR(r.h0->mse, golden_sq, 1e-10);
    EXPECT_NEAR(evaluate_mse(r.h0->h_grid, r.f0, std::nullopt, w, Task::extrapolation_finite), golden_sq, 1e-10);
    EXPECT_NEAR(extrapolate_factorized_finite(r.f0, w).mse, golden_sq, 1e-9);
}

TEST(ClassY, TwoComponents) {
    const FunctionalWeights w({vec({1.0, 0.0})}, Horizon::extrapolation_finite);
    EXPECT_NEAR(least_favorable_class_y(w, 2.0).minimax_mse, 2.0, 1e-12);
}

TEST(ClassY, SaddleSampling) {
    const auto w = scalar_weights({1.0, 1.0}, Horizon::extrapolation_finite);
    const auto r = least_favorable_class_y(w, 1.0);
    ClassSpec spec;
    spec.kind = ClassSpec::Kind::y;
    spec.p_zeta = 1.0;
    const auto samples = sample_class_y(1, 1, 1.0, 100, 2024);
    const auto rep = saddle_point_check(*r.h0, r.f0_grid, std::nullopt, w, samples, spec);
    EXPECT_EQ(rep.accepted, 100);
    EXPECT_TRUE(rep.pass(1e-8));
    EXPECT_NEAR(rep.reference, golden_sq, 1e-10);
}

TEST(Saddle, LeastFavorableSampleHasZeroMargin) {
    const auto w = scalar_weights({1.0, 1.0}, Horizon::extrapolation_finite);
    const auto r = least_favorable_class_y(w, 1.0);
    ClassSpec spec;
    const auto rep = saddle_point_check(*r.h0, r.f0_grid, std::nullopt, w, {{r.f0, std::nullopt}}, spec);
    ASSERT_EQ(rep.accepted, 1);
    EXPECT_NEAR(rep.margins[0], 0.0, 1e-12);
}

TEST(Saddle, SamplesOutsideClassRejected) {
    const auto w = scalar_weights({1.0}, Horizon::extrapolation_finite);
    const auto r = least_favorable_class_y(w, 1.0);
    ClassSpec spec;
    const auto rep = saddle_point_check(*r.h0, r.f0_grid, std::nullopt, w, {{white(1, 2.0), std::nullopt}}, spec);
    EXPECT_EQ(rep.accepted, 0);
    EXPECT_EQ(rep.rejected, 1);
}

// ---- class D_M^- ----

TEST(ClassDM, WhiteNoiseClass) {
    const auto r = least_favorable_dm_interpolation({Mat::Constant(1, 1, 1.0)},
                                                    scalar_weights({1.0}, Horizon::interpolation));
    EXPECT_NEAR(std::abs(r.alpha[0][0] - 1.0), 0.0, 1e-12);
    EXPECT_NEAR(r.minimax_mse, 1.0, 1e-12);
    EXPECT_NEAR(r.f0_grid[100](0, 0).real(), 1.0, 1e-12);
}

TEST(ClassDM, AutoregressiveType) {
    const auto w = scalar_weights({1.0}, Horizon::interpolation);
    const auto r = least_favorable_dm_interpolation({Mat::Constant(1, 1, 1.25), Mat::Constant(1, 1, 0.5)}, w);
    EXPECT_NEAR(r.minimax_mse, 0.8, 1e-12);
    EXPECT_NEAR(interpolate_noiseless(r.f0, w).mse, 0.8, 1e-10);
    EXPECT_LE(r.diagnostic("moment_residual"), 1e-8);
}

TEST(ClassDM, ShortMomentListInfeasibleExample) {
    // P(0)=1 with a=(1,1) forces P(1)=1, i.e. 1 + 2 cos(lambda), which is indefinite.
    try {
        least_favorable_dm_interpolation({Mat::Constant(1, 1, 1.0)}, scalar_weights({1.0, 1.0}, Horizon::interpolation));
        FAIL() << "expected infeasible class";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::infeasible_class);
    }
}

TEST(ClassDM, ShortMomentListFeasible) {
    const auto w = scalar_weights({1.0, 0.3}, Horizon::interpolation);
    const auto r = least_favorable_dm_interpolation({Mat::Constant(1, 1, 1.0)}, w);
    ASSERT_EQ(r.p_table.size(), 2u);
    EXPECT_NEAR(std::abs(r.p_table[1](0, 0) - 0.3), 0.0, 1e-12);
    EXPECT_NEAR(r.minimax_mse, 1.0, 1e-12);
    EXPECT_LE(r.diagnostic("system_residual"), 1e-8);
    EXPECT_LE(r.diagnostic("moment_residual"), 1e-8);
}

TEST(ClassDM, MatrixCase) {
    Mat p0 = Mat::Identity(2, 2) * 2.0;
    Mat p1(2, 2);
    p1 << 0.5, 0.2, cplx(0.0, 0.1), 0.3;
    const FunctionalWeights w({vec({1.0, 0.5}), vec({0.0, 1.0})}, Horizon::interpolation);
    const auto r = least_favorable_dm_interpolation({p0, p1}, w);
    EXPECT_LE(r.diagnostic("moment_residual"), 1e-8);
    EXPECT_NEAR(interpolate_noiseless(r.f0, w).mse, r.minimax_mse, 1e-10);
}

// ---- class D_0^1 ----

TEST(ClassD01, ScalarExamples) {
    const auto one = least_favorable_d01_extrapolation(scalar_weights({1.0}, Horizon::extrapolation),
                                                       Mat::Constant(1, 1, 1.0));
    EXPECT_NEAR(one.minimax_mse, 1.0, 1e-12);
    const auto w = scalar_weights({1.0, 1.0}, Horizon::extrapolation);
    const auto two = least_favorable_d01_extrapolation(w, Mat::Constant(1, 1, 1.0));
    EXPECT_NEAR(two.minimax_mse, golden_sq, 1e-10);
    EXPECT_NEAR(two.minimax_mse, least_favorable_class_y(w, 1.0).minimax_mse, 1e-12);
}

TEST(ClassD01, TwoComponents) {
    const FunctionalWeights w({vec({1.0, 0.0})}, Horizon::extrapolation);
    const auto r = least_favorable_d01_extrapolation(w, Mat::Identity(2, 2));
    EXPECT_LE(r.diagnostic("eigen_residual"), 1e-8);
    EXPECT_LE(r.diagnostic("trace_power_error"), 1e-8);
    EXPECT_TRUE(std::isfinite(r.diagnostic("block_sum_residual")));
}

TEST(ClassD01, SaddleSampling) {
    const FunctionalWeights w({vec({1.0, 0.5}), vec({0.0, 1.0})}, Horizon::extrapolation);
    const Mat p = Mat::Identity(2, 2);
    const auto r = least_favorable_d01_extrapolation(w, p);
    ClassSpec spec;
    spec.kind = ClassSpec::Kind::d01;
    spec.p = p;
    const auto rep = saddle_point_check(*r.h0, r.f0_grid, std::nullopt, w, sample_class_d01(p, 2, 50, 99), spec);
    EXPECT_EQ(rep.accepted, 50);
    EXPECT_TRUE(rep.pass(1e-8));
}

// ---- filtering classes ----

TEST(FilteringResiduals, WhiteExample) {
    const int grid = 256;
    const auto one = GridMatrixFunction::constant(Mat::Identity(1, 1), grid);
    const auto r = filtering_relation_residuals(one, one, scalar_weights({1.0}, Horizon::filtering), 0.25, 0.25,
                                                std::vector<double>(grid, 0.0), 1.0, one, 1.0, 1.0);
    EXPECT_NEAR(r.mse, 0.5, 1e-12);
    EXPECT_LE(r.signal_relation, 1e-12);
    EXPECT_LE(r.noise_relation, 1e-12);
    EXPECT_TRUE(r.phi_nonpositive);
}

TEST(FilteringResiduals, ZeroWeights) {
    const int grid = 256;
    const auto one = GridMatrixFunction::constant(Mat::Identity(1, 1), grid);
    const auto r = filtering_relation_residuals(one, one, scalar_weights({0.0}, Horizon::filtering), 0.0, 0.0,
                                                std::vector<double>(grid, 0.0), 1.0, one, 1.0, 1.0);
    EXPECT_EQ(r.signal_relation, 0.0);
    EXPECT_EQ(r.noise_relation, 0.0);
}

TEST(FilteringResiduals, PositivePhiFlagged) {
    const int grid = 256;
    const auto one = GridMatrixFunction::constant(Mat::Identity(1, 1), grid);
    std::vector<double> phi(grid, 0.0);
    phi[3] = 0.1;
    const auto r = filtering_relation_residuals(one, one, scalar_weights({1.0}, Horizon::filtering), 0.25, 0.25, phi,
                                                1.0, one, 1.0, 1.0);
    EXPECT_FALSE(r.phi_nonpositive);
    EXPECT_FALSE(r.issues.empty());
}

TEST(ClassD0Eps, FreeNoiseSymmetric) {
    const auto w = scalar_weights({1.0}, Horizon::filtering);
    const auto r = least_favorable_d0eps_filtering_scalar(w, 1.0, 1.0, 1.0, g2_density());
    ASSERT_TRUE(r.certified);
    EXPECT_NEAR(r.minimax_mse, 0.5, 1e-8);
    ClassSpec spec;
    spec.kind = ClassSpec::Kind::d0eps;
    spec.p_zeta = 1.0;
    spec.p_theta = 1.0;
    spec.eps = 1.0;
    spec.g2 = evaluate_on_grid(g2_density());
    const auto samples = sample_class_d0eps(1.0, 1.0, 1.0, g2_density(), 1, 50, 5);
    const auto rep = saddle_point_check(*r.h0, r.f0_grid, r.g0_grid, w, samples, spec);
    EXPECT_EQ(rep.accepted, 50);
    EXPECT_TRUE(rep.pass(1e-8));
}

TEST(ClassD0Eps, ZeroWeights) {
    const auto r = least_favorable_d0eps_filtering_scalar(scalar_weights({0.0}, Horizon::filtering), 1.0, 1.0, 0.5,
                                                          g2_density());
    EXPECT_EQ(r.minimax_mse, 0.0);
}

TEST(ClassD0Eps, NoContaminationFixesNoise) {
    const auto w = scalar_weights({1.0}, Horizon::filtering);
    FilteringMinimaxOptions opt;
    opt.max_iter = 3000;
    const auto r = least_favorable_d0eps_filtering_scalar(w, 1.0, 0.5, 0.0, g2_density(), opt);
    ASSERT_TRUE(r.certified);
    const auto g2 = evaluate_on_grid(g2_density());
    for (int n = 0; n < g2.grid_size(); ++n) EXPECT_NEAR(std::abs((*r.g0_grid)[n](0, 0) - g2[n](0, 0)), 0.0, 1e-12);
    EXPECT_NEAR(r.minimax_mse, 1.0 / 3.0, 1e-8);
    EXPECT_LE(r.diagnostic("signal_relation_relative"), 1e-6);
    EXPECT_LE(r.diagnostic("noise_relation_relative"), 1e-6);
}

TEST(ClassD0Eps, InfeasibleNoisePower) {
    EXPECT_THROW(least_favorable_d0eps_filtering_scalar(scalar_weights({1.0}, Horizon::filtering), 1.0, 0.1, 0.5,
                                                        g2_density()),
                 Error);
}

TEST(ClassD0Eps, NonConvergenceReported) {
    FilteringMinimaxOptions opt;
    opt.max_iter = 20;
    const auto r = least_favorable_d0eps_filtering_scalar(scalar_weights({1.0, 0.5}, Horizon::filtering), 1.0, 0.5,
                                                          0.0, g2_density(), opt);
    EXPECT_FALSE(r.certified);
    EXPECT_GT(r.diagnostic("gap_bound"), 0.0);
}

// ---- oracle harness ----

TEST(Oracle, Covariances) {
    const auto id = covariances_from_density(white(2), 3);
    EXPECT_NEAR((id.at(0) - Mat::Identity(2, 2)).norm(), 0.0, 1e-15);
    EXPECT_NEAR(id.at(2).norm(), 0.0, 1e-15);
    const auto m = covariances_from_density(ma1(), 2);
    EXPECT_NEAR(std::abs(m.at(0)(0, 0) - 1.25), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(m.at(1)(0, 0) - 0.5), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(m.at(-1)(0, 0) - 0.5), 0.0, 1e-14);
    Mat f1(2, 2);
    f1 << cplx(0.1, 0.2), 0.3, 0.0, cplx(0.0, -0.1);
    const SpectralDensity f(2, {{-1, f1.adjoint()}, {0, Mat::Identity(2, 2) * 2.0}, {1, f1}});
    const auto c = covariances_from_density(f, 3);
    for (int j = 1; j <= 3; ++j) EXPECT_NEAR((c.at(-j) - c.at(j).adjoint()).norm(), 0.0, 1e-15);
    EXPECT_THROW(covariances_from_density(ma1(), default_grid_size / 2), Error);
}

TEST(Oracle, ProjectionExamples) {
    EXPECT_NEAR(time_domain_projection(Task::filtering, white(1), white(1), scalar_weights({1.0}, Horizon::filtering), 64).mse,
                0.5, 1e-8);
    const auto ar = inverse_density(SpectralDensity::scalar({{-1, -0.5}, {0, 1.25}, {1, -0.5}}));
    const auto w = scalar_weights({1.0}, Horizon::interpolation);
    const double w16 = time_domain_projection(Task::interpolation, ar, std::nullopt, w, 16).mse;
    const double w256 = time_domain_projection(Task::interpolation, ar, std::nullopt, w, 256).mse;
    EXPECT_LE(w256, w16 + 1e-15);
    EXPECT_NEAR(w256, 0.8, 1e-8);
    EXPECT_EQ(time_domain_projection(Task::extrapolation, ma1(), std::nullopt,
                                     scalar_weights({0.0}, Horizon::extrapolation), 8).mse,
              0.0);
}

TEST(Oracle, ProjectionNonincreasingInWindow) {
    const auto g = white(1, 0.3);
    const auto w = scalar_weights({1.0, 0.5}, Horizon::extrapolation);
    double prev = std::numeric_limits<double>::infinity();
    for (int window : {1, 2, 4, 8, 16, 32}) {
        const double mse = time_domain_projection(Task::extrapolation, ma1(), g, w, window).mse;
        EXPECT_LE(mse, prev + 1e-12);
        prev = mse;
    }
}

TEST(Oracle, SimulateWhiteVariance) {
    Factorization p;
    p.d = {Mat::Identity(1, 1)};
    const int n = 100000;
    const auto path = simulate_sequence(p, n, 123);
    double var = 0.0;
    for (const auto& z : path) var += std::norm(z[0]);
    var /= n;
    EXPECT_NEAR(var, 1.0, 3.0 / std::sqrt(n));
}

TEST(Oracle, SimulateZeroFactor) {
    Factorization p;
    p.d = {Mat::Zero(1, 1)};
    for (const auto& z : simulate_sequence(p, 100, 1)) EXPECT_EQ(z.norm(), 0.0);
}

TEST(Oracle, SimulateMovingAverageLagOne) {
    Factorization p;
    p.d = {Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 0.5)};
    const int n = 100000;
    const auto path = simulate_sequence(p, n, 321);
    cplx acc = 0.0;
    for (int t = 1; t < n; ++t) acc += path[t][0] * std::conj(path[t - 1][0]);
    acc /= double(n - 1);
    // standard error of the lag-1 product mean is about sqrt(1.25^2 + 2 * 0.25) / sqrt(n)
    EXPECT_NEAR(acc.real(), 0.5, 3.0 * 1.5 / std::sqrt(n));
}

TEST(Oracle, SimulationIsSeeded) {
    const auto p = spectral_factorize(ma1());
    const auto a = simulate_sequence(p, 50, 9);
    const auto b = simulate_sequence(p, 50, 9);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Oracle, EmpiricalMse) {
    const auto w = scalar_weights({1.0, 1.0}, Horizon::extrapolation);
    const auto sol = extrapolate_noiseless(ma1(), w);
    const double emp = empirical_mse(sol, w, spectral_factorize(ma1()), std::nullopt, 20000, 77);
    EXPECT_NEAR(emp, 3.25, 0.15);
}

TEST(Oracle, CompareReport) {
    const auto same = compare_report(0.8, 0.8);
    EXPECT_EQ(same.rel_diff, 0.0);
    EXPECT_TRUE(same.pass);
    EXPECT_TRUE(compare_report(0.8, 0.800004, 1e-5).pass);
    const auto off = compare_report(0.8, 0.81, 1e-5);
    EXPECT_FALSE(off.pass);
    EXPECT_NEAR(off.rel_diff, 1.25e-2, 1e-12);
}
