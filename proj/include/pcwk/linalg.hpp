#ifndef PCWK_LINALG_HPP
#define PCWK_LINALG_HPP

#include <algorithm>
#include <string>

#include <Eigen/Dense>

#include "error.hpp"
#include "lift.hpp"

namespace pcwk {

struct SolveDiagnostics {
    double rcond = 0.0;          // reciprocal condition estimate (1-norm)
    double residual = 0.0;       // ||A x - b|| / ||b|| after refinement
    int size = 0;
};

/// Solves A x = b for Hermitian A with a pivoted LDL^* factorization and one
/// step of iterative refinement. Throws ill-posed when the estimated
/// condition number exceeds cond_threshold.
inline Vec hermitian_solve(const Mat& a, const Vec& b, double cond_threshold,
                           SolveDiagnostics* diag = nullptr, const std::string& what = "system") {
    if (a.rows() != a.cols() || a.rows() != b.size())
        fail(ErrorKind::invalid_argument, what + ": dimension mismatch");
    SolveDiagnostics d;
    d.size = static_cast<int>(a.rows());
    if (a.rows() == 0) {
        if (diag) *diag = d;
        return Vec();
    }
    Eigen::LDLT<Mat> ldlt(a);
    d.rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
    // rcond() skips exactly vanishing pivots, so the pivot spread is checked too.
    const auto pivots = ldlt.vectorD().cwiseAbs();
    if (pivots.maxCoeff() > 0.0) d.rcond = std::min(d.rcond, pivots.minCoeff() / pivots.maxCoeff());
    else d.rcond = 0.0;
    if (!(d.rcond > 0.0) || 1.0 / d.rcond > cond_threshold)
        fail(ErrorKind::ill_posed, what + " is singular or ill-conditioned (condition estimate " +
                                       (d.rcond > 0 ? std::to_string(1.0 / d.rcond) : "inf") + ")");
    Vec x = ldlt.solve(b);
    x += ldlt.solve(b - a * x);
    const double bn = b.norm();
    d.residual = bn > 0 ? (a * x - b).norm() / bn : (a * x).norm();
    if (diag) *diag = d;
    return x;
}

/// Flattens a 2-D block layout (rows x cols blocks of size k) into a dense matrix.
template <class BlockFn>
Mat assemble_blocks(int row_blocks, int col_blocks, int k, BlockFn&& block) {
    Mat out(static_cast<Eigen::Index>(row_blocks) * k, static_cast<Eigen::Index>(col_blocks) * k);
    for (int r = 0; r < row_blocks; ++r)
        for (int c = 0; c < col_blocks; ++c) out.block(r * k, c * k, k, k) = block(r, c);
    return out;
}

} // namespace pcwk

#endif // PCWK_LINALG_HPP
