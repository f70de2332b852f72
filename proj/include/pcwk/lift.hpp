#ifndef PCWK_LIFT_HPP
#define PCWK_LIFT_HPP

/// @file
/// Lifting of a periodically correlated description (period T, functions on
/// [0,T)) to K-component vector blocks in the harmonic basis
///   e_k(u) = T^{-1/2} exp(2 pi i nu(k) u / T),  nu(k) = (-1)^k floor(k/2).

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace pcwk {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

struct LiftConfig {
    double period = 1.0;
    int harmonics = 1;           // K
    int quadrature_points = 64;  // per period

    void validate() const {
        if (!(period > 0.0) || !std::isfinite(period))
            fail(ErrorKind::invalid_argument, "period must be positive");
        if (harmonics < 1)
            fail(ErrorKind::invalid_argument, "K must be >= 1");
        if (quadrature_points < 4 * harmonics)
            fail(ErrorKind::invalid_argument,
                 "quadrature_points must be >= 4*K");
    }
};

enum class Horizon { interpolation, extrapolation, extrapolation_finite, filtering };

inline const char* to_string(Horizon h) {
    switch (h) {
    case Horizon::interpolation: return "interpolation";
    case Horizon::extrapolation: return "extrapolation";
    case Horizon::extrapolation_finite: return "extrapolation_finite";
    case Horizon::filtering: return "filtering";
    }
    return "?";
}

/// Lifted weight vectors a_0 ... a_J of the target functional. Entry k of
/// block j is the coefficient that multiplies zeta_{kj}.
struct FunctionalWeights {
    std::vector<Vec> blocks;
    Horizon horizon = Horizon::extrapolation;

    FunctionalWeights() = default;
    FunctionalWeights(std::vector<Vec> b, Horizon h) : blocks(std::move(b)), horizon(h) {}

    int dim() const { return blocks.empty() ? 0 : static_cast<int>(blocks.front().size()); }
    int size() const { return static_cast<int>(blocks.size()); }
    /// N for the finite horizons (block count minus one).
    int horizon_n() const { return size() - 1; }

    /// Index of the last block with a nonzero entry, -1 when all vanish.
    int last_nonzero() const {
        for (int j = size() - 1; j >= 0; --j)
            if (blocks[j].cwiseAbs().maxCoeff() > 0.0) return j;
        return -1;
    }

    bool is_zero() const { return last_nonzero() < 0; }

    const Vec& operator[](int j) const { return blocks[j]; }

    /// Blocks stacked into one vector of length size()*dim().
    Vec stacked(int count) const {
        const int k = dim();
        Vec out = Vec::Zero(static_cast<Eigen::Index>(count) * k);
        for (int j = 0; j < std::min(count, size()); ++j) out.segment(j * k, k) = blocks[j];
        return out;
    }

    void validate() const {
        if (blocks.empty()) fail(ErrorKind::invalid_argument, "weights: no blocks");
        const auto k = blocks.front().size();
        if (k < 1) fail(ErrorKind::invalid_argument, "weights: K must be >= 1");
        for (const auto& b : blocks) {
            if (b.size() != k)
                fail(ErrorKind::invalid_argument, "weights: blocks have differing lengths");
            for (Eigen::Index i = 0; i < b.size(); ++i)
                if (!std::isfinite(b[i].real()) || !std::isfinite(b[i].imag()))
                    fail(ErrorKind::invalid_input, "weights: non-finite entry");
        }
    }
};

/// nu(k) = (-1)^k floor(k/2); k = 1, 2, 3, ... maps to 0, 1, -1, 2, -2, ...
inline int frequency_index(int k) {
    if (k < 1) fail(ErrorKind::invalid_argument, "frequency_index: k must be >= 1");
    const int half = k / 2;
    return (k % 2 == 0) ? half : -half;
}

/// Involution pairing k with the index of opposite frequency:
/// sigma(1)=1, sigma(2l)=2l+1, sigma(2l+1)=2l.
inline int conjugate_pair_permutation(int k) {
    if (k < 1) fail(ErrorKind::invalid_argument, "conjugate_pair_permutation: k must be >= 1");
    if (k == 1) return 1;
    return (k % 2 == 0) ? k + 1 : k - 1;
}

namespace detail {

inline double basis_phase(int k, double u, double period) {
    return 2.0 * std::numbers::pi * frequency_index(k) * u / period;
}

} // namespace detail

/// Coefficients <x, e_k>, k = 1..K, of one period block sampled on the
/// uniform grid u_q = q T / Q (trapezoid rule on a periodic integrand).
inline Vec lift_block(const std::vector<cplx>& samples, const LiftConfig& cfg) {
    cfg.validate();
    const int q_count = static_cast<int>(samples.size());
    if (q_count < 4 * cfg.harmonics)
        fail(ErrorKind::invalid_argument, "lift_block: too few samples for K");
    const double du = cfg.period / q_count;
    const double scale = du / std::sqrt(cfg.period);
    Vec out = Vec::Zero(cfg.harmonics);
    for (int k = 1; k <= cfg.harmonics; ++k) {
        cplx acc{0.0, 0.0};
        for (int q = 0; q < q_count; ++q) {
            const double ph = detail::basis_phase(k, q * du, cfg.period);
            acc += samples[q] * cplx(std::cos(ph), -std::sin(ph));
        }
        out[k - 1] = acc * scale;
    }
    return out;
}

/// Weight vectors of the functional int a(t) zeta(t) dt over J+1 periods.
/// Entry k of block j is <a_j, e_{sigma(k)}>, the multiplier of zeta_{kj}.
inline FunctionalWeights compute_weights(const std::function<cplx(double)>& a,
                                         const LiftConfig& cfg, int last_block,
                                         Horizon horizon = Horizon::extrapolation) {
    cfg.validate();
    if (last_block < 0) fail(ErrorKind::invalid_argument, "compute_weights: J must be >= 0");
    const int q_count = cfg.quadrature_points;
    const double du = cfg.period / q_count;
    const double scale = du / std::sqrt(cfg.period);

    std::vector<Vec> blocks;
    blocks.reserve(last_block + 1);
    double abs_integral = 0.0;
    for (int j = 0; j <= last_block; ++j) {
        std::vector<cplx> samples(q_count);
        for (int q = 0; q < q_count; ++q) {
            samples[q] = a(q * du + j * cfg.period);
            if (!std::isfinite(samples[q].real()) || !std::isfinite(samples[q].imag()))
                fail(ErrorKind::invalid_input, "compute_weights: non-finite sample of a(t)");
            abs_integral += std::abs(samples[q]) * du;
        }
        Vec block = Vec::Zero(cfg.harmonics);
        for (int k = 1; k <= cfg.harmonics; ++k) {
            const int partner = conjugate_pair_permutation(k);
            cplx acc{0.0, 0.0};
            for (int q = 0; q < q_count; ++q) {
                const double ph = detail::basis_phase(partner, q * du, cfg.period);
                acc += samples[q] * cplx(std::cos(ph), -std::sin(ph));
            }
            block[k - 1] = acc * scale;
        }
        blocks.push_back(std::move(block));
    }
    if (!std::isfinite(abs_integral))
        fail(ErrorKind::invalid_input, "compute_weights: a(t) is not integrable");
    return FunctionalWeights(std::move(blocks), horizon);
}

/// Samples zeta(u + jT) = sum_k zeta_{kj} e_k(u) for each block in the window.
inline std::vector<std::vector<cplx>> reconstruct_pc(const std::vector<Vec>& window,
                                                     const LiftConfig& cfg,
                                                     const std::vector<double>& u_grid) {
    if (window.empty()) fail(ErrorKind::invalid_argument, "reconstruct_pc: empty window");
    const double norm = 1.0 / std::sqrt(cfg.period);
    std::vector<std::vector<cplx>> out;
    out.reserve(window.size());
    for (const auto& block : window) {
        if (block.size() != cfg.harmonics)
            fail(ErrorKind::invalid_argument, "reconstruct_pc: block length differs from K");
        std::vector<cplx> path(u_grid.size());
        for (std::size_t i = 0; i < u_grid.size(); ++i) {
            cplx acc{0.0, 0.0};
            for (int k = 1; k <= cfg.harmonics; ++k) {
                const double ph = detail::basis_phase(k, u_grid[i], cfg.period);
                acc += block[k - 1] * cplx(std::cos(ph), std::sin(ph));
            }
            path[i] = acc * norm;
        }
        out.push_back(std::move(path));
    }
    return out;
}

struct SummabilityReport {
    double sum_norms = 0.0;           // sum_j ||a_j||
    double weighted_sum_squares = 0.0; // sum_j (j+1) ||a_j||^2
    bool pass = true;
    std::string message;
};

/// Finite-storage diagnostics for the weight conditions of each horizon. For
/// the infinite horizons the tail is judged by the growth of the partial sums
/// over the last tenth of the stored blocks (more than 1% growth fails).
inline SummabilityReport check_weight_summability(const FunctionalWeights& w) {
    SummabilityReport r;
    const int n = w.size();
    std::vector<double> norms(n), partial_sq(n), partial_abs(n);
    for (int j = 0; j < n; ++j) {
        norms[j] = w.blocks[j].norm();
        r.sum_norms += norms[j];
        r.weighted_sum_squares += (j + 1) * norms[j] * norms[j];
        partial_abs[j] = r.sum_norms;
        partial_sq[j] = r.weighted_sum_squares;
    }
    if (!std::isfinite(r.sum_norms) || !std::isfinite(r.weighted_sum_squares)) {
        r.pass = false;
        r.message = "non-finite weight norms";
        return r;
    }
    const bool infinite = w.horizon == Horizon::extrapolation || w.horizon == Horizon::filtering;
    if (!infinite || n < 10) return r;

    const int start = static_cast<int>(std::floor(0.9 * n)) - 1;
    auto grows = [&](const std::vector<double>& partial) {
        const double before = partial[std::max(start, 0)];
        const double after = partial[n - 1];
        return before > 0.0 && (after - before) > 0.01 * before;
    };
    if (w.horizon == Horizon::extrapolation) {
        if (grows(partial_sq) || grows(partial_abs)) {
            r.pass = false;
            r.message = "tail not decaying; condition (17) suspect";
        }
    } else if (grows(partial_abs)) {
        r.pass = false;
        r.message = "tail not decaying; condition (29) suspect";
    }
    return r;
}

/// Piecewise-linear interpolant of tabulated (t, a(t)) samples; zero outside
/// the tabulated range.
class TabulatedFunction {
public:
    TabulatedFunction(std::vector<double> t, std::vector<double> a)
        : t_(std::move(t)), a_(std::move(a)) {
        if (t_.size() != a_.size() || t_.size() < 2)
            fail(ErrorKind::invalid_input, "tabulated function needs >= 2 (t,a) pairs");
        for (std::size_t i = 0; i < t_.size(); ++i) {
            if (!std::isfinite(t_[i]) || !std::isfinite(a_[i]))
                fail(ErrorKind::invalid_input, "tabulated function: non-finite value");
            if (i > 0 && !(t_[i] > t_[i - 1]))
                fail(ErrorKind::invalid_input, "tabulated function: t must be increasing");
        }
    }

    cplx operator()(double t) const {
        if (t < t_.front() || t > t_.back()) return {0.0, 0.0};
        const auto it = std::upper_bound(t_.begin(), t_.end(), t);
        if (it == t_.end()) return {a_.back(), 0.0};
        const auto i = static_cast<std::size_t>(it - t_.begin());
        const double w = (t - t_[i - 1]) / (t_[i] - t_[i - 1]);
        return {a_[i - 1] + w * (a_[i] - a_[i - 1]), 0.0};
    }

private:
    std::vector<double> t_;
    std::vector<double> a_;
};

} // namespace pcwk

#endif // PCWK_LIFT_HPP
