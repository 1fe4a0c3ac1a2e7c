#pragma once

#include "ccgeo/common.hpp"
#include "ccgeo/fields.hpp"
#include "ccgeo/linalg.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ccgeo {

namespace detail {

/// Numerical rank and an orthonormal basis of the column space of V.
struct RangeBasis {
    int rank = 0;
    Mat U;  // n x rank
};

inline RangeBasis range_basis(const Mat& V, double rank_tol) {
    Eigen::JacobiSVD<Mat> svd(V, Eigen::ComputeThinU);
    RangeBasis rb;
    if (svd.singularValues().size() == 0) return rb;
    const double smax = svd.singularValues()(0);
    for (long i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > rank_tol * smax) ++rb.rank;
    rb.U = svd.matrixU().leftCols(rb.rank);
    return rb;
}

/// Least-norm solution of V c = B through the rank-reduced full-row-rank
/// system U^T V c = U^T B. Returns c = 0 when the rank is zero.
inline Vec reduced_least_norm(const Mat& V, const RangeBasis& rb, const Vec& B) {
    if (rb.rank == 0) return Vec::Zero(V.cols());
    Mat A = rb.U.transpose() * V;
    return least_norm_solve(A, Vec(rb.U.transpose() * B));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Involutivity certification
// ---------------------------------------------------------------------------

struct InvolutivityReport {
    struct PairData {
        int i = 0, j = 0;               // 0-based frame indices, i < j
        Mat c;                          // n_samples x q least-norm coefficients
        std::vector<double> residuals;  // |[Yi,Yj](x) - V(x) c(x)| per sample
    };

    std::vector<Vec> sample_points;
    std::vector<PairData> pairs;
    double C1_hat = 0.0;         // max |c^k| over pairs, samples and polish points
    double max_residual = 0.0;
    double scale = 1.0;
    bool involutive = true;      // max_residual <= 1e-6 * scale
    double max_coeff_variance = 0.0;  // max over (pair,k) of Var_x c^k(x)
    // Best constant representative (per pair, global least squares) and its
    // worst residual; detects the finite-dimensional (constant-coefficient)
    // case even when the pointwise least-norm representative varies.
    double constant_fit_residual = 0.0;
    int rank_min = 0, rank_max = 0;
    bool rank_constant = true;
};

/// Expand every bracket [Y_i,Y_j](x) in the frame at each sample point as the
/// least-norm solution of the rank-reduced linear system on [Y_1(x)...Y_q(x)]
/// and report coefficients, residuals, and the coefficient bound C1_hat.
/// C1_hat is additionally polished by a compass search from the best sample
/// (the polish points count as extra samples).
inline InvolutivityReport check_involutivity(const Frame& frame, const std::vector<Vec>& samples,
                                             double rank_tol = 1e-9, bool polish_c1 = true) {
    const int q = frame.q();
    InvolutivityReport rep;
    rep.sample_points = samples;
    if (samples.empty()) return rep;

    std::vector<std::pair<int, int>> idx;
    std::vector<VectorField> brackets;
    for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j) {
            idx.emplace_back(i, j);
            brackets.push_back(lie_bracket(frame.fields[std::size_t(i)],
                                           frame.fields[std::size_t(j)]));
        }

    rep.pairs.resize(idx.size());
    rep.rank_min = frame.dim() + 1;
    rep.rank_max = -1;

    const long ns = long(samples.size());
    std::vector<Mat> frame_vals(samples.size());
    std::vector<detail::RangeBasis> bases(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
        frame_vals[s] = frame.values_at(samples[s]);
        bases[s] = detail::range_basis(frame_vals[s], rank_tol);
        rep.rank_min = std::min(rep.rank_min, bases[s].rank);
        rep.rank_max = std::max(rep.rank_max, bases[s].rank);
        rep.scale = std::max(rep.scale, frame_vals[s].cwiseAbs().maxCoeff());
    }
    rep.rank_constant = (rep.rank_min == rep.rank_max);

    for (std::size_t p = 0; p < idx.size(); ++p) {
        auto& pd = rep.pairs[p];
        pd.i = idx[p].first;
        pd.j = idx[p].second;
        pd.c = Mat::Zero(ns, q);
        pd.residuals.resize(samples.size());
        for (std::size_t s = 0; s < samples.size(); ++s) {
            const Vec B = brackets[p].eval(samples[s]);
            rep.scale = std::max(rep.scale, B.norm());
            const Vec c = detail::reduced_least_norm(frame_vals[s], bases[s], B);
            pd.c.row(long(s)) = c.transpose();
            pd.residuals[s] = (frame_vals[s] * c - B).norm();
            rep.max_residual = std::max(rep.max_residual, pd.residuals[s]);
            rep.C1_hat = std::max(rep.C1_hat, c.cwiseAbs().maxCoeff());
        }
        // coefficient variance across the grid
        for (int k = 0; k < q; ++k) {
            const double mean = pd.c.col(k).mean();
            const double var = (pd.c.col(k).array() - mean).square().sum() / double(ns);
            rep.max_coeff_variance = std::max(rep.max_coeff_variance, var);
        }
        // best constant representative: min-norm least squares on the stacked
        // system over all samples
        {
            const int n = frame.dim();
            Mat S(ns * n, q);
            Vec rhs(ns * n);
            for (long s = 0; s < ns; ++s) {
                S.middleRows(s * n, n) = frame_vals[std::size_t(s)];
                rhs.segment(s * n, n) = brackets[p].eval(samples[std::size_t(s)]);
            }
            Eigen::JacobiSVD<Mat> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
            svd.setThreshold(1e-12);
            const Vec cbar = svd.solve(rhs);
            for (long s = 0; s < ns; ++s)
                rep.constant_fit_residual =
                    std::max(rep.constant_fit_residual,
                             (frame_vals[std::size_t(s)] * cbar - rhs.segment(s * n, n)).norm());
        }
    }
    rep.involutive = rep.max_residual <= 1e-6 * rep.scale;

    if (polish_c1) {
        // Refine the coefficient bound: compass-search max_x max_{i,j,k}
        // |c^k(x)| from the best sample point, constrained to the bounding
        // box of the grid (the report surveys the sampled region; on systems
        // with unbounded coefficients an unconstrained search would diverge).
        Vec lo = samples.front(), hi = samples.front();
        for (const Vec& x : samples) {
            lo = lo.cwiseMin(x);
            hi = hi.cwiseMax(x);
        }
        auto cmax_at = [&](const Vec& x) {
            const Mat V = frame.values_at(x);
            const auto rb = detail::range_basis(V, rank_tol);
            double m = 0.0;
            for (std::size_t p = 0; p < idx.size(); ++p) {
                const Vec c = detail::reduced_least_norm(V, rb, brackets[p].eval(x));
                m = std::max(m, c.cwiseAbs().maxCoeff());
            }
            return m;
        };
        Vec best = samples.front();
        double best_val = -1.0;
        for (const Vec& x : samples) {
            const double v = cmax_at(x);
            if (v > best_val) {
                best_val = v;
                best = x;
            }
        }
        double step = 0.25 * (hi - lo).cwiseAbs().maxCoeff();
        for (int it = 0; it < 200 && step > 1e-10; ++it) {
            bool improved = false;
            for (int d = 0; d < frame.dim() && !improved; ++d) {
                for (double sgn : {1.0, -1.0}) {
                    Vec x = best;
                    x[d] = std::clamp(x[d] + sgn * step, lo[d], hi[d]);
                    const double v = cmax_at(x);
                    if (v > best_val) {
                        best_val = v;
                        best = x;
                        improved = true;
                        break;
                    }
                }
            }
            step *= improved ? 2.0 : 0.5;
        }
        rep.C1_hat = std::max(rep.C1_hat, best_val);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Wedge-maximal frames
// ---------------------------------------------------------------------------

struct MaximalFrame {
    Vec x;
    int p = 0;                // numerical rank of [Y_1(x) ... Y_q(x)]
    std::vector<int> I;       // 0-based column multi-index, increasing
    double wedge_norm = 0.0;  // |Y_I(x)|
    Mat coeffs;               // q x p: row k solves sum_a Y_{I[a]} b_k^a = Y_k
    bool exhaustive = true;   // false: greedy pivoting fallback was used
};

/// Select the multi-index I maximizing the wedge norm |Y_I(x)| over all
/// p-subsets (exhaustive when C(q,p) <= 1e5, greedy column pivoting beyond
/// that), and expand every Y_k in the selected basis. Maximality forces the
/// coefficient bound |b_k^a| <= 1 (a Cramer ratio of wedge norms). Ties are
/// broken toward the lexicographically smallest I.
inline MaximalFrame maximal_frame(const Frame& frame, const Vec& x, double rank_tol = 1e-9) {
    const int q = frame.q();
    const Mat V = frame.values_at(x);
    const auto rb = detail::range_basis(V, rank_tol);
    MaximalFrame out;
    out.x = x;
    out.p = rb.rank;
    if (out.p == 0) throw RankZeroError("maximal_frame: all frame fields vanish at x");

    if (binomial(q, out.p) <= 100000L) {
        std::vector<int> sub = first_subset(out.p);
        Mat cols(frame.dim(), out.p);
        do {
            for (int a = 0; a < out.p; ++a) cols.col(a) = V.col(sub[std::size_t(a)]);
            const double w = wedge_coordinates(cols).norm();
            if (w > out.wedge_norm * (1.0 + 1e-12)) {
                out.wedge_norm = w;
                out.I = sub;
            }
        } while (next_subset(sub, q));
    } else {
        // greedy volume-maximizing column pivoting (approximate for very
        // large C(q,p); all built-in systems stay in the exhaustive branch)
        out.exhaustive = false;
        Eigen::ColPivHouseholderQR<Mat> qr(V);
        std::vector<int> piv(std::size_t(out.p));
        for (int a = 0; a < out.p; ++a) piv[std::size_t(a)] = int(qr.colsPermutation().indices()(a));
        std::sort(piv.begin(), piv.end());
        out.I = piv;
        Mat cols(frame.dim(), out.p);
        for (int a = 0; a < out.p; ++a) cols.col(a) = V.col(out.I[std::size_t(a)]);
        out.wedge_norm = wedge_coordinates(cols).norm();
    }

    Mat VI(frame.dim(), out.p);
    for (int a = 0; a < out.p; ++a) VI.col(a) = V.col(out.I[std::size_t(a)]);
    Eigen::HouseholderQR<Mat> qr(VI);
    out.coeffs = Mat(q, out.p);
    for (int k = 0; k < q; ++k) out.coeffs.row(k) = qr.solve(V.col(k)).transpose();
    return out;
}

// ---------------------------------------------------------------------------
// Subunit norm and the frame metric
// ---------------------------------------------------------------------------

/// min{ |xi| : sum_j Y_j(y) xi_j = Z }, i.e. |[Y_1(y)...Y_q(y)]^+ Z|;
/// +infinity when Z is not in the range of the frame at y.
inline double subunit_norm(const Mat& frame_values, const Vec& Z, double range_tol = 1e-9) {
    const auto rb = detail::range_basis(frame_values, 1e-12);
    const double zn = Z.norm();
    const double out_of_range =
        rb.rank == 0 ? zn : (Z - rb.U * (rb.U.transpose() * Z)).norm();
    if (out_of_range > range_tol * std::max(1.0, zn))
        return std::numeric_limits<double>::infinity();
    if (rb.rank == 0) return 0.0;
    return detail::reduced_least_norm(frame_values, rb, Z).norm();
}

/// The inner product g(v,w) = <T^+ v, T^+ w> on the range of the frame map
/// T(xi) = sum_j Y_j xi_j. Throws NotInRangeError for vectors outside the
/// range.
inline double frame_metric_inner(const Mat& frame_values, const Vec& v, const Vec& w,
                                 double range_tol = 1e-9) {
    const auto rb = detail::range_basis(frame_values, 1e-12);
    for (const Vec* z : {&v, &w}) {
        const double d =
            rb.rank == 0 ? z->norm() : (*z - rb.U * (rb.U.transpose() * *z)).norm();
        if (d > range_tol * std::max(1.0, z->norm()))
            throw NotInRangeError("frame_metric_inner: vector not tangent to the orbit");
    }
    if (rb.rank == 0) return 0.0;
    const Vec cv = detail::reduced_least_norm(frame_values, rb, v);
    const Vec cw = detail::reduced_least_norm(frame_values, rb, w);
    return cv.dot(cw);
}

}  // namespace ccgeo
