#pragma once

#include "ccgeo/common.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace ccgeo {

namespace detail {

/// Smallest eigenvalue of a symmetric positive semi-definite matrix, without
/// bidiagonalization: an inverse-iteration warm start gives an upper bound
/// (the Rayleigh quotient never undershoots lambda_min), then bisection on
/// the Cholesky positive-definiteness predicate pins the value. The
/// predicate is monotone in the shift, so the bracket is certified even for
/// clustered spectra. Desk-scale sizes only.
inline double lambda_min_inverse_iteration(const Mat& M) {
    const long p = M.rows();
    if (p == 1) return std::max(0.0, M(0, 0));
    const double scale = M.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;

    double hi = M.diagonal().minCoeff();  // a Rayleigh quotient, hence >= lambda_min
    Eigen::LDLT<Mat> ldlt(M);
    if (ldlt.info() == Eigen::Success) {
        Vec v = Vec::Ones(p);
        for (long i = 0; i < p; ++i) v[i] += 0.5 * std::cos(double(i + 1));
        v.normalize();
        for (int it = 0; it < 8; ++it) {
            Vec w = ldlt.solve(v);
            if (!w.allFinite() || w.norm() == 0.0) break;
            v = w.normalized();
            hi = std::min(hi, v.dot(M * v));
        }
    }
    hi = std::max(hi, 0.0);

    const auto is_pd_below = [&](double sigma) {
        Eigen::LLT<Mat> llt(M - sigma * Mat::Identity(p, p));
        return llt.info() == Eigen::Success;  // sigma < lambda_min
    };
    double lo = 0.0;
    if (!is_pd_below(0.0)) return 0.0;  // numerically singular
    for (int it = 0; it < 120; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (is_pd_below(mid))
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 2e-16 * std::max(hi, scale * 1e-3)) break;
    }
    return 0.5 * (lo + hi);
}

inline double default_rank_tolerance(const Mat& A) {
    const double maxabs = A.size() ? A.cwiseAbs().maxCoeff() : 0.0;
    return 1e-12 * maxabs * double(A.cols());
}

/// Estimate of sigma_min(A) for a wide matrix given the Householder QR of
/// A^T. Combines sqrt(lambda_min(A A^T)) with min |R_ii|; the latter is an
/// upper bound on sigma_min and catches exact deficiency that the squared
/// route cannot resolve (its noise floor is sqrt(eps)*sigma_max).
inline double sigma_min_estimate(const Mat& A, const Eigen::HouseholderQR<Mat>& qr) {
    const long p = A.rows();
    double min_rii = std::numeric_limits<double>::infinity();
    for (long i = 0; i < p; ++i) min_rii = std::min(min_rii, std::abs(qr.matrixQR()(i, i)));
    return std::min(std::sqrt(lambda_min_inverse_iteration(A * A.transpose())), min_rii);
}

}  // namespace detail

struct PinvResult {
    Mat pinv;             ///< cols x rows right inverse
    double sigma_min;     ///< smallest singular value of the input
    double op_norm_pinv;  ///< operator norm of pinv (= 1/sigma_min)
};

/// Moore-Penrose pseudoinverse of a full-row-rank matrix (rows <= cols),
/// computed from the Householder QR factorization of the transpose:
/// A^T = QR  =>  A^+ = Q R^{-T}.
///
/// Throws RankDeficientError when sigma_min(A) falls below rank_tol
/// (default 1e-12 * max|entry| * cols).
inline PinvResult pseudoinverse(const Mat& A, double rank_tol = -1.0) {
    const long p = A.rows(), q = A.cols();
    if (p < 1 || q < 1 || p > q)
        throw DimensionMismatchError("pseudoinverse: need 1 <= rows <= cols");
    if (rank_tol < 0.0) rank_tol = detail::default_rank_tolerance(A);

    Eigen::HouseholderQR<Mat> qr(A.transpose());
    const double sigma_min = detail::sigma_min_estimate(A, qr);
    if (!(sigma_min > rank_tol)) throw RankDeficientError(sigma_min, "pseudoinverse");

    Mat Q = qr.householderQ() * Mat::Identity(q, p);
    Mat R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    // A^+ = Q R^{-T}; solve R^T Z = I columnwise.
    Mat pinv = Q * R.transpose().triangularView<Eigen::Lower>().solve(Mat::Identity(p, p));

    Eigen::JacobiSVD<Mat> svd(pinv);
    return PinvResult{std::move(pinv), sigma_min, svd.singularValues()(0)};
}

/// Least-norm solution of A x = y for full-row-rank A: x = A^+ y, the unique
/// solution orthogonal to ker A.
inline Vec least_norm_solve(const Mat& A, const Vec& y, double rank_tol = -1.0) {
    if (y.size() != A.rows())
        throw DimensionMismatchError("least_norm_solve: rhs length != rows");
    if (rank_tol < 0.0) rank_tol = detail::default_rank_tolerance(A);
    const long p = A.rows(), q = A.cols();
    if (p < 1 || q < 1 || p > q)
        throw DimensionMismatchError("least_norm_solve: need 1 <= rows <= cols");

    Eigen::HouseholderQR<Mat> qr(A.transpose());
    const double sigma_min = detail::sigma_min_estimate(A, qr);
    if (!(sigma_min > rank_tol)) throw RankDeficientError(sigma_min, "least_norm_solve");

    Mat Q = qr.householderQ() * Mat::Identity(q, p);
    Mat R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    return Q * R.transpose().triangularView<Eigen::Lower>().solve(y);
}

/// Checks the operator-norm identity |A^+|^{-1} = min_{|y|=1} |A^T y| by two
/// independent routes: lhs from the SVD of the computed pseudoinverse, rhs as
/// sqrt(lambda_min(A A^T)) from inverse iteration.
inline std::pair<double, double> pinv_op_norm_identity(const Mat& A) {
    PinvResult r = pseudoinverse(A);
    const double lhs = 1.0 / r.op_norm_pinv;
    const double rhs = std::sqrt(detail::lambda_min_inverse_iteration(A * A.transpose()));
    return {lhs, rhs};
}

/// Pluecker (wedge) coordinates of the columns of V (n x p, p <= n): the p x p
/// minors in lexicographic row-subset order. The Euclidean norm of the result
/// is the p-volume of the column parallelepiped; the vector is zero iff the
/// columns are dependent.
inline Vec wedge_coordinates(const Mat& V) {
    const int n = int(V.rows()), p = int(V.cols());
    if (p > n) throw DimensionMismatchError("wedge_coordinates: need cols <= rows");
    Vec out(binomial(n, p));
    std::vector<int> rows = first_subset(p);
    long idx = 0;
    Mat sub(p, p);
    do {
        for (int i = 0; i < p; ++i) sub.row(i) = V.row(rows[i]);
        out[idx++] = sub.determinant();
    } while (next_subset(rows, n));
    return out;
}

}  // namespace ccgeo
