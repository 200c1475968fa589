#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "mlx/grid.hpp"

namespace mlx {

/// Exponential-floor regularization lambda -> lambda + eps * exp(-lambda / eps).
struct RegularizationPolicy {
    double epsilon = 1e-10;

    double floor(double lambda) const { return lambda + epsilon * std::exp(-lambda / epsilon); }
};

/// Largest |H - H^dagger| entry relative to max(1, max |H|).
inline double hermiticity_defect(const CMatrix& h) {
    if (h.size() == 0) return 0.0;
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    return (h - h.adjoint()).cwiseAbs().maxCoeff() / scale;
}

struct RegularizedInverse {
    CMatrix inverse;
    double min_eigenvalue = 0.0;
    bool regularized = false;  // min eigenvalue fell below epsilon
};

inline RegularizedInverse regularized_inverse(const CMatrix& rho, const RegularizationPolicy& policy,
                                              double hermiticity_tol = 1e-10) {
    if (rho.rows() != rho.cols()) throw std::invalid_argument("regularized_inverse: matrix must be square");
    if (!(policy.epsilon > 0.0)) throw std::invalid_argument("regularized_inverse: epsilon must be positive");
    if (hermiticity_defect(rho) > hermiticity_tol)
        throw std::invalid_argument("regularized_inverse: input is not Hermitian (defect " +
                                    std::to_string(hermiticity_defect(rho)) + ")");
    const CMatrix h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
    const RVector& w = es.eigenvalues();
    RVector inv(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) inv(i) = 1.0 / policy.floor(w(i));
    RegularizedInverse out;
    out.inverse = es.eigenvectors() * inv.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    out.min_eigenvalue = w.size() ? w.minCoeff() : 0.0;
    out.regularized = out.min_eigenvalue < policy.epsilon;
    return out;
}

/// Overlap matrix S(i, j) = weight * <row_i | row_j>.
inline CMatrix row_overlap(const CMatrix& rows, double weight = 1.0) {
    return weight * (rows.conjugate() * rows.transpose());
}

/// max |S - 1| of the rows under the weighted inner product.
inline double gram_defect(const CMatrix& rows, double weight = 1.0) {
    if (rows.rows() == 0) return 0.0;
    const CMatrix s = row_overlap(rows, weight);
    return (s - CMatrix::Identity(s.rows(), s.cols())).cwiseAbs().maxCoeff();
}

/// Symmetric (Loewdin) orthonormalization of the rows: rows <- S^{-1/2} rows.
inline void lowdin_orthonormalize(CMatrix& rows, double weight = 1.0) {
    const CMatrix s = row_overlap(rows, weight);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (s + s.adjoint()));
    const RVector& w = es.eigenvalues();
    if (w.minCoeff() <= 0.0) throw std::runtime_error("lowdin_orthonormalize: rows are linearly dependent");
    const RVector isq = w.cwiseSqrt().cwiseInverse();
    // S^{-1/2} acts on row index; S(i,j) = <i|j> so the rows transform with conj.
    const CMatrix sinv = es.eigenvectors() * isq.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    rows = sinv.conjugate() * rows;
}

/// Modified Gram-Schmidt on rows (order-preserving; used for seeding).
inline void gram_schmidt(CMatrix& rows, double weight = 1.0) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            const cplx ov = weight * rows.row(j).dot(rows.row(i));
            rows.row(i) -= ov * rows.row(j);
        }
        const double n = std::sqrt(weight * rows.row(i).squaredNorm());
        if (n < 1e-14) throw std::runtime_error("gram_schmidt: rows are linearly dependent");
        rows.row(i) /= n;
    }
}

}  // namespace mlx
