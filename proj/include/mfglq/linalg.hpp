#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace mfglq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// The matrix norm used throughout the condition theory and the convergence
/// constants: sqrt(tr(A^T A)).
inline double mat_norm(const MatrixXd& a) { return a.norm(); }

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Ascending eigenvalues of a symmetric matrix. Rejects inputs that are not
/// symmetric within 1e-10 (relative to the largest entry) or not finite.
inline VectorXd eig_sym(const MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("eig_sym: matrix must be square");
    if (!m.allFinite()) throw std::invalid_argument("eig_sym: non-finite entries");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::invalid_argument("eig_sym: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

/// Descending singular values.
inline VectorXd singular_values(const MatrixXd& m) {
    if (!m.allFinite()) throw std::invalid_argument("singular_values: non-finite entries");
    Eigen::JacobiSVD<MatrixXd> svd(m);
    return svd.singularValues();
}

inline double lambda_min(const MatrixXd& sym) { return eig_sym(symmetrize(sym)).minCoeff(); }
inline double lambda_max(const MatrixXd& sym) { return eig_sym(symmetrize(sym)).maxCoeff(); }
inline double sigma_max(const MatrixXd& m) { return m.size() == 0 ? 0.0 : singular_values(m)(0); }
inline double sigma_min(const MatrixXd& m) {
    VectorXd s = singular_values(m);
    return s(s.size() - 1);
}

/// A matrix counts as positive definite when lambda_min > 1e-12 * max(1, lambda_max).
inline bool is_positive_definite(const MatrixXd& sym) {
    VectorXd ev = eig_sym(symmetrize(sym));
    return ev.minCoeff() > 1e-12 * std::max(1.0, ev.maxCoeff());
}

inline bool is_psd(const MatrixXd& sym) {
    VectorXd ev = eig_sym(symmetrize(sym));
    return ev.minCoeff() >= -1e-12 * std::max(1.0, std::abs(ev.maxCoeff()));
}

/// Symmetric square root via eigendecomposition; input symmetrized first to
/// absorb roundoff. Throws if any eigenvalue is materially negative.
inline MatrixXd sqrt_sym(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m));
    VectorXd ev = es.eigenvalues();
    const double tol = -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    VectorXd s(ev.size());
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) < tol) throw std::runtime_error("sqrt_sym: matrix is not positive semidefinite");
        s(i) = std::sqrt(std::max(0.0, ev(i)));
    }
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

/// Inverse symmetric square root M^{-1/2}; requires M positive definite.
inline MatrixXd inv_sqrt_sym(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m));
    VectorXd ev = es.eigenvalues();
    const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    VectorXd s(ev.size());
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) <= tol) throw std::runtime_error("inv_sqrt_sym: matrix is not positive definite");
        s(i) = 1.0 / std::sqrt(ev(i));
    }
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

/// Reciprocal condition number sigma_min/sigma_max (0 for a zero matrix).
inline double rcond(const MatrixXd& m) {
    VectorXd s = singular_values(m);
    const double smax = s(0);
    if (smax == 0.0) return 0.0;
    return s(s.size() - 1) / smax;
}

/// Solves A x = b, throwing when A is numerically singular
/// (reciprocal condition number < 1e-10).
inline MatrixXd solve_checked(const MatrixXd& a, const MatrixXd& b, const char* what) {
    if (rcond(a) < 1e-10) throw std::runtime_error(std::string(what) + ": matrix numerically singular");
    return a.partialPivLu().solve(b);
}

} // namespace mfglq
