#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "snode/common.hpp"

namespace snode {

struct SvdResult {
    MatrixXcd U;       // m x k, orthonormal columns
    VectorXd sigma;    // k, non-negative, descending
    MatrixXcd V;       // n x k, orthonormal columns
};

/// Thin SVD of a complex matrix: M = U diag(sigma) V^H.
inline SvdResult complex_svd(const MatrixXcd& M) {
    require(M.rows() > 0 && M.cols() > 0, "complex_svd: empty matrix");
    require(all_finite(M), "complex_svd: matrix must be finite");
    Eigen::JacobiSVD<MatrixXcd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) {
        throw NumericalError("complex_svd: SVD did not converge");
    }
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

inline bool is_hermitian(const MatrixXcd& M, double rel_tol = 1e-12) {
    if (M.rows() != M.cols()) return false;
    const double scale = std::max(1.0, M.norm());
    return (M - M.adjoint()).norm() <= rel_tol * scale;
}

/// Nearest Hermitian PSD matrix: symmetrize, then clamp negative eigenvalues
/// to 0. Inputs that are already PSD come back as their symmetrization with
/// no eigenvector round trip, bit for bit.
inline MatrixXcd hermitian_psd_project(const MatrixXcd& M) {
    require(M.rows() == M.cols(), "hermitian_psd_project: matrix must be square");
    const MatrixXcd H = 0.5 * (M + M.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(H);
    if (es.info() != Eigen::Success) {
        throw NumericalError("hermitian_psd_project: eigendecomposition failed");
    }
    if (es.eigenvalues().minCoeff() >= 0.0) return H;
    VectorXd evals = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().adjoint();
}

/// Real symmetric version, used for real-lift covariances. PSD inputs come
/// back as their symmetrization unchanged, which keeps covariance updates
/// bit-identical across code paths that only symmetrize.
inline MatrixXd symmetric_psd_project(const MatrixXd& M) {
    require(M.rows() == M.cols(), "symmetric_psd_project: matrix must be square");
    const MatrixXd S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    if (es.info() != Eigen::Success) {
        throw NumericalError("symmetric_psd_project: eigendecomposition failed");
    }
    if (es.eigenvalues().minCoeff() >= 0.0) return S;
    VectorXd evals = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
}

/// Symmetric PSD square root factor L with L L^T == M (eigenvalue based).
inline MatrixXd symmetric_sqrt(const MatrixXd& M) {
    require(M.rows() == M.cols(), "symmetric_sqrt: matrix must be square");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()));
    if (es.info() != Eigen::Success) {
        throw NumericalError("symmetric_sqrt: eigendecomposition failed");
    }
    VectorXd evals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace snode
