#include "mrbee/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "mrbee/errors.hpp"

namespace mrbee {

bool is_symmetric(const Matrix& a, double rel_tol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

PsdProjection project_psd_report(const Matrix& a) {
    if (!is_symmetric(a, 1e-10)) {
        throw InputError("project_psd: input matrix is not symmetric");
    }
    PsdProjection out;
    if (a.size() == 0) {
        out.matrix = a;
        return out;
    }
    const Matrix sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    const Vector& lambda = eig.eigenvalues();
    out.min_eigenvalue = lambda.minCoeff();
    out.max_eigenvalue = lambda.maxCoeff();
    const double scale = lambda.cwiseAbs().maxCoeff();
    if (out.min_eigenvalue >= -1e-10 * scale) {
        out.matrix = a;
        return out;
    }
    out.repaired = true;
    const Vector clipped = lambda.cwiseMax(0.0);
    out.matrix = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
    return out;
}

Matrix project_psd(const Matrix& a) { return project_psd_report(a).matrix; }

Matrix pseudo_inverse_sym(const Matrix& a, double rel_tol) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
    const Vector& lambda = eig.eigenvalues();
    const double cutoff = rel_tol * lambda.cwiseAbs().maxCoeff();
    Vector inv(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        inv[i] = std::abs(lambda[i]) > cutoff ? 1.0 / lambda[i] : 0.0;
    }
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix sqrt_psd(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
    const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix inv_sqrt_pd(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()));
    if (eig.eigenvalues().minCoeff() <= 0.0) {
        throw EstimationError("inv_sqrt_pd: matrix is not positive definite");
    }
    const Vector root = eig.eigenvalues().cwiseSqrt().cwiseInverse();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double spectral_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

}  // namespace mrbee
