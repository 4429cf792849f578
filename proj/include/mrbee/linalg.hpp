#ifndef MRBEE_LINALG_HPP
#define MRBEE_LINALG_HPP

#include <Eigen/Dense>

namespace mrbee {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// True when |A - A^T| <= rel_tol * max|A| entrywise.
bool is_symmetric(const Matrix& a, double rel_tol = 1e-12);

struct PsdProjection {
    Matrix matrix;
    bool repaired = false;
    double min_eigenvalue = 0.0;  // of the input
    double max_eigenvalue = 0.0;
};

/// Spectral repair: negative eigenvalues are clipped to zero. Inputs whose
/// smallest eigenvalue is >= -1e-10 * (largest |eigenvalue|) are returned
/// unchanged, which makes the projection exactly idempotent.
/// Throws InputError for non-symmetric input.
PsdProjection project_psd_report(const Matrix& a);
Matrix project_psd(const Matrix& a);

/// Moore-Penrose inverse of a symmetric matrix; eigenvalues with magnitude
/// below rel_tol * max|eigenvalue| are treated as zero.
Matrix pseudo_inverse_sym(const Matrix& a, double rel_tol = 1e-10);

/// Symmetric square root (eigenvalues clipped at zero). Used to draw
/// correlated normals from possibly singular covariances.
Matrix sqrt_psd(const Matrix& a);

/// Inverse symmetric square root; requires a positive definite input.
Matrix inv_sqrt_pd(const Matrix& a);

/// Largest singular value.
double spectral_norm(const Matrix& a);

}  // namespace mrbee

#endif  // MRBEE_LINALG_HPP
