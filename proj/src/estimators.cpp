#include "mrbee/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mrbee/errors.hpp"
#include "mrbee/stats.hpp"

namespace mrbee {
namespace {

void check_dims(const Matrix& B, const Vector& alpha) {
    if (B.rows() != alpha.size()) throw InputError("estimator: B and alpha have different row counts");
    if (B.cols() < 1) throw InputError("estimator: no exposures");
    if (B.rows() < B.cols()) {
        throw InputError("estimator: m = " + std::to_string(B.rows()) + " instruments for p = " +
                         std::to_string(B.cols()) + " exposures");
    }
}

void check_error_cov(const ErrorCovariance& ec, Eigen::Index p) {
    if (ec.full.rows() != p + 1 || ec.full.cols() != p + 1) {
        throw InputError("estimator: error covariance must be (p+1)x(p+1)");
    }
}

struct Solved {
    Vector theta;
    bool repaired = false;
};

// Root of H theta = g. H with a negative eigenvalue is clipped at zero and
// inverted with the pseudo-inverse; otherwise a Cholesky solve is used.
Solved solve_estimating(const Matrix& H, const Vector& g) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
    const Vector& lambda = eig.eigenvalues();
    Solved out;
    if (!(lambda.maxCoeff() > 0.0)) {
        throw EstimationError("Hessian has no positive eigenvalue (no identifiable signal)");
    }
    if (lambda.minCoeff() < 0.0) {
        out.repaired = true;
        const Matrix F = eig.eigenvectors() * lambda.cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
        out.theta = pseudo_inverse_sym(F) * g;
        return out;
    }
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() == Eigen::Success) {
        out.theta = llt.solve(g);
    } else {
        out.theta = pseudo_inverse_sym(H) * g;
    }
    return out;
}

Matrix repaired_hessian(const Matrix& H) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
    const Vector clipped = eig.eigenvalues().cwiseMax(0.0);
    if (!(clipped.maxCoeff() > 0.0)) {
        throw EstimationError("Hessian is zero after repair (no identifiable signal)");
    }
    return eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::IVW: return "IVW";
        case Method::MRBEE: return "MRBEE";
        case Method::MRBEE_iterative: return "MRBEE_iterative";
    }
    return "unknown";
}

void finalize_inference(CausalEstimate& est) {
    const Eigen::Index p = est.theta.size();
    est.se.resize(p);
    est.z.resize(p);
    est.pvalue.resize(p);
    for (Eigen::Index s = 0; s < p; ++s) {
        const double var = est.cov(s, s);
        est.se[s] = var > 0.0 ? std::sqrt(var) : 0.0;
        if (est.se[s] > 0.0) {
            est.z[s] = est.theta[s] / est.se[s];
        } else {
            est.z[s] = est.theta[s] == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), est.theta[s]);
        }
        est.pvalue[s] = stats::two_sided_normal_pvalue(est.z[s]);
    }
}

CausalEstimate fit_ivw(const Matrix& B, const Vector& alpha) {
    check_dims(B, alpha);
    const double m = static_cast<double>(B.rows());
    const Matrix H = (B.transpose() * B) / m;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().maxCoeff();
    if (!(lmax > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * lmax) {
        throw EstimationError("IVW: B^T B is rank deficient");
    }
    const Vector g = (B.transpose() * alpha) / m;
    CausalEstimate est;
    est.method = Method::IVW;
    est.m_used = B.rows();
    est.theta = solve_estimating(H, g).theta;
    const Vector resid = alpha - B * est.theta;
    const double df = static_cast<double>(std::max<Eigen::Index>(B.rows() - B.cols(), 1));
    const double sigma2 = resid.squaredNorm() / df;
    est.cov = sigma2 * (B.transpose() * B).inverse();
    est.cov = 0.5 * (est.cov + est.cov.transpose()).eval();
    finalize_inference(est);
    return est;
}

CausalEstimate fit_ivw(const HarmonizedPanel& panel) { return fit_ivw(panel.B_hat, panel.alpha_hat); }

ScoreReport score_ivw(const Vector& theta, const Matrix& B, const Vector& alpha) {
    check_dims(B, alpha);
    if (theta.size() != B.cols()) throw InputError("score: theta has wrong length");
    const double m = static_cast<double>(B.rows());
    ScoreReport out;
    out.score = -(B.transpose() * (alpha - B * theta)) / m;
    out.hessian = (B.transpose() * B) / m;
    return out;
}

ScoreReport score_ivw(const Vector& theta, const HarmonizedPanel& panel) {
    return score_ivw(theta, panel.B_hat, panel.alpha_hat);
}

Vector solve_mrbee(const Matrix& B, const Vector& alpha, const ErrorCovariance& error_cov, bool* repaired) {
    check_dims(B, alpha);
    check_error_cov(error_cov, B.cols());
    const double m = static_cast<double>(B.rows());
    const Matrix H = (B.transpose() * B) / m - error_cov.sigma_WbWb();
    const Vector g = (B.transpose() * alpha) / m - error_cov.sigma_Wbwa();
    auto solved = solve_estimating(H, g);
    if (repaired) *repaired = solved.repaired;
    return solved.theta;
}

CausalEstimate fit_mrbee(const Matrix& B, const Vector& alpha, const ErrorCovariance& error_cov) {
    CausalEstimate est;
    est.method = Method::MRBEE;
    est.m_used = B.rows();
    est.theta = solve_mrbee(B, alpha, error_cov, &est.hessian_repaired);
    est.cov = sandwich_cov(B, alpha, error_cov, est.theta);
    finalize_inference(est);
    return est;
}

CausalEstimate fit_mrbee(const HarmonizedPanel& panel, const ErrorCovariance& error_cov) {
    return fit_mrbee(panel.B_hat, panel.alpha_hat, error_cov);
}

ScoreReport score_bee(const Vector& theta, const Matrix& B, const Vector& alpha, const ErrorCovariance& error_cov) {
    check_error_cov(error_cov, B.cols());
    ScoreReport out = score_ivw(theta, B, alpha);
    out.score -= error_cov.sigma_WbWb() * theta - error_cov.sigma_Wbwa();
    out.hessian -= error_cov.sigma_WbWb();
    return out;
}

ScoreReport score_bee(const Vector& theta, const HarmonizedPanel& panel, const ErrorCovariance& error_cov) {
    return score_bee(theta, panel.B_hat, panel.alpha_hat, error_cov);
}

Matrix sandwich_cov(const Matrix& B, const Vector& alpha, const ErrorCovariance& error_cov, const Vector& theta) {
    check_dims(B, alpha);
    check_error_cov(error_cov, B.cols());
    if (theta.size() != B.cols() || !theta.allFinite()) throw InputError("sandwich: theta must be finite with length p");
    const double m = static_cast<double>(B.rows());
    const Matrix Sigma = error_cov.sigma_WbWb();
    const Matrix F = repaired_hessian((B.transpose() * B) / m - Sigma);
    const Matrix F_pinv = pseudo_inverse_sym(F);

    // Row j of S is the per-variant score S_j.
    const Vector resid = alpha - B * theta;
    const Vector offset = error_cov.sigma_Wbwa() - Sigma * theta;
    Matrix S = -(B.array().colwise() * resid.array()).matrix();
    S.rowwise() += offset.transpose();
    const Matrix V = (S.transpose() * S) / m;

    Matrix cov = F_pinv * V * F_pinv / m;
    return 0.5 * (cov + cov.transpose());
}

Matrix sandwich_cov(const HarmonizedPanel& panel, const ErrorCovariance& error_cov, const Vector& theta) {
    return sandwich_cov(panel.B_hat, panel.alpha_hat, error_cov, theta);
}

}  // namespace mrbee
