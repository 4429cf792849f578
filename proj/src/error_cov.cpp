#include "mrbee/error_cov.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrbee/errors.hpp"

namespace mrbee {

ErrorCovariance ErrorCovariance::zero(Eigen::Index p) {
    ErrorCovariance out;
    out.full = Matrix::Zero(p + 1, p + 1);
    return out;
}

ErrorCovariance ErrorCovariance::from_blocks(const Matrix& WbWb, const Vector& Wbwa, double wawa) {
    const Eigen::Index p = WbWb.rows();
    if (WbWb.cols() != p || Wbwa.size() != p) throw InputError("error covariance blocks have inconsistent sizes");
    ErrorCovariance out;
    out.full.resize(p + 1, p + 1);
    out.full.topLeftCorner(p, p) = WbWb;
    out.full.col(p).head(p) = Wbwa;
    out.full.row(p).head(p) = Wbwa.transpose();
    out.full(p, p) = wawa;
    return out;
}

ErrorCovariance estimate_error_cov(const Matrix& z, const ErrorCovOptions& options) {
    const Eigen::Index M = z.rows();
    if (M < options.min_variants) {
        throw InputError("error covariance: " + std::to_string(M) + " null variants, at least " +
                         std::to_string(options.min_variants) + " required");
    }
    if (!z.allFinite()) throw InputError("error covariance: non-finite null-panel z-scores");
    Matrix second = (z.transpose() * z) / static_cast<double>(M);
    second = 0.5 * (second + second.transpose()).eval();
    const auto proj = project_psd_report(second);
    ErrorCovariance out;
    out.full = proj.matrix;
    out.M_used = M;
    out.repaired = proj.repaired;
    return out;
}

ErrorCovariance estimate_error_cov(const HarmonizedPanel& null_panel, const ErrorCovOptions& options) {
    const Eigen::Index p = null_panel.p();
    Matrix z(null_panel.m(), p + 1);
    z.leftCols(p) = null_panel.B_hat;
    z.col(p) = null_panel.alpha_hat;
    return estimate_error_cov(z, options);
}

ErrorCorrelation to_correlation(const ErrorCovariance& cov) {
    const Eigen::Index k = cov.full.rows();
    ErrorCorrelation out;
    out.R.resize(k, k);
    Vector inv_sd(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double d = cov.full(i, i);
        if (!(d > 0.0)) throw InputError("to_correlation: non-positive diagonal entry");
        inv_sd[i] = 1.0 / std::sqrt(d);
    }
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            out.R(i, j) = i == j ? 1.0 : std::clamp(cov.full(i, j) * inv_sd[i] * inv_sd[j], -1.0, 1.0);
        }
    }
    out.R = 0.5 * (out.R + out.R.transpose()).eval();
    out.R.diagonal().setOnes();
    return out;
}

ErrorCorrelation to_correlation(const ErrorCorrelation& corr) {
    ErrorCovariance cov;
    cov.full = corr.R;
    return to_correlation(cov);
}

}  // namespace mrbee
