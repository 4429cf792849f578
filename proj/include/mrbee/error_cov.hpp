#ifndef MRBEE_ERROR_COV_HPP
#define MRBEE_ERROR_COV_HPP

#include "mrbee/gwas_io.hpp"
#include "mrbee/linalg.hpp"

namespace mrbee {

// Joint covariance of the summary-statistic estimation errors.
// Trait order inside `full`: exposures 1..p first, outcome last.
struct ErrorCovariance {
    Matrix full;
    Eigen::Index M_used = 0;
    bool repaired = false;

    Eigen::Index p() const { return full.rows() - 1; }
    Matrix sigma_WbWb() const { return full.topLeftCorner(p(), p()); }
    Vector sigma_Wbwa() const { return full.col(p()).head(p()); }
    double sigma_wawa() const { return full(p(), p()); }

    static ErrorCovariance zero(Eigen::Index p);
    static ErrorCovariance from_blocks(const Matrix& WbWb, const Vector& Wbwa, double wawa);
};

struct ErrorCorrelation {
    Matrix R;  // same trait order as ErrorCovariance::full
};

struct ErrorCovOptions {
    Eigen::Index min_variants = 30;
};

// Second moment about zero of the null-panel z-score vectors
// (beta_1..beta_p, alpha), followed by PSD repair when needed.
ErrorCovariance estimate_error_cov(const HarmonizedPanel& null_panel, const ErrorCovOptions& options = {});

// Same estimator on an M x (p+1) matrix of z-score rows.
ErrorCovariance estimate_error_cov(const Matrix& z, const ErrorCovOptions& options = {});

ErrorCorrelation to_correlation(const ErrorCovariance& cov);
ErrorCorrelation to_correlation(const ErrorCorrelation& corr);

}  // namespace mrbee

#endif  // MRBEE_ERROR_COV_HPP
