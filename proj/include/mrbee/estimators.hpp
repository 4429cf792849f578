#ifndef MRBEE_ESTIMATORS_HPP
#define MRBEE_ESTIMATORS_HPP

#include <string>

#include "mrbee/error_cov.hpp"
#include "mrbee/gwas_io.hpp"
#include "mrbee/linalg.hpp"

namespace mrbee {

enum class Method { IVW, MRBEE, MRBEE_iterative };

std::string method_name(Method m);

struct CausalEstimate {
    Vector theta;
    Matrix cov;
    Vector se;
    Vector z;
    Vector pvalue;
    Method method = Method::IVW;
    Eigen::Index m_used = 0;
    bool hessian_repaired = false;
};

struct ScoreReport {
    Vector score;
    Matrix hessian;
};

// Fills se, z and pvalue from theta and cov. A zero se gives z = 0 when
// theta is 0 and an infinite z otherwise.
void finalize_inference(CausalEstimate& est);

// All estimators work on the z-score scale: B is m x p, alpha has length m.
CausalEstimate fit_ivw(const Matrix& B, const Vector& alpha);
CausalEstimate fit_ivw(const HarmonizedPanel& panel);

ScoreReport score_ivw(const Vector& theta, const Matrix& B, const Vector& alpha);
ScoreReport score_ivw(const Vector& theta, const HarmonizedPanel& panel);

// Point estimate only; `repaired` reports whether H needed eigenvalue
// clipping. Shares its linear solve with fit_ivw.
Vector solve_mrbee(const Matrix& B, const Vector& alpha, const ErrorCovariance& error_cov, bool* repaired = nullptr);

CausalEstimate fit_mrbee(const Matrix& B, const Vector& alpha, const ErrorCovariance& error_cov);
CausalEstimate fit_mrbee(const HarmonizedPanel& panel, const ErrorCovariance& error_cov);

ScoreReport score_bee(const Vector& theta, const Matrix& B, const Vector& alpha, const ErrorCovariance& error_cov);
ScoreReport score_bee(const Vector& theta, const HarmonizedPanel& panel, const ErrorCovariance& error_cov);

// Covariance of the MRBEE estimate: F+ V F+ / m with F the repaired
// Hessian and V the mean outer product of per-variant scores.
Matrix sandwich_cov(const Matrix& B, const Vector& alpha, const ErrorCovariance& error_cov, const Vector& theta);
Matrix sandwich_cov(const HarmonizedPanel& panel, const ErrorCovariance& error_cov, const Vector& theta);

}  // namespace mrbee

#endif  // MRBEE_ESTIMATORS_HPP
