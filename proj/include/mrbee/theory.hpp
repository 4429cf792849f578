#ifndef MRBEE_THEORY_HPP
#define MRBEE_THEORY_HPP

// Closed-form moments and large-sample predictions for the generative model
//   x = B^T g + u,  y = theta^T x + v,  beta_j ~ N(0, Psi_bb / m)
// on the per-allele scale with standardized genotypes.
//
// Per-trait vectors (n, overlap) use index 0 for the outcome. Limit
// matrices Psi_{W x w} are evaluated as n_min times the finite-n error
// covariance. vec() is column-major.

#include <optional>
#include <string>

#include "mrbee/error_cov.hpp"
#include "mrbee/linalg.hpp"

namespace mrbee {

struct PopulationSpec {
    Eigen::Index p = 1;
    Vector theta;
    Matrix Psi_bb;
    Matrix Sigma_uu;
    Vector sigma_uv;
    double sigma_vv = 0.0;
    Vector n;                       // p+1, index 0 = outcome
    std::optional<Matrix> overlap;  // (p+1)x(p+1) n_sk
    Eigen::Index m = 0;
};

struct DerivedMoments {
    Matrix Sigma_xx;
    Vector sigma_xy;
    double sigma_yy = 0.0;
    Matrix Delta_xx;  // n_js / (n_j n_s); empty without overlap
    Vector delta_xy;  // n_0j / (n_0 n_j); empty without overlap
};

// Strict mode requires Psi_bb and Sigma_uu PD and sigma_vv > 0; relaxed mode
// (simulation) accepts PSD noise. Throws InputError.
void validate_spec(const PopulationSpec& spec, bool strict = true);

DerivedMoments derive_moments(const PopulationSpec& spec);

ErrorCovariance error_cov_theoretical(const PopulationSpec& spec);

struct ScoreExpectation {
    Vector total;
    Vector measurement;
    Vector confounder;
};

// Expected IVW score at the true theta: total = measurement - confounder.
ScoreExpectation ivw_score_expectation(const PopulationSpec& spec);

struct SpecialFraction {
    double value = 0.0;
    bool feasible = false;  // value within [0, 1]
};

SpecialFraction special_overlap_fraction(const PopulationSpec& spec);

enum class Regime { I, II, III, IV };

Regime parse_regime(const std::string& text);
std::string regime_name(Regime r);

struct IvwAsymptotics {
    Vector bias;                // regimes i, ii: scaled bias; iii, iv: plim(theta_hat) - theta
    std::optional<Matrix> cov;  // covariance of theta_hat in regimes i and ii
    std::string rate;
};

IvwAsymptotics ivw_asymptotics(const PopulationSpec& spec, Regime regime, std::optional<double> c0 = std::nullopt);

struct MrbeeAsymptotics {
    Matrix limit_cov;   // covariance of rate * (theta_hat - theta)
    double rate = 0.0;  // sqrt(n_min) or sqrt(n_min^2 / m)
    Matrix cov;         // limit_cov / rate^2
    std::string rate_text;
};

MrbeeAsymptotics mrbee_asymptotics(const PopulationSpec& spec, Regime regime, std::optional<double> c0 = std::nullopt);

// d^2 x d^2 permutation with K vec(A) = vec(A^T).
Matrix build_commutation_matrix(Eigen::Index d);

Matrix kronecker(const Matrix& a, const Matrix& b);

// [v^T (x) I_sel] (I + K) (Psi (x) Psi) [v^T (x) I_sel]^T with v = (theta, -1)
// and I_sel the first p rows of I_{p+1}.
Matrix compute_sigma_bc(const PopulationSpec& spec, const Vector& theta);
Matrix compute_sigma_bc(const Matrix& psi_full, const Vector& theta);

// Limit form n_min * (error covariance), exposures first then outcome.
Matrix psi_error_limit(const PopulationSpec& spec);
double n_min(const PopulationSpec& spec);
double psi_theta(const PopulationSpec& spec);

struct HeritabilitySpec {
    Vector exposure_h2;            // length p
    double outcome_h2 = 0.15;
    double psi_diag = 1.0;
    double genetic_ar1 = 0.0;
    double noise_ar1 = 0.5;        // AR(1) correlation across (u_1..u_p, v)
};

// Builds Psi_bb = psi_diag * AR1(genetic_ar1) and solves the noise variances
// so that Psi_ss / Sigma_xx,ss = exposure_h2[s] and
// theta^T Psi theta / sigma_yy = outcome_h2.
PopulationSpec spec_from_heritability(const Vector& theta, const HeritabilitySpec& h, const Vector& n,
                                      std::optional<Matrix> overlap, Eigen::Index m);

Matrix ar1_matrix(Eigen::Index d, double rho);

Matrix full_overlap(const Vector& n);
Matrix no_overlap(const Vector& n);
// Outcome shares round(fraction * n_0) individuals with every exposure;
// exposures overlap each other completely.
Matrix outcome_fraction_overlap(const Vector& n, double fraction);

}  // namespace mrbee

#endif  // MRBEE_THEORY_HPP
