#ifndef MRBEE_PLEIOTROPY_HPP
#define MRBEE_PLEIOTROPY_HPP

#include <string>
#include <vector>

#include "mrbee/error_cov.hpp"
#include "mrbee/estimators.hpp"
#include "mrbee/gwas_io.hpp"

namespace mrbee {

struct PleiotropyReport {
    Vector gamma_hat;
    Vector var_eps;
    Vector t_stat;
    Vector pvalue;
    std::vector<Eigen::Index> flagged;  // ascending
};

// Standardized: residuals on z-scores with unit per-trait SEs.
// Raw: residuals on per-allele effects with SE_j = diag(SE_B row, SE_alpha).
enum class EffectScale { Standardized, Raw };

PleiotropyReport residual_test(const HarmonizedPanel& panel, const Vector& theta, const ErrorCorrelation& error_corr,
                               EffectScale scale = EffectScale::Standardized);

// Benjamini-Hochberg step-up at level q; ascending indices.
std::vector<Eigen::Index> fdr_select(const Vector& pvalues, double q);

// Indices with t > c0 * ln(m), m = t_stat.size(); ascending.
std::vector<Eigen::Index> log_m_select(const Vector& t_stat, double c0);

struct OutlierRule {
    enum class Kind { FDR, LogM };
    Kind kind = Kind::FDR;
    double q = 0.05;
    double c0 = 3.0;
};

std::vector<Eigen::Index> select_outliers(const PleiotropyReport& report, const OutlierRule& rule);

struct IterativeConfig {
    OutlierRule rule;
    int max_iter = 30;
    double tol = 1e-6;
};

struct IterationTrace {
    Vector theta;
    std::size_t outlier_count = 0;
};

struct IterativeFit {
    CausalEstimate estimate;
    std::vector<Eigen::Index> outlier_indices;  // rows of the IV panel, ascending
    std::vector<std::string> outliers;          // variant ids, empty when the panel has none
    std::vector<int> iteration_flagged;         // per IV, first iteration flagged (0 = never)
    PleiotropyReport final_report;              // residual test at the final estimate
    int iterations = 0;
    bool converged = false;
    std::vector<IterationTrace> trace;
};

// Alternates MRBEE on the current inliers with the residual test on every
// original IV. Stops once the flagged set repeats and theta moves less than
// tol in max-norm, or after max_iter rounds; then refits on the inliers.
IterativeFit fit_mrbee_iterative(const HarmonizedPanel& iv_panel, const ErrorCovariance& error_cov,
                                 const IterativeConfig& config = {});
IterativeFit fit_mrbee_iterative(const PanelSelection& selection, const ErrorCovariance& error_cov,
                                 const IterativeConfig& config = {});

}  // namespace mrbee

#endif  // MRBEE_PLEIOTROPY_HPP
