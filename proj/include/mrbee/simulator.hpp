#ifndef MRBEE_SIMULATOR_HPP
#define MRBEE_SIMULATOR_HPP

// Monte-Carlo generator for the MR model and the replication harness.
//
// Individual mode draws genotypes and phenotypes for every cohort member.
// Cohorts are laid out as nested prefixes: cohort s owns the shared block
// [0, L_s) with L_s = max_{k != s} n_sk, plus a private block of n_s - L_s
// individuals. This realizes any overlap matrix with n_sk = min(L_s, L_k).
//
// Direct mode draws the summary-statistic errors from their theoretical
// joint normal law instead of simulating individuals.
//
// Estimation runs on z-scores; estimates are mapped back to the per-allele
// scale with the per-trait standard errors, which are constant across
// variants in both modes.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "mrbee/error_cov.hpp"
#include "mrbee/estimators.hpp"
#include "mrbee/gwas_io.hpp"
#include "mrbee/pleiotropy.hpp"
#include "mrbee/theory.hpp"

namespace mrbee {

using Rng = std::mt19937_64;

enum class SimMode { Individual, DirectErrors };
enum class ErrorCovSource { Estimated, Theoretical };

struct UhpConfig {
    Eigen::Index count = 0;
    double magnitude_sd = 8.0;
};

struct SimConfig {
    PopulationSpec spec;
    double maf_low = 0.05;
    double maf_high = 0.5;
    std::optional<UhpConfig> uhp;
    std::size_t replications = 100;
    std::uint64_t seed = 1;
    SimMode mode = SimMode::Individual;
    std::vector<Method> methods{Method::IVW, Method::MRBEE};
    // Error covariance handed to MRBEE. Estimated: from a simulated panel of
    // null_M null variants. Unset: Estimated in individual mode,
    // Theoretical in direct mode.
    std::optional<ErrorCovSource> error_cov_source;
    Eigen::Index null_M = 20000;
    IterativeConfig iterative;
    unsigned threads = 1;  // 0 = hardware concurrency
    bool keep_variant_ids = false;
};

ErrorCovSource resolved_error_cov_source(const SimConfig& config);

// Validates the config; throws InputError.
void validate_sim_config(const SimConfig& config);

struct CohortLayout {
    // Per trait (index 0 = outcome): rows [0, shared) and
    // [private_start, private_start + n - shared).
    std::vector<Eigen::Index> shared;
    std::vector<Eigen::Index> private_start;
    std::vector<Eigen::Index> size;
    Eigen::Index total = 0;

    // Number of individuals measured for both traits a and b.
    Eigen::Index common(std::size_t a, std::size_t b) const;
};

// Throws InputError when the overlap matrix is not realizable by nested
// prefixes or violates n_sk <= min(n_s, n_k).
CohortLayout make_layout(const Vector& n, const Matrix& overlap);

struct RawCohorts {
    CohortLayout layout;
    Eigen::Index m = 0;
    std::vector<std::uint8_t> genotypes;  // total x m, column-major, values 0/1/2
    Matrix standardize;                   // 3 x m: standardized value of genotype 0/1/2
    Vector maf;                           // m
    Matrix B;                             // m x p true effects
    Matrix X;                             // total x p exposures
    Vector y;                             // total

    double g(Eigen::Index i, Eigen::Index j) const {
        return standardize(genotypes[static_cast<std::size_t>(j * layout.total + i)], j);
    }
};

// Draws genotypes Binom(2, b_j), b_j ~ U(maf_low, maf_high), with genotype
// probabilities quantized to 1/65536 and standardized by the moments of
// the quantized law; B rows ~ N(0, Psi_bb / m); (u, v) jointly normal.
RawCohorts gen_individual(const PopulationSpec& spec, double maf_low, double maf_high, Rng& rng);

// Marginal regressions within each cohort, SE = sqrt(sample var / n_s),
// z-scores. Trait ids: "outcome", "exposure1".."exposureP".
HarmonizedPanel gen_summary(const RawCohorts& raw, bool variant_ids = true);

// Covariance of null-variant summary statistics given the realized traits,
// on the z-scale of `panel`, trait order exposures then outcome.
Matrix null_covariance_z(const RawCohorts& raw, const HarmonizedPanel& panel);

struct DirectDraw {
    Matrix B;        // m x p true effects
    Vector alpha;    // m, B theta
    Matrix W_beta;   // m x p errors
    Vector w_alpha;  // m errors
};

DirectDraw gen_direct_errors(const PopulationSpec& spec, Rng& rng);

// Assembles B + W and alpha + w with per-trait SE sqrt(diag of the
// theoretical error covariance) and standardizes.
HarmonizedPanel direct_panel(const PopulationSpec& spec, const DirectDraw& draw, bool variant_ids = true);

// Adds gamma_j = +-magnitude_sd * sqrt(var_eps[j]) to alpha_hat at `count`
// distinct random rows (z-scale; alpha_raw kept consistent). Returns the
// affected rows in ascending order.
std::vector<Eigen::Index> inject_uhp(HarmonizedPanel& panel, Eigen::Index count, double magnitude_sd,
                                     const Vector& var_eps, Rng& rng);

// M draws of N(0, cov).
Matrix draw_normal_rows(const Matrix& cov, Eigen::Index M, Rng& rng);

struct SimulatedReplication {
    HarmonizedPanel panel;
    ErrorCovariance error_cov_z;
    Vector theta_z;                   // true theta on the z-scale
    Vector scale;                     // theta_raw = scale .* theta_z
    std::vector<Eigen::Index> truth;  // injected outlier rows
    Matrix B_true;                    // per-allele scale
    Vector alpha_true;
};

Rng replication_rng(std::uint64_t seed, std::uint64_t replication);

SimulatedReplication simulate_replication(const SimConfig& config, std::uint64_t replication);

struct MethodOutcome {
    bool ok = false;
    Vector theta;  // per-allele scale
    Vector se;
    bool hessian_repaired = false;
    std::vector<Eigen::Index> flagged;
    int iterations = 0;
};

struct ReplicationRecord {
    std::vector<MethodOutcome> outcomes;  // aligned with SimConfig::methods
    std::vector<Eigen::Index> truth;
    Eigen::Index m = 0;
};

ReplicationRecord fit_replication(const SimConfig& config, const SimulatedReplication& rep);

struct CoordinateMetrics {
    double truth = 0.0;
    double mean_estimate = 0.0;
    double mean_bias = 0.0;
    std::optional<double> empirical_sd;  // absent for fewer than 2 replications
    double mean_se_hat = 0.0;
    double coverage = 0.0;
};

struct OutlierRecovery {
    double exact_rate = 0.0;
    double sensitivity = 0.0;  // mean over replications with a nonempty truth set
    double fdr = 0.0;
    double flagged_fraction = 0.0;
};

struct MethodMetrics {
    Method method = Method::IVW;
    std::vector<CoordinateMetrics> coordinates;
    std::size_t used = 0;
    std::size_t excluded = 0;
    std::optional<OutlierRecovery> recovery;
};

struct ReplicationMetrics {
    std::size_t replications = 0;
    std::vector<MethodMetrics> methods;
    std::vector<ReplicationRecord> records;
};

ReplicationMetrics aggregate(const SimConfig& config, std::vector<ReplicationRecord> records);

// Replication r uses replication_rng(seed, r); results do not depend on the
// thread count.
ReplicationMetrics run_replications(const SimConfig& config);

}  // namespace mrbee

#endif  // MRBEE_SIMULATOR_HPP
