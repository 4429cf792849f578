#ifndef MRBEE_GWAS_IO_HPP
#define MRBEE_GWAS_IO_HPP

// Loading, allele harmonization, z-score standardization and IV / null
// partitioning of GWAS summary statistics.
//
// Trait order convention for per-trait vectors (n, overlap, trait_ids):
// index 0 is the outcome, indices 1..p are the exposures.
//
// Variants are assumed to be independent (pre-clumped). Nothing in this
// module models linkage disequilibrium.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrbee/linalg.hpp"

namespace mrbee {

struct SummaryRow {
    std::string variant_id;
    char effect_allele = 'N';
    char other_allele = 'N';
    double effect = 0.0;
    double se = 1.0;
    double pvalue = 1.0;
    long long n = 0;
};

struct SummaryDataset {
    std::string trait_id;
    std::vector<SummaryRow> rows;
    std::size_t dropped_rows = 0;  // rows rejected at load (missing/invalid fields)

    long long sample_size() const { return rows.empty() ? 0 : rows.front().n; }
};

/// Logical column name -> header name in the file.
struct ColumnSchema {
    std::string variant_id = "variant_id";
    std::string effect_allele = "effect_allele";
    std::string other_allele = "other_allele";
    std::string beta = "beta";
    std::string se = "se";
    std::string pval = "pval";
    std::string n = "n";

    /// Applies `key=value` style overrides; unknown keys throw InputError.
    void set(const std::string& logical, const std::string& header);
};

/// Reads a tab-delimited summary table with a header row. Rows with missing,
/// unparsable or invalid fields (se <= 0, p outside [0,1], n <= 0, alleles
/// other than A/C/G/T) are dropped and counted in `dropped_rows`.
/// The trait id defaults to the file stem.
SummaryDataset load_summary_table(const std::filesystem::path& path,
                                  const ColumnSchema& schema = {},
                                  std::optional<std::string> trait_id = std::nullopt);

struct HarmonizedPanel {
    std::vector<std::string> trait_ids;     // [outcome, exposure 1..p]
    std::vector<std::string> variant_ids;   // length m
    std::vector<char> effect_allele;        // reference alleles (outcome's)
    std::vector<char> other_allele;

    Matrix B_hat;      // m x p, z-scores (effect / se)
    Vector alpha_hat;  // m, z-scores
    Matrix SE_B;       // m x p, original SEs
    Vector SE_alpha;   // m
    Matrix B_raw;      // m x p, aligned per-allele effects
    Vector alpha_raw;  // m
    Matrix P_B;        // m x p p-values
    Vector P_alpha;    // m

    Vector n;                       // p+1 cohort sizes, index 0 = outcome
    std::optional<Matrix> overlap;  // (p+1)x(p+1) n_sk, index 0 = outcome

    Eigen::Index m() const { return B_hat.rows(); }
    Eigen::Index p() const { return B_hat.cols(); }
};

struct PanelSelection {
    HarmonizedPanel iv_panel;
    HarmonizedPanel null_panel;
};

bool is_palindromic(char a, char b);

/// Intersects variants across outcome and exposures (outcome row order),
/// drops strand-ambiguous A/T and C/G variants, aligns every exposure to the
/// outcome's effect allele (sign flip on swap) and standardizes effects to
/// z-scores. Throws InputError on empty intersection or irreconcilable
/// alleles.
HarmonizedPanel harmonize(const SummaryDataset& outcome,
                          const std::vector<SummaryDataset>& exposures,
                          const std::optional<Matrix>& overlap = std::nullopt);

/// Checks the overlap matrix against cohort sizes: symmetric, nonnegative,
/// diagonal equal to n, off-diagonals bounded by min(n_s, n_k).
void validate_overlap(const Matrix& overlap, const Vector& n);

/// Inverse of harmonize for an already harmonized panel (aligned alleles,
/// raw effects). harmonize(to_datasets(panel)) reproduces the panel.
std::pair<SummaryDataset, std::vector<SummaryDataset>> to_datasets(const HarmonizedPanel& panel);

/// Rows of `panel` at `indices`, in the given order.
HarmonizedPanel subset_panel(const HarmonizedPanel& panel, const std::vector<Eigen::Index>& indices);

/// Recomputes z-scores and p-values from raw effects and SEs. A zero SE
/// yields a zero z-score and p-value 1 (degenerate simulated traits only).
void restandardize(HarmonizedPanel& panel);

struct PartitionOptions {
    double iv_pvalue = 5e-8;
    double null_pvalue = 0.05;
    // Keeps only the `max_iv` variants with the smallest exposure p-value
    // (0 = keep all IV candidates).
    std::size_t max_iv = 0;
};

/// IV panel: min exposure p-value <= iv_pvalue. Null panel: p-value above
/// null_pvalue in every trait, outcome included.
PanelSelection partition_variants(const HarmonizedPanel& panel, const PartitionOptions& options = {});

/// Square TSV with a header row and a leading column of trait ids; reordered
/// to `trait_order` (outcome first).
Matrix load_overlap_matrix(const std::filesystem::path& path, const std::vector<std::string>& trait_order);

}  // namespace mrbee

#endif  // MRBEE_GWAS_IO_HPP
