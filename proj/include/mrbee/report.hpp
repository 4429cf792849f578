#ifndef MRBEE_REPORT_HPP
#define MRBEE_REPORT_HPP

// Tabular writers. Every floating-point value is printed with 10
// significant digits (%.10g).

#include <ostream>
#include <string>
#include <vector>

#include "mrbee/error_cov.hpp"
#include "mrbee/estimators.hpp"
#include "mrbee/gwas_io.hpp"
#include "mrbee/pleiotropy.hpp"
#include "mrbee/simulator.hpp"
#include "mrbee/theory.hpp"

namespace mrbee {

std::string format_number(double value);

void write_estimates(std::ostream& out, const std::vector<CausalEstimate>& estimates,
                     const std::vector<std::string>& exposure_ids);

void write_outliers(std::ostream& out, const HarmonizedPanel& iv_panel, const IterativeFit& fit);

// trait_ids in the matrix order: exposures first, outcome last.
void write_error_cov(std::ostream& out, const ErrorCovariance& cov, const std::vector<std::string>& trait_ids);

// Long format: method,coordinate,metric,value.
void write_metrics_csv(std::ostream& out, const ReplicationMetrics& metrics);

// Long format TSV: quantity, row, col, value (1-based indices, 0 when
// not applicable).
void write_theory(std::ostream& out, const PopulationSpec& spec);

}  // namespace mrbee

#endif  // MRBEE_REPORT_HPP
