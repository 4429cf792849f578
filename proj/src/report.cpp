#include "mrbee/report.hpp"

#include <cmath>
#include <cstdio>

#include "mrbee/errors.hpp"

namespace mrbee {
namespace {

void put_matrix(std::ostream& out, const std::string& name, const Matrix& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out << name << '\t' << i + 1 << '\t' << j + 1 << '\t' << format_number(a(i, j)) << '\n';
        }
    }
}

void put_vector(std::ostream& out, const std::string& name, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out << name << '\t' << i + 1 << '\t' << 0 << '\t' << format_number(v[i]) << '\n';
    }
}

void put_scalar(std::ostream& out, const std::string& name, double v) {
    out << name << '\t' << 0 << '\t' << 0 << '\t' << format_number(v) << '\n';
}

void put_metric(std::ostream& out, Method method, const std::string& coordinate, const std::string& metric,
                const std::string& value) {
    out << method_name(method) << ',' << coordinate << ',' << metric << ',' << value << '\n';
}

}  // namespace

std::string format_number(double value) {
    if (std::isnan(value)) return "NA";
    if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    return buf;
}

void write_estimates(std::ostream& out, const std::vector<CausalEstimate>& estimates,
                     const std::vector<std::string>& exposure_ids) {
    out << "exposure_id\ttheta\tse\tz\tpval\tmethod\tm_used\thessian_repaired\n";
    for (const auto& est : estimates) {
        if (static_cast<Eigen::Index>(exposure_ids.size()) != est.theta.size()) {
            throw InputError("write_estimates: exposure ids do not match the estimate dimension");
        }
        for (Eigen::Index s = 0; s < est.theta.size(); ++s) {
            out << exposure_ids[static_cast<std::size_t>(s)] << '\t' << format_number(est.theta[s]) << '\t'
                << format_number(est.se[s]) << '\t' << format_number(est.z[s]) << '\t'
                << format_number(est.pvalue[s]) << '\t' << method_name(est.method) << '\t' << est.m_used << '\t'
                << (est.hessian_repaired ? 1 : 0) << '\n';
        }
    }
}

void write_outliers(std::ostream& out, const HarmonizedPanel& iv_panel, const IterativeFit& fit) {
    out << "variant_id\tgamma_hat\tt_stat\tpvalue\tflagged\titeration_flagged\n";
    const PleiotropyReport& r = fit.final_report;
    auto flagged = fit.outlier_indices.begin();
    for (Eigen::Index j = 0; j < iv_panel.m(); ++j) {
        const bool is_flagged = flagged != fit.outlier_indices.end() && *flagged == j;
        if (is_flagged) ++flagged;
        const std::string id = iv_panel.variant_ids.empty() ? std::to_string(j + 1)
                                                           : iv_panel.variant_ids[static_cast<std::size_t>(j)];
        out << id << '\t' << format_number(r.gamma_hat[j]) << '\t' << format_number(r.t_stat[j]) << '\t'
            << format_number(r.pvalue[j]) << '\t' << (is_flagged ? 1 : 0) << '\t'
            << fit.iteration_flagged[static_cast<std::size_t>(j)] << '\n';
    }
}

void write_error_cov(std::ostream& out, const ErrorCovariance& cov, const std::vector<std::string>& trait_ids) {
    const Eigen::Index k = cov.full.rows();
    if (static_cast<Eigen::Index>(trait_ids.size()) != k) throw InputError("write_error_cov: trait id count mismatch");
    out << "trait";
    for (const auto& id : trait_ids) out << '\t' << id;
    out << '\n';
    for (Eigen::Index i = 0; i < k; ++i) {
        out << trait_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < k; ++j) out << '\t' << format_number(cov.full(i, j));
        out << '\n';
    }
}

void write_metrics_csv(std::ostream& out, const ReplicationMetrics& metrics) {
    out << "method,coordinate,metric,value\n";
    for (const auto& mm : metrics.methods) {
        for (std::size_t s = 0; s < mm.coordinates.size(); ++s) {
            const auto& c = mm.coordinates[s];
            const std::string coord = std::to_string(s + 1);
            put_metric(out, mm.method, coord, "truth", format_number(c.truth));
            put_metric(out, mm.method, coord, "mean_estimate", format_number(c.mean_estimate));
            put_metric(out, mm.method, coord, "mean_bias", format_number(c.mean_bias));
            put_metric(out, mm.method, coord, "empirical_sd",
                       c.empirical_sd ? format_number(*c.empirical_sd) : std::string("NA"));
            put_metric(out, mm.method, coord, "mean_se_hat", format_number(c.mean_se_hat));
            put_metric(out, mm.method, coord, "coverage", format_number(c.coverage));
        }
        put_metric(out, mm.method, "all", "replications_used", std::to_string(mm.used));
        put_metric(out, mm.method, "all", "replications_excluded", std::to_string(mm.excluded));
        if (mm.recovery) {
            put_metric(out, mm.method, "all", "exact_recovery_rate", format_number(mm.recovery->exact_rate));
            put_metric(out, mm.method, "all", "sensitivity", format_number(mm.recovery->sensitivity));
            put_metric(out, mm.method, "all", "fdr", format_number(mm.recovery->fdr));
            put_metric(out, mm.method, "all", "flagged_fraction", format_number(mm.recovery->flagged_fraction));
        }
    }
}

void write_theory(std::ostream& out, const PopulationSpec& spec) {
    out << "quantity\trow\tcol\tvalue\n";
    const DerivedMoments d = derive_moments(spec);
    put_matrix(out, "Sigma_xx", d.Sigma_xx);
    put_vector(out, "sigma_xy", d.sigma_xy);
    put_scalar(out, "sigma_yy", d.sigma_yy);
    put_matrix(out, "Psi_bb", spec.Psi_bb);
    put_matrix(out, "Sigma_uu", spec.Sigma_uu);
    put_vector(out, "sigma_uv", spec.sigma_uv);
    put_scalar(out, "sigma_vv", spec.sigma_vv);
    if (!spec.overlap) return;

    put_matrix(out, "error_cov", error_cov_theoretical(spec).full);
    const ScoreExpectation e = ivw_score_expectation(spec);
    put_vector(out, "score_bias_total", e.total);
    put_vector(out, "score_bias_measurement", e.measurement);
    put_vector(out, "score_bias_confounder", e.confounder);
    if (spec.p == 1) {
        const SpecialFraction f = special_overlap_fraction(spec);
        put_scalar(out, "special_overlap_fraction", f.value);
        put_scalar(out, "special_overlap_fraction_feasible", f.feasible ? 1.0 : 0.0);
    }

    const double nm = n_min(spec);
    const double m = static_cast<double>(spec.m);
    put_scalar(out, "n_min", nm);
    put_scalar(out, "psi_theta", psi_theta(spec));
    const double c0_ii = m / std::sqrt(nm);
    const double c0_iii = m / nm;
    put_scalar(out, "c0_ivw_ii", c0_ii);
    put_scalar(out, "c0_ivw_iii", c0_iii);
    const IvwAsymptotics i1 = ivw_asymptotics(spec, Regime::I);
    const IvwAsymptotics i2 = ivw_asymptotics(spec, Regime::II, c0_ii);
    const IvwAsymptotics i3 = ivw_asymptotics(spec, Regime::III, c0_iii);
    const IvwAsymptotics i4 = ivw_asymptotics(spec, Regime::IV);
    put_vector(out, "ivw_i_bias", i1.bias);
    put_matrix(out, "ivw_i_cov", *i1.cov);
    put_vector(out, "ivw_ii_scaled_bias", i2.bias);
    put_vector(out, "ivw_iii_plim_bias", i3.bias);
    put_vector(out, "ivw_iv_plim_bias", i4.bias);

    const Matrix sbc = compute_sigma_bc(spec, spec.theta);
    put_matrix(out, "Sigma_BC", sbc);
    const MrbeeAsymptotics b1 = mrbee_asymptotics(spec, Regime::I);
    const MrbeeAsymptotics b2 = mrbee_asymptotics(spec, Regime::II, c0_iii);
    const MrbeeAsymptotics b3 = mrbee_asymptotics(spec, Regime::III);
    put_matrix(out, "mrbee_i_limit_cov", b1.limit_cov);
    put_matrix(out, "mrbee_ii_limit_cov", b2.limit_cov);
    put_matrix(out, "mrbee_iii_limit_cov", b3.limit_cov);
    put_matrix(out, "mrbee_ii_cov_theta", b2.cov);
}

}  // namespace mrbee
