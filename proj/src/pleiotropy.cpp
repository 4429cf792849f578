#include "mrbee/pleiotropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mrbee/errors.hpp"
#include "mrbee/stats.hpp"

namespace mrbee {

PleiotropyReport residual_test(const HarmonizedPanel& panel, const Vector& theta, const ErrorCorrelation& error_corr,
                               EffectScale scale) {
    const Eigen::Index m = panel.m();
    const Eigen::Index p = panel.p();
    if (theta.size() != p || !theta.allFinite()) throw InputError("residual test: theta must be finite with length p");
    if (error_corr.R.rows() != p + 1 || error_corr.R.cols() != p + 1) {
        throw InputError("residual test: correlation matrix must be (p+1)x(p+1)");
    }
    const bool raw = scale == EffectScale::Raw;
    Vector vartheta(p + 1);
    vartheta.head(p) = theta;
    vartheta[p] = -1.0;

    PleiotropyReport out;
    out.gamma_hat = raw ? Vector(panel.alpha_raw - panel.B_raw * theta) : Vector(panel.alpha_hat - panel.B_hat * theta);
    out.var_eps.resize(m);
    out.t_stat.resize(m);
    out.pvalue.resize(m);

    const double var_unit = vartheta.dot(error_corr.R * vartheta);
    Vector w(p + 1);
    for (Eigen::Index j = 0; j < m; ++j) {
        double var = var_unit;
        if (raw) {
            w.head(p) = panel.SE_B.row(j).transpose().cwiseProduct(theta);
            w[p] = -panel.SE_alpha[j];
            var = w.dot(error_corr.R * w);
        }
        if (!(var > 0.0) || !std::isfinite(var)) {
            throw EstimationError("residual test: non-positive residual variance (invalid correlation matrix)");
        }
        out.var_eps[j] = var;
        out.t_stat[j] = out.gamma_hat[j] * out.gamma_hat[j] / var;
        out.pvalue[j] = stats::chi2_1_sf(out.t_stat[j]);
    }
    return out;
}

std::vector<Eigen::Index> fdr_select(const Vector& pvalues, double q) {
    if (!(q > 0.0 && q < 1.0)) throw InputError("fdr_select: q must lie in (0, 1)");
    const Eigen::Index m = pvalues.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return pvalues[a] < pvalues[b]; });
    std::size_t k = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        const double cutoff = q * static_cast<double>(r + 1) / static_cast<double>(m);
        if (pvalues[order[r]] <= cutoff) k = r + 1;
    }
    std::vector<Eigen::Index> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Eigen::Index> log_m_select(const Vector& t_stat, double c0) {
    if (!(c0 > 0.0)) throw InputError("log-m threshold: c0 must be positive");
    const double threshold = c0 * std::log(static_cast<double>(t_stat.size()));
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < t_stat.size(); ++j) {
        if (t_stat[j] > threshold) out.push_back(j);
    }
    return out;
}

std::vector<Eigen::Index> select_outliers(const PleiotropyReport& report, const OutlierRule& rule) {
    return rule.kind == OutlierRule::Kind::FDR ? fdr_select(report.pvalue, rule.q) : log_m_select(report.t_stat, rule.c0);
}

IterativeFit fit_mrbee_iterative(const HarmonizedPanel& iv_panel, const ErrorCovariance& error_cov,
                                 const IterativeConfig& config) {
    const Eigen::Index m = iv_panel.m();
    const Eigen::Index p = iv_panel.p();
    if (m < p + 1) throw InputError("iterative MRBEE: IV panel needs at least p + 1 variants");
    if (config.max_iter < 1) throw InputError("iterative MRBEE: max_iter must be at least 1");
    const ErrorCorrelation corr = to_correlation(error_cov);

    IterativeFit out;
    out.iteration_flagged.assign(static_cast<std::size_t>(m), 0);
    std::vector<Eigen::Index> flagged;
    std::vector<Eigen::Index> inliers(static_cast<std::size_t>(m));
    std::iota(inliers.begin(), inliers.end(), Eigen::Index{0});
    Vector theta_prev;

    auto inliers_of = [m](const std::vector<Eigen::Index>& excluded) {
        std::vector<Eigen::Index> keep;
        keep.reserve(static_cast<std::size_t>(m));
        auto it = excluded.begin();
        for (Eigen::Index j = 0; j < m; ++j) {
            if (it != excluded.end() && *it == j) {
                ++it;
                continue;
            }
            keep.push_back(j);
        }
        return keep;
    };

    for (int iter = 1; iter <= config.max_iter; ++iter) {
        const HarmonizedPanel current = subset_panel(iv_panel, inliers);
        const Vector theta = solve_mrbee(current.B_hat, current.alpha_hat, error_cov);
        const PleiotropyReport report = residual_test(iv_panel, theta, corr);
        std::vector<Eigen::Index> next = select_outliers(report, config.rule);
        for (Eigen::Index j : next) {
            auto& first = out.iteration_flagged[static_cast<std::size_t>(j)];
            if (first == 0) first = iter;
        }
        out.trace.push_back({theta, next.size()});
        out.iterations = iter;

        const bool stable_set = next == flagged;
        const bool small_step = theta_prev.size() == p && (theta - theta_prev).cwiseAbs().maxCoeff() < config.tol;
        flagged = std::move(next);
        theta_prev = theta;
        if (stable_set && small_step) {
            out.converged = true;
            break;
        }
        inliers = inliers_of(flagged);
        if (static_cast<Eigen::Index>(inliers.size()) < p) {
            throw EstimationError("iterative MRBEE: " + std::to_string(inliers.size()) +
                                  " inliers remain for p = " + std::to_string(p) + " exposures");
        }
    }

    inliers = inliers_of(flagged);
    if (static_cast<Eigen::Index>(inliers.size()) < p) {
        throw EstimationError("iterative MRBEE: too few inliers for the final refit");
    }
    const HarmonizedPanel final_panel = subset_panel(iv_panel, inliers);
    out.estimate = fit_mrbee(final_panel.B_hat, final_panel.alpha_hat, error_cov);
    out.estimate.method = Method::MRBEE_iterative;
    out.outlier_indices = flagged;
    if (!iv_panel.variant_ids.empty()) {
        for (Eigen::Index j : flagged) out.outliers.push_back(iv_panel.variant_ids[static_cast<std::size_t>(j)]);
    }
    out.final_report = residual_test(iv_panel, out.estimate.theta, corr);
    out.final_report.flagged = flagged;
    return out;
}

IterativeFit fit_mrbee_iterative(const PanelSelection& selection, const ErrorCovariance& error_cov,
                                 const IterativeConfig& config) {
    return fit_mrbee_iterative(selection.iv_panel, error_cov, config);
}

}  // namespace mrbee
