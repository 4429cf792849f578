#include "mrbee/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iterator>
#include <mutex>
#include <string>
#include <thread>

#include "mrbee/errors.hpp"
#include "mrbee/stats.hpp"

namespace mrbee {
namespace {

constexpr Eigen::Index kBlock = 64;
constexpr double kQuantum = 65536.0;

// Values of trait t (0 = outcome).
Eigen::Ref<const Vector> trait_values(const RawCohorts& raw, Eigen::Index t) {
    if (t == 0) return raw.y;
    return raw.X.col(t - 1);
}

void decode_block(const RawCohorts& raw, Eigen::Index j0, Eigen::Index width, Matrix& out) {
    const Eigen::Index N = raw.layout.total;
    out.resize(N, width);
    for (Eigen::Index c = 0; c < width; ++c) {
        const Eigen::Index j = j0 + c;
        const double lut[3] = {raw.standardize(0, j), raw.standardize(1, j), raw.standardize(2, j)};
        const std::uint8_t* col = raw.genotypes.data() + static_cast<std::size_t>(j * N);
        double* dst = out.col(c).data();
        for (Eigen::Index i = 0; i < N; ++i) dst[i] = lut[col[i]];
    }
}

Matrix standard_normals(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal;
    Matrix z(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index k = 0; k < cols; ++k) z(i, k) = normal(rng);
    }
    return z;
}

Matrix effect_draws(const PopulationSpec& spec, Rng& rng) {
    const Matrix cov = spec.Psi_bb / static_cast<double>(spec.m);
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw InputError("simulator: Psi_bb is not positive definite");
    const Matrix L = llt.matrixL();
    return standard_normals(spec.m, spec.p, rng) * L.transpose();
}

Matrix joint_noise(const PopulationSpec& spec) {
    const Eigen::Index p = spec.p;
    Matrix J(p + 1, p + 1);
    J.topLeftCorner(p, p) = spec.Sigma_uu;
    J.col(p).head(p) = spec.sigma_uv;
    J.row(p).head(p) = spec.sigma_uv.transpose();
    J(p, p) = spec.sigma_vv;
    return J;
}

Matrix realized_overlap(const CohortLayout& layout) {
    const auto k = static_cast<Eigen::Index>(layout.size.size());
    Matrix N(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) {
            N(a, b) = static_cast<double>(layout.common(static_cast<std::size_t>(a), static_cast<std::size_t>(b)));
        }
    }
    return N;
}

void name_panel(HarmonizedPanel& panel, Eigen::Index p, Eigen::Index m, bool variant_ids) {
    panel.trait_ids = {"outcome"};
    for (Eigen::Index s = 1; s <= p; ++s) panel.trait_ids.push_back("exposure" + std::to_string(s));
    if (!variant_ids) return;
    panel.variant_ids.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) panel.variant_ids.push_back("snp" + std::to_string(j + 1));
    panel.effect_allele.assign(static_cast<std::size_t>(m), 'A');
    panel.other_allele.assign(static_cast<std::size_t>(m), 'G');
}

// D^-1 cov D^-1 with D = diag(exposure SEs, outcome SE) of the panel.
Matrix to_z_scale(const Matrix& cov, const HarmonizedPanel& panel) {
    const Eigen::Index p = panel.p();
    Vector inv(p + 1);
    for (Eigen::Index s = 0; s < p; ++s) inv[s] = panel.SE_B(0, s) > 0.0 ? 1.0 / panel.SE_B(0, s) : 0.0;
    inv[p] = panel.SE_alpha[0] > 0.0 ? 1.0 / panel.SE_alpha[0] : 0.0;
    return inv.asDiagonal() * cov * inv.asDiagonal();
}

}  // namespace

ErrorCovSource resolved_error_cov_source(const SimConfig& config) {
    if (config.error_cov_source) return *config.error_cov_source;
    return config.mode == SimMode::Individual ? ErrorCovSource::Estimated : ErrorCovSource::Theoretical;
}

void validate_sim_config(const SimConfig& config) {
    validate_spec(config.spec, false);
    if (config.replications < 1) throw InputError("simulate: replications must be at least 1");
    if (!(config.maf_low > 0.0 && config.maf_low <= config.maf_high && config.maf_high <= 0.5)) {
        throw InputError("simulate: MAF range must satisfy 0 < low <= high <= 0.5");
    }
    if (config.methods.empty()) throw InputError("simulate: no methods requested");
    if (config.mode == SimMode::DirectErrors && !config.spec.overlap) {
        throw InputError("simulate: direct_errors mode requires an overlap matrix");
    }
    if (config.null_M < 30) throw InputError("simulate: null_M must be at least 30");
    if (config.uhp) {
        if (config.uhp->count < 0 || 10 * config.uhp->count >= config.spec.m) {
            throw InputError("simulate: UHP count must be nonnegative and below m / 10");
        }
        if (!(config.uhp->magnitude_sd > 0.0)) throw InputError("simulate: UHP magnitude must be positive");
    }
    const bool iterative =
        std::find(config.methods.begin(), config.methods.end(), Method::MRBEE_iterative) != config.methods.end();
    if (config.spec.m < config.spec.p + (iterative ? 1 : 0)) {
        throw InputError("simulate: m is too small for the number of exposures");
    }
}

Eigen::Index CohortLayout::common(std::size_t a, std::size_t b) const {
    if (a == b) return size[a];
    return std::min(shared[a], shared[b]);
}

CohortLayout make_layout(const Vector& n, const Matrix& overlap) {
    validate_overlap(overlap, n);
    const Eigen::Index k = n.size();
    CohortLayout layout;
    Eigen::Index shared_max = 0;
    for (Eigen::Index s = 0; s < k; ++s) {
        double L = 0.0;
        for (Eigen::Index t = 0; t < k; ++t) {
            if (t != s) L = std::max(L, overlap(s, t));
        }
        layout.shared.push_back(static_cast<Eigen::Index>(L));
        layout.size.push_back(static_cast<Eigen::Index>(n[s]));
        shared_max = std::max(shared_max, layout.shared.back());
    }
    for (Eigen::Index s = 0; s < k; ++s) {
        for (Eigen::Index t = 0; t < k; ++t) {
            if (t == s) continue;
            const auto expected = std::min(layout.shared[static_cast<std::size_t>(s)], layout.shared[static_cast<std::size_t>(t)]);
            if (static_cast<Eigen::Index>(overlap(s, t)) != expected) {
                throw InputError("simulate: overlap matrix cannot be realized by nested shared blocks");
            }
        }
    }
    Eigen::Index start = shared_max;
    for (Eigen::Index s = 0; s < k; ++s) {
        const auto us = static_cast<std::size_t>(s);
        layout.private_start.push_back(start);
        start += layout.size[us] - layout.shared[us];
    }
    layout.total = start;
    return layout;
}

RawCohorts gen_individual(const PopulationSpec& spec, double maf_low, double maf_high, Rng& rng) {
    validate_spec(spec, false);
    const Eigen::Index p = spec.p;
    const Eigen::Index m = spec.m;
    RawCohorts raw;
    raw.layout = make_layout(spec.n, spec.overlap ? *spec.overlap : no_overlap(spec.n));
    raw.m = m;
    const Eigen::Index N = raw.layout.total;

    std::uniform_real_distribution<double> unif(maf_low, maf_high);
    raw.maf.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) raw.maf[j] = unif(rng);
    raw.B = effect_draws(spec, rng);

    raw.standardize.resize(3, m);
    raw.genotypes.resize(static_cast<std::size_t>(N * m));
    for (Eigen::Index j = 0; j < m; ++j) {
        const double b = raw.maf[j];
        const double p0 = (1.0 - b) * (1.0 - b);
        const double p01 = p0 + 2.0 * b * (1.0 - b);
        const auto t0 = static_cast<std::uint32_t>(std::clamp(std::round(p0 * kQuantum), 0.0, kQuantum));
        const auto t1 = static_cast<std::uint32_t>(std::clamp(std::round(p01 * kQuantum), 0.0, kQuantum));
        const double q1 = (t1 - t0) / kQuantum;
        const double q2 = 1.0 - t1 / kQuantum;
        const double mean = q1 + 2.0 * q2;
        const double var = q1 + 4.0 * q2 - mean * mean;
        if (!(var > 0.0)) throw InputError("simulate: MAF too small for a non-degenerate genotype");
        const double sd = std::sqrt(var);
        for (int g = 0; g < 3; ++g) raw.standardize(g, j) = (g - mean) / sd;

        std::uint8_t* col = raw.genotypes.data() + static_cast<std::size_t>(j * N);
        Eigen::Index i = 0;
        while (i < N) {
            std::uint64_t u = rng();
            for (int r = 0; r < 4 && i < N; ++r, ++i) {
                const auto h = static_cast<std::uint32_t>(u & 0xFFFFu);
                u >>= 16;
                col[i] = static_cast<std::uint8_t>((h >= t0) + (h >= t1));
            }
        }
    }

    raw.X = Matrix::Zero(N, p);
    Matrix block;
    for (Eigen::Index j0 = 0; j0 < m; j0 += kBlock) {
        const Eigen::Index w = std::min(kBlock, m - j0);
        decode_block(raw, j0, w, block);
        raw.X.noalias() += block * raw.B.middleRows(j0, w);
    }

    const Matrix E = standard_normals(N, p + 1, rng) * sqrt_psd(joint_noise(spec));
    raw.X += E.leftCols(p);
    raw.y = raw.X * spec.theta + E.col(p);
    return raw;
}

HarmonizedPanel gen_summary(const RawCohorts& raw, bool variant_ids) {
    const Eigen::Index m = raw.m;
    const Eigen::Index p = raw.X.cols();
    const CohortLayout& L = raw.layout;
    HarmonizedPanel panel;
    name_panel(panel, p, m, variant_ids);
    panel.B_raw.resize(m, p);
    panel.alpha_raw.resize(m);
    panel.SE_B.resize(m, p);
    panel.SE_alpha.resize(m);
    panel.n.resize(p + 1);
    for (Eigen::Index t = 0; t <= p; ++t) panel.n[t] = static_cast<double>(L.size[static_cast<std::size_t>(t)]);
    panel.overlap = realized_overlap(L);

    Matrix block;
    Matrix effects(m, p + 1);
    for (Eigen::Index t = 0; t <= p; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        const auto values = trait_values(raw, t);
        const Eigen::Index shared = L.shared[ut];
        const Eigen::Index priv = L.private_start[ut];
        const Eigen::Index len = L.size[ut] - shared;
        const double n_t = static_cast<double>(L.size[ut]);

        const double mean = (values.head(shared).sum() + values.segment(priv, len).sum()) / n_t;
        const double ss = (values.head(shared).array() - mean).square().sum() +
                          (values.segment(priv, len).array() - mean).square().sum();
        const double se = std::sqrt(ss / n_t / n_t);
        if (t == 0) {
            panel.SE_alpha.setConstant(se);
        } else {
            panel.SE_B.col(t - 1).setConstant(se);
        }
    }
    for (Eigen::Index j0 = 0; j0 < m; j0 += kBlock) {
        const Eigen::Index w = std::min(kBlock, m - j0);
        decode_block(raw, j0, w, block);
        for (Eigen::Index t = 0; t <= p; ++t) {
            const auto ut = static_cast<std::size_t>(t);
            const auto values = trait_values(raw, t);
            const Eigen::Index shared = L.shared[ut];
            const Eigen::Index priv = L.private_start[ut];
            const Eigen::Index len = L.size[ut] - shared;
            Vector acc = block.topRows(shared).transpose() * values.head(shared);
            if (len > 0) acc.noalias() += block.middleRows(priv, len).transpose() * values.segment(priv, len);
            effects.col(t).segment(j0, w) = acc / static_cast<double>(L.size[ut]);
        }
    }
    panel.alpha_raw = effects.col(0);
    panel.B_raw = effects.rightCols(p);
    restandardize(panel);
    return panel;
}

Matrix null_covariance_z(const RawCohorts& raw, const HarmonizedPanel& panel) {
    const Eigen::Index p = raw.X.cols();
    const CohortLayout& L = raw.layout;
    auto trait_of = [p](Eigen::Index a) { return a < p ? a + 1 : Eigen::Index{0}; };
    Matrix C(p + 1, p + 1);
    for (Eigen::Index a = 0; a <= p; ++a) {
        for (Eigen::Index b = a; b <= p; ++b) {
            const Eigen::Index ta = trait_of(a);
            const Eigen::Index tb = trait_of(b);
            const auto va = trait_values(raw, ta);
            const auto vb = trait_values(raw, tb);
            const auto ua = static_cast<std::size_t>(ta);
            double sum = 0.0;
            if (ta == tb) {
                const Eigen::Index len = L.size[ua] - L.shared[ua];
                sum = va.head(L.shared[ua]).squaredNorm() + va.segment(L.private_start[ua], len).squaredNorm();
            } else {
                const Eigen::Index c = L.common(ua, static_cast<std::size_t>(tb));
                sum = va.head(c).dot(vb.head(c));
            }
            C(a, b) = sum / (panel.n[ta] * panel.n[tb]);
            C(b, a) = C(a, b);
        }
    }
    return to_z_scale(C, panel);
}

DirectDraw gen_direct_errors(const PopulationSpec& spec, Rng& rng) {
    const ErrorCovariance theory = error_cov_theoretical(spec);
    const auto proj = project_psd_report(theory.full);
    if (proj.repaired) throw InputError("simulate: theoretical error covariance is not positive semidefinite");
    DirectDraw out;
    out.B = effect_draws(spec, rng);
    out.alpha = out.B * spec.theta;
    const Matrix E = draw_normal_rows(theory.full, spec.m, rng);
    out.W_beta = E.leftCols(spec.p);
    out.w_alpha = E.col(spec.p);
    return out;
}

HarmonizedPanel direct_panel(const PopulationSpec& spec, const DirectDraw& draw, bool variant_ids) {
    const Eigen::Index p = spec.p;
    const Eigen::Index m = draw.B.rows();
    const Matrix full = error_cov_theoretical(spec).full;
    HarmonizedPanel panel;
    name_panel(panel, p, m, variant_ids);
    panel.B_raw = draw.B + draw.W_beta;
    panel.alpha_raw = draw.alpha + draw.w_alpha;
    panel.SE_B.resize(m, p);
    for (Eigen::Index s = 0; s < p; ++s) panel.SE_B.col(s).setConstant(std::sqrt(full(s, s)));
    panel.SE_alpha = Vector::Constant(m, std::sqrt(full(p, p)));
    panel.n = spec.n;
    panel.overlap = spec.overlap;
    restandardize(panel);
    return panel;
}

std::vector<Eigen::Index> inject_uhp(HarmonizedPanel& panel, Eigen::Index count, double magnitude_sd,
                                     const Vector& var_eps, Rng& rng) {
    const Eigen::Index m = panel.m();
    if (count < 0 || count >= std::max<Eigen::Index>(m, 1)) throw InputError("inject_uhp: count must lie in [0, m)");
    if (var_eps.size() != m) throw InputError("inject_uhp: var_eps must have length m");
    std::vector<Eigen::Index> all(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) all[static_cast<std::size_t>(j)] = j;
    std::vector<Eigen::Index> chosen;
    chosen.reserve(static_cast<std::size_t>(count));
    // Partial Fisher-Yates shuffle.
    for (Eigen::Index k = 0; k < count; ++k) {
        std::uniform_int_distribution<Eigen::Index> pick(k, m - 1);
        std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(pick(rng))]);
        chosen.push_back(all[static_cast<std::size_t>(k)]);
    }
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index j : chosen) {
        const double gamma = (coin(rng) ? 1.0 : -1.0) * magnitude_sd * std::sqrt(var_eps[j]);
        panel.alpha_hat[j] += gamma;
        panel.alpha_raw[j] += gamma * panel.SE_alpha[j];
        panel.P_alpha[j] = stats::two_sided_normal_pvalue(panel.alpha_hat[j]);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

Matrix draw_normal_rows(const Matrix& cov, Eigen::Index M, Rng& rng) {
    return standard_normals(M, cov.rows(), rng) * sqrt_psd(cov);
}

Rng replication_rng(std::uint64_t seed, std::uint64_t replication) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xFFFFFFFFu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replication & 0xFFFFFFFFu),
                      static_cast<std::uint32_t>(replication >> 32)};
    return Rng(seq);
}

SimulatedReplication simulate_replication(const SimConfig& config, std::uint64_t replication) {
    const PopulationSpec& spec = config.spec;
    const Eigen::Index p = spec.p;
    Rng rng = replication_rng(config.seed, replication);
    const ErrorCovSource source = resolved_error_cov_source(config);
    SimulatedReplication out;

    if (config.mode == SimMode::Individual) {
        RawCohorts raw = gen_individual(spec, config.maf_low, config.maf_high, rng);
        out.panel = gen_summary(raw, config.keep_variant_ids);
        if (source == ErrorCovSource::Estimated) {
            const Matrix Cz = null_covariance_z(raw, out.panel);
            out.error_cov_z = estimate_error_cov(draw_normal_rows(Cz, config.null_M, rng));
        } else {
            PopulationSpec realized = spec;
            realized.overlap = out.panel.overlap;
            out.error_cov_z.full = to_z_scale(error_cov_theoretical(realized).full, out.panel);
        }
        out.B_true = std::move(raw.B);
    } else {
        DirectDraw draw = gen_direct_errors(spec, rng);
        out.panel = direct_panel(spec, draw, config.keep_variant_ids);
        const Matrix corr = to_z_scale(error_cov_theoretical(spec).full, out.panel);
        if (source == ErrorCovSource::Estimated) {
            out.error_cov_z = estimate_error_cov(draw_normal_rows(corr, config.null_M, rng));
        } else {
            out.error_cov_z.full = corr;
        }
        out.B_true = std::move(draw.B);
    }
    out.alpha_true = out.B_true * spec.theta;

    const double se_alpha = out.panel.SE_alpha[0];
    out.scale.resize(p);
    out.theta_z.resize(p);
    for (Eigen::Index s = 0; s < p; ++s) {
        const double se_s = out.panel.SE_B(0, s);
        if (!(se_s > 0.0) || !(se_alpha > 0.0)) throw EstimationError("simulate: a trait has zero sample variance");
        out.scale[s] = se_alpha / se_s;
        out.theta_z[s] = spec.theta[s] / out.scale[s];
    }

    if (config.uhp && config.uhp->count > 0) {
        const PleiotropyReport rep = residual_test(out.panel, out.theta_z, to_correlation(out.error_cov_z));
        out.truth = inject_uhp(out.panel, config.uhp->count, config.uhp->magnitude_sd, rep.var_eps, rng);
    }
    return out;
}

ReplicationRecord fit_replication(const SimConfig& config, const SimulatedReplication& rep) {
    ReplicationRecord record;
    record.truth = rep.truth;
    record.m = rep.panel.m();
    for (Method method : config.methods) {
        MethodOutcome outcome;
        try {
            CausalEstimate est;
            if (method == Method::IVW) {
                est = fit_ivw(rep.panel);
            } else if (method == Method::MRBEE) {
                est = fit_mrbee(rep.panel, rep.error_cov_z);
            } else {
                IterativeFit fit = fit_mrbee_iterative(rep.panel, rep.error_cov_z, config.iterative);
                est = std::move(fit.estimate);
                outcome.flagged = std::move(fit.outlier_indices);
                outcome.iterations = fit.iterations;
            }
            outcome.theta = est.theta.cwiseProduct(rep.scale);
            outcome.se = est.se.cwiseProduct(rep.scale);
            outcome.hessian_repaired = est.hessian_repaired;
            outcome.ok = outcome.theta.allFinite() && outcome.se.allFinite();
        } catch (const std::exception&) {
            outcome.ok = false;
        }
        record.outcomes.push_back(std::move(outcome));
    }
    return record;
}

ReplicationMetrics aggregate(const SimConfig& config, std::vector<ReplicationRecord> records) {
    const Eigen::Index p = config.spec.p;
    ReplicationMetrics metrics;
    metrics.replications = records.size();
    for (std::size_t k = 0; k < config.methods.size(); ++k) {
        MethodMetrics mm;
        mm.method = config.methods[k];
        std::vector<const MethodOutcome*> ok;
        for (const auto& r : records) {
            if (r.outcomes[k].ok) ok.push_back(&r.outcomes[k]);
        }
        mm.used = ok.size();
        mm.excluded = records.size() - ok.size();
        const double R = static_cast<double>(ok.size());
        for (Eigen::Index s = 0; s < p; ++s) {
            CoordinateMetrics cm;
            cm.truth = config.spec.theta[s];
            if (!ok.empty()) {
                double sum = 0.0, se_sum = 0.0, hits = 0.0;
                for (const auto* o : ok) {
                    sum += o->theta[s];
                    se_sum += o->se[s];
                    if (std::abs(o->theta[s] - cm.truth) <= 2.0 * o->se[s]) hits += 1.0;
                }
                cm.mean_estimate = sum / R;
                cm.mean_bias = cm.mean_estimate - cm.truth;
                cm.mean_se_hat = se_sum / R;
                cm.coverage = hits / R;
                if (ok.size() >= 2) {
                    double ss = 0.0;
                    for (const auto* o : ok) ss += (o->theta[s] - cm.mean_estimate) * (o->theta[s] - cm.mean_estimate);
                    cm.empirical_sd = std::sqrt(ss / (R - 1.0));
                }
            } else {
                cm.mean_estimate = cm.mean_bias = cm.mean_se_hat = cm.coverage = std::nan("");
            }
            mm.coordinates.push_back(cm);
        }
        if (mm.method == Method::MRBEE_iterative) {
            OutlierRecovery rec;
            double exact = 0.0, sens = 0.0, sens_n = 0.0, fdr = 0.0, frac = 0.0;
            for (const auto& r : records) {
                const auto& o = r.outcomes[k];
                if (!o.ok) continue;
                exact += o.flagged == r.truth ? 1.0 : 0.0;
                std::vector<Eigen::Index> hit;
                std::set_intersection(o.flagged.begin(), o.flagged.end(), r.truth.begin(), r.truth.end(),
                                      std::back_inserter(hit));
                if (!r.truth.empty()) {
                    sens += static_cast<double>(hit.size()) / static_cast<double>(r.truth.size());
                    sens_n += 1.0;
                }
                const double false_hits = static_cast<double>(o.flagged.size() - hit.size());
                fdr += false_hits / std::max<double>(1.0, static_cast<double>(o.flagged.size()));
                frac += static_cast<double>(o.flagged.size()) / static_cast<double>(std::max<Eigen::Index>(r.m, 1));
            }
            const double denom = std::max(R, 1.0);
            rec.exact_rate = exact / denom;
            rec.sensitivity = sens_n > 0.0 ? sens / sens_n : std::nan("");
            rec.fdr = fdr / denom;
            rec.flagged_fraction = frac / denom;
            mm.recovery = rec;
        }
        metrics.methods.push_back(std::move(mm));
    }
    metrics.records = std::move(records);
    return metrics;
}

ReplicationMetrics run_replications(const SimConfig& config) {
    validate_sim_config(config);
    const std::size_t R = config.replications;
    std::vector<ReplicationRecord> records(R);
    unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, R));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t r = next.fetch_add(1);
            if (r >= R) return;
            try {
                records[r] = fit_replication(config, simulate_replication(config, r));
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(R);
                return;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return aggregate(config, std::move(records));
}

}  // namespace mrbee
