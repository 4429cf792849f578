// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mrbee/error_cov.hpp"
#include "mrbee/estimators.hpp"
#include "mrbee/linalg.hpp"
#include "mrbee/pleiotropy.hpp"
#include "mrbee/simulator.hpp"
#include "mrbee/theory.hpp"

using namespace mrbee;

namespace {

const double kThetaUni = 0.3 / std::sqrt(2.0);

struct Outcome {
    bool pass = true;
    std::vector<std::string> lines;

    void check(bool ok, const std::string& text) {
        pass = pass && ok;
        lines.push_back(std::string(ok ? "ok   " : "FAIL ") + text);
    }
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

HeritabilitySpec default_h(Eigen::Index p) {
    HeritabilitySpec h;
    h.exposure_h2 = Vector::Constant(p, 0.3);
    h.outcome_h2 = 0.15;
    h.noise_ar1 = 0.5;
    return h;
}

PopulationSpec uni_spec(double theta, double n, Eigen::Index m, std::optional<Matrix> overlap = std::nullopt) {
    const Vector nn = Vector::Constant(2, n);
    return spec_from_heritability(Vector::Constant(1, theta), default_h(1), nn, overlap ? *overlap : full_overlap(nn), m);
}

PopulationSpec p6_spec(Eigen::Index m) {
    Vector theta(6);
    theta << 0.3, 0.3, -0.3, -0.3, 0.0, 0.0;
    HeritabilitySpec h = default_h(6);
    h.genetic_ar1 = -0.5;
    const Vector n = Vector::Constant(7, 20000.0);
    return spec_from_heritability(theta, h, n, full_overlap(n), m);
}

SimConfig sim(const PopulationSpec& spec, std::size_t reps, std::uint64_t seed, SimMode mode,
              std::vector<Method> methods) {
    SimConfig c;
    c.spec = spec;
    c.replications = reps;
    c.seed = seed;
    c.mode = mode;
    c.methods = std::move(methods);
    c.threads = 0;
    return c;
}

const MethodMetrics& find(const ReplicationMetrics& r, Method m) {
    for (const auto& mm : r.methods)
        if (mm.method == m) return mm;
    throw std::runtime_error("method missing from metrics");
}

double mc_se(const CoordinateMetrics& c, std::size_t used) {
    return c.empirical_sd.value_or(0.0) / std::sqrt(static_cast<double>(used));
}

// Shared simulation runs for criteria 1, 2 and 8.
struct SharedRuns {
    std::vector<Eigen::Index> grid{250, 500, 1000};
    std::vector<ReplicationMetrics> uni;
    ReplicationMetrics p6;
};

SharedRuns run_shared() {
    SharedRuns s;
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
        s.uni.push_back(run_replications(sim(uni_spec(kThetaUni, 20000, s.grid[k]), 1000, 1000 + k,
                                             SimMode::Individual, {Method::IVW, Method::MRBEE})));
    }
    s.p6 = run_replications(sim(p6_spec(500), 1000, 2000, SimMode::Individual, {Method::IVW, Method::MRBEE}));
    return s;
}

Outcome criterion1(const SharedRuns& s) {
    Outcome o;
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
        const auto& bee = find(s.uni[k], Method::MRBEE);
        const auto& c = bee.coordinates[0];
        o.check(bee.used == 1000 && std::abs(c.mean_bias) < 0.01,
                fmt("m=%ld MRBEE mean bias %.6f (|.| < 0.01), used %zu", static_cast<long>(s.grid[k]), c.mean_bias,
                    bee.used));
    }
    const auto& ivw = find(s.uni.back(), Method::IVW);
    const auto& ci = ivw.coordinates[0];
    const double thr = 3.0 * mc_se(ci, ivw.used);
    o.check(std::abs(ci.mean_bias) > thr, fmt("m=1000 IVW mean bias %.6f (|.| > %.6f)", ci.mean_bias, thr));
    const auto& bee6 = find(s.p6, Method::MRBEE);
    for (std::size_t j = 0; j < bee6.coordinates.size(); ++j) {
        const auto& c = bee6.coordinates[j];
        o.check(std::abs(c.mean_bias) < 0.015,
                fmt("p=6 coordinate %zu (theta %.1f) MRBEE mean bias %.6f (|.| < 0.015)", j + 1, c.truth, c.mean_bias));
    }
    return o;
}

Outcome criterion2(const SharedRuns& s) {
    Outcome o;
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
        const double cov = find(s.uni[k], Method::MRBEE).coordinates[0].coverage;
        o.check(cov >= 0.93 && cov <= 0.97,
                fmt("m=%ld MRBEE coverage %.3f in [0.93, 0.97]", static_cast<long>(s.grid[k]), cov));
    }
    const double ivw = find(s.uni.back(), Method::IVW).coordinates[0].coverage;
    o.check(ivw < 0.90, fmt("m=1000 IVW coverage %.3f (< 0.90)", ivw));
    return o;
}

Outcome criterion3() {
    Outcome o;
    const auto spec = uni_spec(kThetaUni, 20000, 1000);
    const auto frac = special_overlap_fraction(spec);
    o.check(frac.feasible && std::abs(frac.value - 0.77) <= 0.01,
            fmt("special fraction %.4f vs 0.77 +- 0.01", frac.value));
    const Vector n = Vector::Constant(2, 20000.0);
    const Matrix overlap = outcome_fraction_overlap(n, frac.value);
    const auto run =
        run_replications(sim(uni_spec(kThetaUni, 20000, 1000, overlap), 1000, 3000, SimMode::Individual, {Method::IVW}));
    const auto& ivw = find(run, Method::IVW);
    const auto& c = ivw.coordinates[0];
    const double thr = 3.0 * mc_se(c, ivw.used);
    o.check(std::abs(c.mean_bias) < thr, fmt("n01=%.0f IVW mean bias %.6f (|.| < %.6f = 3 MC SE)", overlap(0, 1),
                                             c.mean_bias, thr));
    return o;
}

Outcome criterion4() {
    Outcome o;
    std::uint64_t seed = 4000;
    for (double c0 : {0.1, 0.2}) {
        for (Eigen::Index m : {250, 500, 1000, 2500, 5000}) {
            const double n = std::round(static_cast<double>(m) / c0);
            const auto spec = uni_spec(0.5, n, m);
            const double pred = ivw_asymptotics(spec, Regime::III, c0).bias[0];
            const auto run = run_replications(sim(spec, 1000, seed++, SimMode::DirectErrors, {Method::IVW}));
            const auto& ivw = find(run, Method::IVW);
            const auto& c = ivw.coordinates[0];
            const double se = mc_se(c, ivw.used);
            o.check(std::abs(c.mean_bias - pred) < 3.0 * se,
                    fmt("m/n=%.1f m=%ld: IVW bias %.6f vs predicted %.6f (diff %.2f MC SE)", c0, static_cast<long>(m),
                        c.mean_bias, pred, (c.mean_bias - pred) / se));
        }
    }
    return o;
}

Outcome criterion5() {
    Outcome o;
    struct Case {
        int id;
        std::vector<Eigen::Index> grid;
        std::function<double(double)> n_of_m;
        bool n2_over_m;
        double min_coverage;
    };
    const std::vector<Case> cases{
        {1, {2500, 10000, 25000, 50000}, [](double m) { return std::pow(m, 0.9) / 0.1; }, true, 0.92},
        {2, {250, 1000, 2500, 5000}, [](double m) { return m / 0.1; }, false, 0.93},
        {3, {250, 1000, 2500, 5000}, [](double m) { return m * m / 5.0; }, false, 0.93},
        {4, {250, 1000, 2500, 5000}, [](double m) { return m * m * m / 5.0; }, false, 0.93},
    };
    std::uint64_t seed = 5000;
    for (const auto& cs : cases) {
        std::vector<double> scaled;
        std::string row = fmt("case %d scaled sd:", cs.id);
        for (Eigen::Index m : cs.grid) {
            const double n = std::round(cs.n_of_m(static_cast<double>(m)));
            const auto spec = uni_spec(0.5, n, m);
            const auto run = run_replications(sim(spec, 2000, seed++, SimMode::DirectErrors, {Method::MRBEE}));
            const auto& bee = find(run, Method::MRBEE);
            const auto& c = bee.coordinates[0];
            const double factor = cs.n2_over_m ? n / std::sqrt(static_cast<double>(m)) : std::sqrt(n);
            scaled.push_back(factor * c.empirical_sd.value_or(0.0));
            row += fmt(" %.4f", scaled.back());
            o.check(c.coverage >= cs.min_coverage, fmt("case %d m=%ld n=%.0f coverage %.3f (>= %.2f)", cs.id,
                                                      static_cast<long>(m), n, c.coverage, cs.min_coverage));
        }
        const double ratio = *std::max_element(scaled.begin(), scaled.end()) /
                             *std::min_element(scaled.begin(), scaled.end());
        o.check(ratio <= 1.15, row + fmt(" (max/min %.3f <= 1.15)", ratio));
    }
    return o;
}

Outcome criterion6() {
    Outcome o;
    const double n = 5000;
    const Vector nn = Vector::Constant(3, n);
    Vector theta(2);
    theta << 0.3, -0.2;
    const auto spec = spec_from_heritability(theta, default_h(2), nn, outcome_fraction_overlap(nn, 0.5), 1000);
    SimConfig cfg = sim(spec, 2000, 6000, SimMode::Individual, {Method::IVW});
    cfg.error_cov_source = ErrorCovSource::Theoretical;  // no null panel needed here
    const Matrix theory = n * error_cov_theoretical(spec).full;

    // Per replication: n times the mean outer product of the error rows.
    Matrix sum = Matrix::Zero(3, 3), sum2 = Matrix::Zero(3, 3);
    const std::size_t reps = cfg.replications;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto rep = simulate_replication(cfg, r);
        Matrix e(rep.panel.m(), 3);
        e << rep.panel.B_raw - rep.B_true, rep.panel.alpha_raw - rep.alpha_true;
        const Matrix stat = n * e.transpose() * e / static_cast<double>(e.rows());
        sum += stat;
        sum2 += stat.cwiseProduct(stat);
    }
    const double R = static_cast<double>(reps);
    const Matrix mean = sum / R;
    const Matrix se = ((sum2 / R - mean.cwiseProduct(mean)) / (R - 1.0)).cwiseSqrt();
    const char* names[] = {"exposure1", "exposure2", "outcome"};
    for (Eigen::Index a = 0; a < 3; ++a) {
        for (Eigen::Index b = a; b < 3; ++b) {
            const double z = (mean(a, b) - theory(a, b)) / se(a, b);
            o.check(std::abs(z) < 3.0, fmt("%s x %s: empirical %.5f vs theory %.5f (%.2f MC SE)", names[a], names[b],
                                           mean(a, b), theory(a, b), z));
        }
    }
    return o;
}

Outcome criterion7() {
    Outcome o;
    const Vector nn = Vector::Constant(3, 20000.0);
    Vector theta(2);
    theta << 0.3, -0.2;
    const auto spec = spec_from_heritability(theta, default_h(2), nn, outcome_fraction_overlap(nn, 0.5), 1000);
    const Matrix sigma = to_correlation(error_cov_theoretical(spec)).R;
    const Matrix w = inv_sqrt_pd(sigma);
    auto median_error = [&](Eigen::Index M, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<double> errs;
        for (int d = 0; d < 200; ++d) {
            const auto ec = estimate_error_cov(draw_normal_rows(sigma, M, rng));
            errs.push_back(spectral_norm(w * ec.full * w - Matrix::Identity(3, 3)));
        }
        std::sort(errs.begin(), errs.end());
        return 0.5 * (errs[99] + errs[100]);
    };
    const double e2 = median_error(2000, 7001);
    const double e8 = median_error(8000, 7002);
    const double ratio = e2 / e8;
    o.check(ratio >= 1.5 && ratio <= 2.7,
            fmt("median error M=2000 %.5f, M=8000 %.5f, shrink factor %.3f in [1.5, 2.7]", e2, e8, ratio));
    return o;
}

Outcome criterion8(const SharedRuns& s) {
    Outcome o;
    auto check_run = [&](const ReplicationMetrics& r, const std::string& label) {
        const auto& bee = find(r, Method::MRBEE);
        for (std::size_t j = 0; j < bee.coordinates.size(); ++j) {
            const auto& c = bee.coordinates[j];
            const double ratio = c.mean_se_hat / c.empirical_sd.value_or(0.0);
            o.check(ratio >= 0.9 && ratio <= 1.1,
                    fmt("%s coordinate %zu: mean se %.6f / empirical sd %.6f = %.3f in [0.9, 1.1]", label.c_str(), j + 1,
                        c.mean_se_hat, c.empirical_sd.value_or(0.0), ratio));
        }
    };
    check_run(s.uni[1], "univariable m=500");
    check_run(s.uni[2], "univariable m=1000");
    check_run(s.p6, "p=6 m=500");
    return o;
}

Outcome criterion9() {
    Outcome o;
    SimConfig cfg = sim(uni_spec(kThetaUni, 20000, 1000), 200, 9000, SimMode::DirectErrors, {Method::MRBEE_iterative});
    cfg.uhp = UhpConfig{5, 8.0};
    cfg.iterative.rule.kind = OutlierRule::Kind::LogM;
    cfg.iterative.rule.c0 = 3.0;
    const auto run = run_replications(cfg);
    const auto& it = find(run, Method::MRBEE_iterative);
    o.check(it.recovery && it.recovery->exact_rate >= 0.95,
            fmt("5 outliers at 8 SD, log-m rule C0=3: exact recovery %.3f (>= 0.95), sensitivity %.3f, FDR %.4f",
                it.recovery->exact_rate, it.recovery->sensitivity, it.recovery->fdr));

    SimConfig null_cfg = sim(uni_spec(kThetaUni, 20000, 1000), 200, 9100, SimMode::DirectErrors,
                             {Method::MRBEE_iterative});
    null_cfg.iterative.rule.kind = OutlierRule::Kind::FDR;
    null_cfg.iterative.rule.q = 0.05;
    const auto null_run = run_replications(null_cfg);
    const auto& nit = find(null_run, Method::MRBEE_iterative);
    double worst = 0.0;
    for (const auto& rec : null_run.records)
        if (rec.outcomes[0].ok)
            worst = std::max(worst, static_cast<double>(rec.outcomes[0].flagged.size()) / static_cast<double>(rec.m));
    o.check(nit.recovery && nit.recovery->flagged_fraction <= 0.07,
            fmt("null runs, BH q=0.05: mean flagged fraction %.4f (<= 0.07), worst run %.3f",
                nit.recovery->flagged_fraction, worst));
    return o;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Matrix a(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) a(i, j) = normal(rng);
    return a;
}

Outcome criterion10() {
    Outcome o;
    std::mt19937_64 rng(10);

    bool bitwise = true;
    double worst_qr = 0.0;
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index p = 1 + t % 5;
        const Matrix B = random_matrix(6 + 10 * (t % 4), p, rng);
        const Vector a = random_matrix(B.rows(), 1, rng).col(0);
        const auto ivw = fit_ivw(B, a);
        bitwise = bitwise && fit_mrbee(B, a, ErrorCovariance::zero(p)).theta == ivw.theta;
        const Vector qr = B.householderQr().solve(a);
        worst_qr = std::max(worst_qr, (ivw.theta - qr).cwiseAbs().maxCoeff());
    }
    o.check(bitwise, "MRBEE with zero error covariance equals IVW bitwise (200 panels)");
    o.check(worst_qr <= 1e-10, fmt("fit_ivw vs Householder QR least squares: max diff %.2e (<= 1e-10)", worst_qr));

    double worst_root = 0.0;
    int roots = 0;
    for (std::uint64_t r = 0; r < 20; ++r) {
        SimConfig cfg = sim(r % 2 ? p6_spec(500) : uni_spec(kThetaUni, 20000, 1000), 1, 10000 + r, SimMode::DirectErrors,
                            {Method::MRBEE});
        const auto rep = simulate_replication(cfg, 0);
        const auto est = fit_mrbee(rep.panel, rep.error_cov_z);
        if (est.hessian_repaired) continue;
        ++roots;
        worst_root = std::max(worst_root, score_bee(est.theta, rep.panel, rep.error_cov_z).score.cwiseAbs().maxCoeff());
    }
    o.check(roots > 0 && worst_root <= 1e-8,
            fmt("score root at the MRBEE estimate: max |score| %.2e over %d fits (<= 1e-8)", worst_root, roots));

    double worst_decomp = 0.0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const Eigen::Index p = 1 + t % 4;
        PopulationSpec spec;
        spec.p = p;
        spec.theta = 0.3 * random_matrix(p, 1, rng).col(0);
        const Matrix g = random_matrix(p, p, rng);
        spec.Psi_bb = g * g.transpose() / static_cast<double>(p) + 0.5 * Matrix::Identity(p, p);
        const Matrix h = random_matrix(p + 1, p + 1, rng);
        const Matrix joint = h * h.transpose() / static_cast<double>(p + 1) + 0.3 * Matrix::Identity(p + 1, p + 1);
        spec.Sigma_uu = joint.topLeftCorner(p, p);
        spec.sigma_uv = joint.col(p).head(p);
        spec.sigma_vv = joint(p, p);
        spec.n = Vector::Constant(p + 1, 10000.0 + 1000.0 * t);
        spec.overlap = outcome_fraction_overlap(spec.n, unif(rng));
        spec.m = 500;
        const auto e = ivw_score_expectation(spec);
        worst_decomp = std::max(worst_decomp, (e.total - (e.measurement - e.confounder)).cwiseAbs().maxCoeff());
    }
    o.check(worst_decomp <= 1e-14,
            fmt("score bias decomposition total = measurement - confounder: max diff %.2e (<= 1e-14)", worst_decomp));

    bool involution = true;
    for (Eigen::Index d = 1; d <= 6; ++d) {
        const Matrix K = build_commutation_matrix(d);
        involution = involution && (K * K - Matrix::Identity(d * d, d * d)).cwiseAbs().maxCoeff() == 0.0;
        const Matrix A = random_matrix(d, d, rng);
        const Matrix At = A.transpose();
        involution = involution && K * Eigen::Map<const Vector>(A.data(), d * d) == Eigen::Map<const Vector>(At.data(), d * d);
    }
    o.check(involution, "commutation matrix: K K = I and K vec(A) = vec(A^T) for d = 1..6");

    // Sigma_BC against the Monte-Carlo variance of the centred quadratic error term.
    const double n = 5000;
    const Eigen::Index m = 200;
    const auto spec = uni_spec(kThetaUni, n, m);
    const auto ec = error_cov_theoretical(spec);
    const double oracle = compute_sigma_bc(spec, spec.theta)(0, 0);
    const double a = n * ec.full(0, 0), b = n * ec.full(0, 1), c = n * ec.full(1, 1);
    const double t = spec.theta[0];
    const double scalar = 2 * a * a * t * t - 4 * a * b * t + a * c + b * b;
    Rng draw(10101);
    double s1 = 0.0, s2 = 0.0;
    const int draws = 5000;
    for (int r = 0; r < draws; ++r) {
        const Matrix e = draw_normal_rows(ec.full, m, draw);
        const double x = n / std::sqrt(static_cast<double>(m)) *
                         ((e.col(0).squaredNorm() - m * ec.full(0, 0)) * t - (e.col(0).dot(e.col(1)) - m * ec.full(0, 1)));
        s1 += x;
        s2 += x * x;
    }
    const double var = s2 / draws - (s1 / draws) * (s1 / draws);
    o.check(std::abs(var / oracle - 1.0) < 0.05 && std::abs(scalar / oracle - 1.0) < 1e-12,
            fmt("Sigma_BC (p=1) %.5f, scalar formula %.5f, Monte-Carlo %.5f (rel diff %.3f < 0.05)", oracle, scalar, var,
                var / oracle - 1.0));
    return o;
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;
    bool all = true;
    auto report = [&](int id, const char* title, const std::function<Outcome()>& fn) {
        const auto t0 = clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(clock::now() - t0).count();
        all = all && o.pass;
        std::printf("C%d %s %s (%.1fs)\n", id, o.pass ? "PASS" : "FAIL", title, secs);
        for (const auto& l : o.lines) std::printf("    %s\n", l.c_str());
        std::fflush(stdout);
    };

    const auto t0 = clock::now();
    SharedRuns shared = run_shared();
    std::printf("shared univariable and p=6 sweeps: %.1fs\n",
                std::chrono::duration<double>(clock::now() - t0).count());

    report(1, "unbiasedness", [&] { return criterion1(shared); });
    report(2, "coverage", [&] { return criterion2(shared); });
    report(3, "special overlap fraction", criterion3);
    report(4, "IVW probability-limit bias", criterion4);
    report(5, "MRBEE rate checks", criterion5);
    report(6, "error covariance formula", criterion6);
    report(7, "error covariance convergence rate", criterion7);
    report(8, "sandwich validity", [&] { return criterion8(shared); });
    report(9, "pleiotropy recovery", criterion9);
    report(10, "oracle equivalences", criterion10);
    return all ? 0 : 1;
}
