#include "mrbee/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mrbee/errors.hpp"
#include "mrbee/gwas_io.hpp"

namespace mrbee {
namespace {

double min_eigen(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

double max_abs_eigen(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_pd(const Matrix& a) {
    const double scale = max_abs_eigen(a);
    return scale > 0.0 && min_eigen(a) > 1e-12 * scale;
}

bool is_psd(const Matrix& a) {
    const double scale = max_abs_eigen(a);
    return min_eigen(a) >= -1e-10 * std::max(scale, 1e-300);
}

const Matrix& require_overlap(const PopulationSpec& spec) {
    if (!spec.overlap) throw InputError("theory: an overlap matrix is required");
    return *spec.overlap;
}

Matrix psd_inverse(const Matrix& a, const char* what) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) throw InputError(std::string("theory: ") + what + " is not positive definite");
    return llt.solve(Matrix::Identity(a.rows(), a.cols()));
}

double require_c0(std::optional<double> c0) {
    if (!c0 || !(*c0 >= 0.0) || !std::isfinite(*c0)) {
        throw InputError("theory: this regime requires a finite nonnegative c0");
    }
    return *c0;
}

}  // namespace

void validate_spec(const PopulationSpec& spec, bool strict) {
    const Eigen::Index p = spec.p;
    if (p < 1) throw InputError("population: p must be at least 1");
    if (spec.theta.size() != p) throw InputError("population: theta must have length p");
    if (spec.Psi_bb.rows() != p || spec.Psi_bb.cols() != p) throw InputError("population: Psi_bb must be p x p");
    if (spec.Sigma_uu.rows() != p || spec.Sigma_uu.cols() != p) throw InputError("population: Sigma_uu must be p x p");
    if (spec.sigma_uv.size() != p) throw InputError("population: sigma_uv must have length p");
    if (spec.n.size() != p + 1) throw InputError("population: n must have length p + 1 (outcome first)");
    if (!spec.theta.allFinite() || !spec.Psi_bb.allFinite() || !spec.Sigma_uu.allFinite() ||
        !spec.sigma_uv.allFinite() || !std::isfinite(spec.sigma_vv)) {
        throw InputError("population: non-finite entries");
    }
    for (Eigen::Index s = 0; s <= p; ++s) {
        if (!(spec.n[s] >= 1.0) || spec.n[s] != std::floor(spec.n[s])) {
            throw InputError("population: sample sizes must be positive integers");
        }
    }
    if (spec.m < 1) throw InputError("population: m must be at least 1");
    if (!is_symmetric(spec.Psi_bb, 1e-10) || !is_symmetric(spec.Sigma_uu, 1e-10)) {
        throw InputError("population: Psi_bb and Sigma_uu must be symmetric");
    }
    if (!is_pd(spec.Psi_bb)) throw InputError("population: Psi_bb is not positive definite");
    Matrix joint(p + 1, p + 1);
    joint.topLeftCorner(p, p) = spec.Sigma_uu;
    joint.col(p).head(p) = spec.sigma_uv;
    joint.row(p).head(p) = spec.sigma_uv.transpose();
    joint(p, p) = spec.sigma_vv;
    if (strict) {
        if (!is_pd(spec.Sigma_uu)) throw InputError("population: Sigma_uu is not positive definite");
        if (!(spec.sigma_vv > 0.0)) throw InputError("population: sigma_vv must be positive");
    } else if (!(spec.sigma_vv >= 0.0)) {
        throw InputError("population: sigma_vv must be nonnegative");
    }
    if (!is_psd(joint)) throw InputError("population: joint (u, v) covariance is not positive semidefinite");
    if (spec.overlap) validate_overlap(*spec.overlap, spec.n);
}

DerivedMoments derive_moments(const PopulationSpec& spec) {
    const Eigen::Index p = spec.p;
    DerivedMoments d;
    d.Sigma_xx = spec.Psi_bb + spec.Sigma_uu;
    d.sigma_xy = d.Sigma_xx * spec.theta + spec.sigma_uv;
    d.sigma_yy = spec.theta.dot(spec.Psi_bb * spec.theta) + spec.theta.dot(spec.Sigma_uu * spec.theta) +
                 2.0 * spec.theta.dot(spec.sigma_uv) + spec.sigma_vv;
    if (spec.overlap) {
        const Matrix& N = *spec.overlap;
        d.Delta_xx.resize(p, p);
        d.delta_xy.resize(p);
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index s = 0; s < p; ++s) {
                d.Delta_xx(j, s) = N(j + 1, s + 1) / (spec.n[j + 1] * spec.n[s + 1]);
            }
            d.delta_xy[j] = N(0, j + 1) / (spec.n[0] * spec.n[j + 1]);
        }
    }
    return d;
}

ErrorCovariance error_cov_theoretical(const PopulationSpec& spec) {
    require_overlap(spec);
    const DerivedMoments d = derive_moments(spec);
    return ErrorCovariance::from_blocks(d.Delta_xx.cwiseProduct(d.Sigma_xx), d.delta_xy.cwiseProduct(d.sigma_xy),
                                        d.sigma_yy / spec.n[0]);
}

ScoreExpectation ivw_score_expectation(const PopulationSpec& spec) {
    require_overlap(spec);
    const DerivedMoments d = derive_moments(spec);
    const Eigen::Index p = spec.p;
    ScoreExpectation out;
    out.total = d.Delta_xx.cwiseProduct(d.Sigma_xx) * spec.theta - d.delta_xy.cwiseProduct(d.sigma_xy);
    const Matrix shifted = d.Delta_xx - d.delta_xy * Vector::Ones(p).transpose();
    out.measurement = shifted.cwiseProduct(d.Sigma_xx) * spec.theta;
    out.confounder = d.delta_xy.cwiseProduct(spec.sigma_uv);
    return out;
}

SpecialFraction special_overlap_fraction(const PopulationSpec& spec) {
    if (spec.p != 1) throw InputError("special overlap fraction requires p = 1");
    const DerivedMoments d = derive_moments(spec);
    if (d.sigma_xy[0] == 0.0) throw InputError("special overlap fraction: sigma_xy is zero");
    SpecialFraction out;
    out.value = d.Sigma_xx(0, 0) * spec.theta[0] / d.sigma_xy[0];
    out.feasible = out.value >= 0.0 && out.value <= 1.0;
    return out;
}

Regime parse_regime(const std::string& text) {
    if (text == "i") return Regime::I;
    if (text == "ii") return Regime::II;
    if (text == "iii") return Regime::III;
    if (text == "iv") return Regime::IV;
    throw InputError("unknown regime '" + text + "' (expected i, ii, iii or iv)");
}

std::string regime_name(Regime r) {
    switch (r) {
        case Regime::I: return "i";
        case Regime::II: return "ii";
        case Regime::III: return "iii";
        case Regime::IV: return "iv";
    }
    return "?";
}

double n_min(const PopulationSpec& spec) { return spec.n.minCoeff(); }

Matrix psi_error_limit(const PopulationSpec& spec) { return n_min(spec) * error_cov_theoretical(spec).full; }

double psi_theta(const PopulationSpec& spec) {
    const Matrix psi = psi_error_limit(spec);
    const Eigen::Index p = spec.p;
    const Vector& t = spec.theta;
    return psi(p, p) + t.dot(psi.topLeftCorner(p, p) * t) - 2.0 * t.dot(psi.col(p).head(p));
}

IvwAsymptotics ivw_asymptotics(const PopulationSpec& spec, Regime regime, std::optional<double> c0) {
    const Eigen::Index p = spec.p;
    const Matrix psi = psi_error_limit(spec);
    const Matrix psi_WW = psi.topLeftCorner(p, p);
    const Vector psi_Ww = psi.col(p).head(p);
    const Vector drift = psi_WW * spec.theta - psi_Ww;
    const Matrix Psi_inv = psd_inverse(spec.Psi_bb, "Psi_bb");
    const double nm = n_min(spec);

    IvwAsymptotics out;
    switch (regime) {
        case Regime::I:
            out.bias = Vector::Zero(p);
            out.cov = Matrix(psi_theta(spec) * Psi_inv / nm);
            out.rate = "sqrt(n_min)";
            break;
        case Regime::II:
            out.bias = -require_c0(c0) * Psi_inv * drift / std::sqrt(nm);
            out.cov = Matrix(psi_theta(spec) * Psi_inv / nm);
            out.rate = "sqrt(n_min)";
            break;
        case Regime::III: {
            const double c = require_c0(c0);
            const Matrix A = spec.Psi_bb + c * psi_WW;
            out.bias = -c * A.ldlt().solve(drift);
            out.rate = "inconsistent: plim bias";
            break;
        }
        case Regime::IV:
            out.bias = pseudo_inverse_sym(psi_WW) * psi_Ww - spec.theta;
            out.rate = "inconsistent: plim bias";
            break;
    }
    return out;
}

Matrix build_commutation_matrix(Eigen::Index d) {
    if (d < 1) throw InputError("commutation matrix: d must be at least 1");
    Matrix K = Matrix::Zero(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) K(i + j * d, j + i * d) = 1.0;
    }
    return K;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Matrix compute_sigma_bc(const Matrix& psi_full, const Vector& theta) {
    const Eigen::Index p = theta.size();
    const Eigen::Index d = p + 1;
    if (psi_full.rows() != d || psi_full.cols() != d) throw InputError("Sigma_BC: Psi must be (p+1)x(p+1)");
    Vector vartheta(d);
    vartheta.head(p) = theta;
    vartheta[p] = -1.0;
    const Matrix selector = Matrix::Identity(d, d).topRows(p);
    const Matrix L = kronecker(vartheta.transpose(), selector);
    const Matrix middle = (Matrix::Identity(d * d, d * d) + build_commutation_matrix(d)) * kronecker(psi_full, psi_full);
    Matrix out = L * middle * L.transpose();
    return 0.5 * (out + out.transpose());
}

Matrix compute_sigma_bc(const PopulationSpec& spec, const Vector& theta) {
    return compute_sigma_bc(psi_error_limit(spec), theta);
}

MrbeeAsymptotics mrbee_asymptotics(const PopulationSpec& spec, Regime regime, std::optional<double> c0) {
    const Matrix Psi_inv = psd_inverse(spec.Psi_bb, "Psi_bb");
    const double nm = n_min(spec);
    MrbeeAsymptotics out;
    switch (regime) {
        case Regime::I:
            out.limit_cov = psi_theta(spec) * Psi_inv;
            out.rate = std::sqrt(nm);
            out.rate_text = "sqrt(n_min)";
            break;
        case Regime::II:
            out.limit_cov = psi_theta(spec) * Psi_inv +
                            require_c0(c0) * Psi_inv * compute_sigma_bc(spec, spec.theta) * Psi_inv;
            out.rate = std::sqrt(nm);
            out.rate_text = "sqrt(n_min)";
            break;
        case Regime::III:
            out.limit_cov = Psi_inv * compute_sigma_bc(spec, spec.theta) * Psi_inv;
            out.rate = nm / std::sqrt(static_cast<double>(spec.m));
            out.rate_text = "sqrt(n_min^2/m)";
            break;
        case Regime::IV:
            throw InputError("MRBEE asymptotics are defined for regimes i, ii and iii only");
    }
    out.limit_cov = 0.5 * (out.limit_cov + out.limit_cov.transpose()).eval();
    out.cov = out.limit_cov / (out.rate * out.rate);
    // Same arithmetic as IVW regime i so the two agree exactly.
    if (regime == Regime::I) out.cov = *ivw_asymptotics(spec, Regime::I).cov;
    return out;
}

Matrix ar1_matrix(Eigen::Index d, double rho) {
    Matrix out(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) out(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    }
    return out;
}

PopulationSpec spec_from_heritability(const Vector& theta, const HeritabilitySpec& h, const Vector& n,
                                      std::optional<Matrix> overlap, Eigen::Index m) {
    const Eigen::Index p = theta.size();
    if (h.exposure_h2.size() != p) throw InputError("heritability: exposure h2 must have length p");
    for (Eigen::Index s = 0; s < p; ++s) {
        if (!(h.exposure_h2[s] > 0.0 && h.exposure_h2[s] < 1.0)) throw InputError("heritability: exposure h2 outside (0,1)");
    }
    if (!(h.outcome_h2 > 0.0 && h.outcome_h2 < 1.0)) throw InputError("heritability: outcome h2 outside (0,1)");
    if (!(h.psi_diag > 0.0)) throw InputError("heritability: psi_diag must be positive");
    if (!(std::abs(h.genetic_ar1) < 1.0) || !(std::abs(h.noise_ar1) < 1.0)) {
        throw InputError("heritability: AR(1) coefficients must lie in (-1, 1)");
    }

    PopulationSpec spec;
    spec.p = p;
    spec.theta = theta;
    spec.n = n;
    spec.overlap = std::move(overlap);
    spec.m = m;
    spec.Psi_bb = h.psi_diag * ar1_matrix(p, h.genetic_ar1);

    Vector sd_u(p);
    for (Eigen::Index s = 0; s < p; ++s) sd_u[s] = std::sqrt(spec.Psi_bb(s, s) * (1.0 / h.exposure_h2[s] - 1.0));
    const Matrix corr = ar1_matrix(p + 1, h.noise_ar1);
    spec.Sigma_uu = sd_u.asDiagonal() * corr.topLeftCorner(p, p) * sd_u.asDiagonal();

    // sigma_uv = c * sd_v; sd_v solves sd_v^2 + 2 (theta.c) sd_v + theta' Sigma_xx theta - sigma_yy = 0.
    const Vector c = sd_u.cwiseProduct(corr.col(p).head(p));
    const double genetic = theta.dot(spec.Psi_bb * theta);
    if (!(genetic > 0.0)) throw InputError("heritability: theta^T Psi theta must be positive");
    const double sigma_yy = genetic / h.outcome_h2;
    const double tc = theta.dot(c);
    const double txx = theta.dot((spec.Psi_bb + spec.Sigma_uu) * theta);
    const double disc = tc * tc - txx + sigma_yy;
    if (disc < 0.0) throw InputError("heritability: no noise variance attains the outcome heritability");
    const double sd_v = -tc + std::sqrt(disc);
    if (!(sd_v > 0.0)) throw InputError("heritability: outcome heritability is unattainable with this noise correlation");
    spec.sigma_vv = sd_v * sd_v;
    spec.sigma_uv = c * sd_v;
    return spec;
}

Matrix full_overlap(const Vector& n) {
    const Eigen::Index k = n.size();
    Matrix out(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) out(i, j) = std::min(n[i], n[j]);
    }
    return out;
}

Matrix no_overlap(const Vector& n) { return Matrix(n.asDiagonal()); }

Matrix outcome_fraction_overlap(const Vector& n, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw InputError("overlap fraction must lie in [0, 1]");
    Matrix out = full_overlap(n);
    const double shared = std::round(fraction * n[0]);
    for (Eigen::Index s = 1; s < n.size(); ++s) {
        if (shared > n[s]) throw InputError("overlap fraction exceeds an exposure cohort size");
        out(0, s) = shared;
        out(s, 0) = shared;
    }
    return out;
}

}  // namespace mrbee
