// Writes the bundled synthetic summary statistics used by the golden test:
// two exposures and one outcome, 400 causal variants (3 with horizontal
// pleiotropy) and 3000 null variants, drawn in direct-error mode.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "mrbee/simulator.hpp"
#include "mrbee/stats.hpp"
#include "mrbee/theory.hpp"

namespace {

struct AllelePair {
    char effect;
    char other;
};

constexpr AllelePair kPairs[] = {{'A', 'C'}, {'A', 'G'}, {'C', 'T'}, {'G', 'T'}};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("tests/data/golden");
    fs::create_directories(dir);

    const Eigen::Index m_iv = 400;
    const Eigen::Index m_null = 3000;
    mrbee::Vector theta(2);
    theta << 0.3, -0.2;
    mrbee::HeritabilitySpec h;
    h.exposure_h2 = mrbee::Vector::Constant(2, 0.3);
    h.outcome_h2 = 0.1;
    h.genetic_ar1 = 0.3;
    const mrbee::Vector n = mrbee::Vector::Constant(3, 200000.0);
    const mrbee::Matrix overlap = mrbee::outcome_fraction_overlap(n, 0.5);
    const mrbee::PopulationSpec spec = mrbee::spec_from_heritability(theta, h, n, overlap, m_iv);

    mrbee::Rng rng(20240611);
    const mrbee::DirectDraw causal = mrbee::gen_direct_errors(spec, rng);
    const mrbee::Matrix sigma = mrbee::error_cov_theoretical(spec).full;
    const mrbee::Matrix null_errors = mrbee::draw_normal_rows(sigma, m_null, rng);

    const Eigen::Index m = m_iv + m_null;
    mrbee::Matrix effects(m, 3);  // exposure1, exposure2, outcome
    effects.topLeftCorner(m_iv, 2) = causal.B + causal.W_beta;
    effects.block(0, 2, m_iv, 1) = causal.alpha + causal.w_alpha;
    effects.bottomRows(m_null) = null_errors;
    const double se_outcome = std::sqrt(sigma(2, 2));
    for (Eigen::Index j : {Eigen::Index{17}, Eigen::Index{143}, Eigen::Index{301}}) {
        effects(j, 2) += (j % 2 == 0 ? 9.0 : -9.0) * se_outcome;
    }

    const char* names[3] = {"exposure1", "exposure2", "outcome"};
    for (int t = 0; t < 3; ++t) {
        std::ofstream out(dir / (std::string(names[t]) + ".tsv"));
        out << "variant_id\teffect_allele\tother_allele\tbeta\tse\tpval\tn\n";
        const double se = std::sqrt(sigma(t, t));
        for (Eigen::Index j = 0; j < m; ++j) {
            const AllelePair pair = kPairs[j % 4];
            double beta = effects(j, t);
            char ea = pair.effect;
            char oa = pair.other;
            if (t == 1 && j % 37 == 5) {
                std::swap(ea, oa);
                beta = -beta;
            }
            const double p = mrbee::stats::two_sided_normal_pvalue(beta / se);
            out << "rs" << 100000 + j << '\t' << ea << '\t' << oa << '\t' << fmt(beta) << '\t' << fmt(se) << '\t'
                << fmt(p) << '\t' << static_cast<long long>(n[t]) << '\n';
        }
        // A strand-ambiguous variant and an invalid row, both removed on load or harmonization.
        out << "rs_palindrome\tA\tT\t0.01\t" << fmt(se) << "\t0.5\t" << static_cast<long long>(n[t]) << '\n';
        out << "rs_bad_se\tA\tC\t0.01\t0\t0.5\t" << static_cast<long long>(n[t]) << '\n';
    }
    std::cout << "wrote fixture to " << dir.string() << '\n';
    return 0;
}
