#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "mrbee/errors.hpp"
#include "mrbee/gwas_io.hpp"
#include "test_util.hpp"

using namespace mrbee;

namespace {

const char* kHeader = "variant_id\teffect_allele\tother_allele\tbeta\tse\tpval\tn\n";

SummaryRow row(std::string id, char ea, char oa, double beta, double se, double p, long long n = 1000) {
    return SummaryRow{std::move(id), ea, oa, beta, se, p, n};
}

SummaryDataset dataset(std::string trait, std::vector<SummaryRow> rows) {
    SummaryDataset d;
    d.trait_id = std::move(trait);
    d.rows = std::move(rows);
    return d;
}

bool same_panel(const HarmonizedPanel& a, const HarmonizedPanel& b) {
    return a.trait_ids == b.trait_ids && a.variant_ids == b.variant_ids && a.effect_allele == b.effect_allele &&
           a.other_allele == b.other_allele && a.B_hat == b.B_hat && a.alpha_hat == b.alpha_hat && a.SE_B == b.SE_B &&
           a.SE_alpha == b.SE_alpha && a.B_raw == b.B_raw && a.alpha_raw == b.alpha_raw && a.n == b.n;
}

}  // namespace

TEST_CASE("load_summary_table reads a well-formed table") {
    const auto dir = testutil::temp_dir("load3");
    const auto path = testutil::write_file(dir / "trait.tsv", std::string(kHeader) +
                                                                  "rs1\tA\tG\t0.1\t0.02\t1e-6\t5000\n"
                                                                  "rs2\tC\tT\t-0.05\t0.02\t0.01\t5000\n"
                                                                  "rs3\tg\tc\t0.0\t0.03\t1\t5000\n");
    const SummaryDataset d = load_summary_table(path);
    CHECK(d.trait_id == "trait");
    REQUIRE(d.rows.size() == 3);
    CHECK(d.dropped_rows == 0);
    CHECK(d.rows[1].effect == doctest::Approx(-0.05));
    CHECK(d.rows[2].effect_allele == 'G');
    CHECK(d.sample_size() == 5000);
}

TEST_CASE("rows with invalid fields are dropped and counted") {
    const auto dir = testutil::temp_dir("drop");
    const auto path = testutil::write_file(dir / "t.tsv", std::string(kHeader) +
                                                              "rs1\tA\tG\t0.1\t0\t0.5\t100\n"
                                                              "rs2\tA\tG\t0.1\t0.1\t0.5\t100\n");
    const SummaryDataset d = load_summary_table(path);
    CHECK(d.rows.size() == 1);
    CHECK(d.dropped_rows == 1);

    const auto path2 = testutil::write_file(dir / "t2.tsv", std::string(kHeader) +
                                                                "rs1\tA\tG\tNA\t0.1\t0.5\t100\n"
                                                                "rs2\tA\tG\t0.1\t0.1\t1.5\t100\n"
                                                                "rs3\tA\tN\t0.1\t0.1\t0.5\t100\n"
                                                                "rs4\tA\tG\t0.1\t0.1\t0.5\n"
                                                                "rs5\tA\tG\t0.1\t0.1\t0.5\t100\n");
    const SummaryDataset d2 = load_summary_table(path2);
    CHECK(d2.rows.size() == 1);
    CHECK(d2.dropped_rows == 4);
}

TEST_CASE("column order does not matter") {
    const auto dir = testutil::temp_dir("order");
    const auto canonical = testutil::write_file(dir / "a.tsv", std::string(kHeader) +
                                                                   "rs1\tA\tG\t0.1\t0.02\t1e-6\t5000\n"
                                                                   "rs2\tC\tT\t-0.05\t0.02\t0.01\t5000\n");
    const auto shuffled = testutil::write_file(dir / "b.tsv",
                                               "n\tpval\tse\tbeta\tother_allele\teffect_allele\tvariant_id\n"
                                               "5000\t1e-6\t0.02\t0.1\tG\tA\trs1\n"
                                               "5000\t0.01\t0.02\t-0.05\tT\tC\trs2\n");
    const auto a = load_summary_table(canonical, {}, std::string("x"));
    const auto b = load_summary_table(shuffled, {}, std::string("x"));
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].variant_id == b.rows[i].variant_id);
        CHECK(a.rows[i].effect_allele == b.rows[i].effect_allele);
        CHECK(a.rows[i].other_allele == b.rows[i].other_allele);
        CHECK(a.rows[i].effect == b.rows[i].effect);
        CHECK(a.rows[i].se == b.rows[i].se);
        CHECK(a.rows[i].pvalue == b.rows[i].pvalue);
        CHECK(a.rows[i].n == b.rows[i].n);
    }
}

TEST_CASE("column remapping") {
    const auto dir = testutil::temp_dir("remap");
    const auto path = testutil::write_file(dir / "t.tsv",
                                           "SNP\tA1\tA2\tBETA\tSE\tP\tN\n"
                                           "rs1\tA\tG\t0.1\t0.02\t1e-6\t5000\n");
    ColumnSchema schema;
    schema.set("variant_id", "SNP");
    schema.set("effect_allele", "A1");
    schema.set("other_allele", "A2");
    schema.set("beta", "BETA");
    schema.set("se", "SE");
    schema.set("pval", "P");
    schema.set("n", "N");
    CHECK(load_summary_table(path, schema).rows.size() == 1);
    CHECK_THROWS_AS(schema.set("bogus", "x"), InputError);
}

TEST_CASE("load errors") {
    const auto dir = testutil::temp_dir("loaderr");
    CHECK_THROWS_AS(load_summary_table(dir / "missing.tsv"), InputError);
    const auto nocol = testutil::write_file(dir / "nocol.tsv", "variant_id\tbeta\nrs1\t0.1\n");
    CHECK_THROWS_AS(load_summary_table(nocol), InputError);
    const auto empty = testutil::write_file(dir / "empty.tsv", std::string(kHeader) + "rs1\tA\tG\t0.1\t0\t0.5\t100\n");
    CHECK_THROWS_AS(load_summary_table(empty), InputError);
    const auto dup = testutil::write_file(dir / "dup.tsv", std::string(kHeader) +
                                                               "rs1\tA\tG\t0.1\t0.1\t0.5\t100\n"
                                                               "rs1\tA\tG\t0.2\t0.1\t0.5\t100\n");
    CHECK_THROWS_AS(load_summary_table(dup), InputError);
    const auto varn = testutil::write_file(dir / "varn.tsv", std::string(kHeader) +
                                                                 "rs1\tA\tG\t0.1\t0.1\t0.5\t100\n"
                                                                 "rs2\tA\tG\t0.2\t0.1\t0.5\t101\n");
    CHECK_THROWS_AS(load_summary_table(varn), InputError);
}

TEST_CASE("harmonize with identical inputs keeps every variant unflipped") {
    std::vector<SummaryRow> rows{row("a", 'A', 'G', 0.2, 0.1, 0.05), row("b", 'C', 'T', -0.3, 0.1, 0.01),
                                 row("c", 'A', 'C', 0.4, 0.2, 0.04)};
    const auto panel = harmonize(dataset("y", rows), {dataset("x1", rows), dataset("x2", rows)});
    CHECK(panel.m() == 3);
    CHECK(panel.p() == 2);
    CHECK(panel.variant_ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(panel.B_hat(0, 0) == doctest::Approx(2.0));
    CHECK(panel.B_hat(2, 1) == doctest::Approx(2.0));
    CHECK(panel.alpha_hat[1] == doctest::Approx(-3.0));
    CHECK(panel.SE_B(2, 0) == 0.2);
    CHECK(panel.n[0] == 1000);
}

TEST_CASE("swapped alleles flip the sign of that entry only") {
    std::vector<SummaryRow> rows{row("a", 'A', 'G', 0.2, 0.1, 0.05), row("b", 'C', 'T', -0.3, 0.1, 0.01)};
    auto swapped = rows;
    swapped[1] = row("b", 'T', 'C', -0.3, 0.1, 0.01);
    const auto base = harmonize(dataset("y", rows), {dataset("x1", rows), dataset("x2", rows)});
    const auto flip = harmonize(dataset("y", rows), {dataset("x1", rows), dataset("x2", swapped)});
    CHECK(flip.B_hat(1, 1) == -base.B_hat(1, 1));
    CHECK(flip.B_hat(0, 1) == base.B_hat(0, 1));
    CHECK(flip.B_hat.col(0) == base.B_hat.col(0));
    CHECK(flip.alpha_hat == base.alpha_hat);
}

TEST_CASE("sign-flip consistency: negating effects and swapping labels is invisible") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    std::vector<SummaryRow> rows;
    for (int j = 0; j < 50; ++j) rows.push_back(row("v" + std::to_string(j), 'A', 'C', normal(rng), 0.1, 0.5));
    auto mirrored = rows;
    for (auto& r : mirrored) {
        std::swap(r.effect_allele, r.other_allele);
        r.effect = -r.effect;
    }
    const auto a = harmonize(dataset("y", rows), {dataset("x", rows)});
    const auto b = harmonize(dataset("y", rows), {dataset("x", mirrored)});
    CHECK(same_panel(a, b));
}

TEST_CASE("palindromic variants are dropped and mismatches rejected") {
    std::vector<SummaryRow> rows{row("a", 'A', 'T', 0.2, 0.1, 0.05), row("b", 'C', 'G', 0.1, 0.1, 0.05),
                                 row("c", 'A', 'G', 0.1, 0.1, 0.05)};
    const auto panel = harmonize(dataset("y", rows), {dataset("x", rows)});
    CHECK(panel.m() == 1);
    CHECK(panel.variant_ids[0] == "c");

    auto bad = rows;
    bad[2] = row("c", 'A', 'C', 0.1, 0.1, 0.05);
    CHECK_THROWS_AS(harmonize(dataset("y", rows), {dataset("x", bad)}), InputError);
    std::vector<SummaryRow> only_pal{row("a", 'A', 'T', 0.2, 0.1, 0.05)};
    CHECK_THROWS_AS(harmonize(dataset("y", only_pal), {dataset("x", only_pal)}), InputError);
    CHECK_THROWS_AS(harmonize(dataset("y", rows), {}), InputError);
}

TEST_CASE("intersection of datasets of sizes 100/80/90 sharing 60 ids") {
    std::mt19937_64 rng(11);
    std::vector<int> pool(200);
    for (int i = 0; i < 200; ++i) pool[static_cast<std::size_t>(i)] = i;
    std::shuffle(pool.begin(), pool.end(), rng);
    // ids 0..59 of the shuffled pool are shared, the rest are private.
    auto make = [&](int extra_begin, int extra_count) {
        std::vector<SummaryRow> rows;
        for (int k = 0; k < 60; ++k) rows.push_back(row("id" + std::to_string(pool[static_cast<std::size_t>(k)]), 'A', 'G', 0.1, 0.1, 0.5));
        for (int k = extra_begin; k < extra_begin + extra_count; ++k)
            rows.push_back(row("id" + std::to_string(pool[static_cast<std::size_t>(k)]), 'A', 'G', 0.1, 0.1, 0.5));
        std::shuffle(rows.begin(), rows.end(), rng);
        return rows;
    };
    const auto y = make(60, 40);
    const auto x1 = make(100, 20);
    const auto x2 = make(120, 30);
    std::set<std::string> sy, s1, s2, expected;
    for (const auto& r : y) sy.insert(r.variant_id);
    for (const auto& r : x1) s1.insert(r.variant_id);
    for (const auto& r : x2) s2.insert(r.variant_id);
    for (const auto& id : sy)
        if (s1.count(id) && s2.count(id)) expected.insert(id);
    const auto panel = harmonize(dataset("y", y), {dataset("x1", x1), dataset("x2", x2)});
    CHECK(y.size() == 100);
    CHECK(x1.size() == 80);
    CHECK(x2.size() == 90);
    CHECK(panel.m() == static_cast<Eigen::Index>(expected.size()));
    CHECK(panel.m() == 60);
    CHECK(std::set<std::string>(panel.variant_ids.begin(), panel.variant_ids.end()) == expected);
}

TEST_CASE("harmonization is idempotent") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    std::vector<SummaryRow> y, x;
    for (int j = 0; j < 40; ++j) {
        const char ea = j % 3 == 0 ? 'G' : 'A';
        const char oa = j % 3 == 0 ? 'A' : 'G';
        y.push_back(row("v" + std::to_string(j), 'A', 'G', normal(rng), 0.1 + 0.01 * j, 0.3));
        x.push_back(row("v" + std::to_string(j), ea, oa, normal(rng), 0.2, 0.3, 2000));
    }
    const auto once = harmonize(dataset("y", y), {dataset("x", x)});
    const auto [oy, ox] = to_datasets(once);
    const auto twice = harmonize(oy, ox);
    CHECK(same_panel(once, twice));
}

TEST_CASE("overlap validation") {
    Vector n(2);
    n << 100, 80;
    Matrix ok(2, 2);
    ok << 100, 50, 50, 80;
    CHECK_NOTHROW(validate_overlap(ok, n));
    Matrix big = ok;
    big(0, 1) = big(1, 0) = 90;
    CHECK_THROWS_AS(validate_overlap(big, n), InputError);
    Matrix asym = ok;
    asym(0, 1) = 40;
    CHECK_THROWS_AS(validate_overlap(asym, n), InputError);
    Matrix diag = ok;
    diag(0, 0) = 99;
    CHECK_THROWS_AS(validate_overlap(diag, n), InputError);
}

TEST_CASE("overlap matrix file is reordered to the trait order") {
    const auto dir = testutil::temp_dir("overlap");
    const auto path = testutil::write_file(dir / "o.tsv",
                                           "trait\tx\ty\n"
                                           "x\t80\t50\n"
                                           "y\t50\t100\n");
    const Matrix N = load_overlap_matrix(path, {"y", "x"});
    CHECK(N(0, 0) == 100);
    CHECK(N(1, 1) == 80);
    CHECK(N(0, 1) == 50);
    CHECK_THROWS_AS(load_overlap_matrix(path, {"y", "z"}), InputError);
}

TEST_CASE("partition thresholds") {
    auto panel = testutil::make_panel(Matrix::Zero(3, 1), Vector::Zero(3));
    panel.P_B << 1e-9, 0.5, 0.03;
    panel.P_alpha << 0.9, 0.9, 0.9;
    const auto sel = partition_variants(panel);
    REQUIRE(sel.iv_panel.m() == 1);
    REQUIRE(sel.null_panel.m() == 1);
    CHECK(sel.iv_panel.variant_ids[0] == "v0");
    CHECK(sel.null_panel.variant_ids[0] == "v1");

    // Outcome significance removes a variant from the null panel only.
    panel.P_alpha[1] = 0.01;
    CHECK_THROWS_AS(partition_variants(panel), InputError);

    auto ones = testutil::make_panel(Matrix::Zero(3, 1), Vector::Zero(3));
    ones.P_B.setOnes();
    ones.P_alpha.setOnes();
    CHECK_THROWS_AS(partition_variants(ones), InputError);
    CHECK_THROWS_AS(partition_variants(ones, PartitionOptions{1.0, 1.0, 0}), InputError);
}

TEST_CASE("partition sets are disjoint subsets and max_iv keeps the strongest") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto panel = testutil::make_panel(Matrix::Zero(200, 2), Vector::Zero(200));
    for (Eigen::Index j = 0; j < 200; ++j) {
        panel.P_B(j, 0) = j % 5 == 0 ? 1e-10 * u(rng) : u(rng);
        panel.P_B(j, 1) = u(rng);
        panel.P_alpha[j] = u(rng);
    }
    const auto sel = partition_variants(panel);
    std::set<std::string> iv(sel.iv_panel.variant_ids.begin(), sel.iv_panel.variant_ids.end());
    std::set<std::string> nul(sel.null_panel.variant_ids.begin(), sel.null_panel.variant_ids.end());
    std::vector<std::string> both;
    std::set_intersection(iv.begin(), iv.end(), nul.begin(), nul.end(), std::back_inserter(both));
    CHECK(both.empty());
    CHECK(iv.size() == 40);
    CHECK(iv.size() + nul.size() <= 200);

    const auto top = partition_variants(panel, PartitionOptions{5e-8, 0.05, 10});
    CHECK(top.iv_panel.m() == 10);
    const double kept_max = top.iv_panel.P_B.col(0).maxCoeff();
    int stronger_dropped = 0;
    for (Eigen::Index j = 0; j < sel.iv_panel.m(); ++j) {
        const auto& id = sel.iv_panel.variant_ids[static_cast<std::size_t>(j)];
        const bool kept = std::find(top.iv_panel.variant_ids.begin(), top.iv_panel.variant_ids.end(), id) !=
                          top.iv_panel.variant_ids.end();
        if (!kept && sel.iv_panel.P_B(j, 0) < kept_max) ++stronger_dropped;
    }
    CHECK(stronger_dropped == 0);
}

TEST_CASE("restandardize maps zero SE to a zero z-score") {
    auto panel = testutil::make_panel(Matrix::Ones(2, 1), Vector::Ones(2));
    panel.SE_alpha.setZero();
    restandardize(panel);
    CHECK(panel.alpha_hat[0] == 0.0);
    CHECK(panel.P_alpha[0] == 1.0);
}
