#include "mrbee/gwas_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mrbee/errors.hpp"
#include "mrbee/stats.hpp"

namespace mrbee {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_integer(std::string_view s, long long& out) {
    double value = 0.0;
    if (!parse_double(s, value)) return false;
    if (value != std::floor(value)) return false;
    out = static_cast<long long>(value);
    return true;
}

bool parse_allele(std::string_view s, char& out) {
    s = trim(s);
    if (s.size() != 1) return false;
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s.front())));
    if (c != 'A' && c != 'C' && c != 'G' && c != 'T') return false;
    out = c;
    return true;
}

}  // namespace

void ColumnSchema::set(const std::string& logical, const std::string& header) {
    if (logical == "variant_id") variant_id = header;
    else if (logical == "effect_allele") effect_allele = header;
    else if (logical == "other_allele") other_allele = header;
    else if (logical == "beta") beta = header;
    else if (logical == "se") se = header;
    else if (logical == "pval") pval = header;
    else if (logical == "n") n = header;
    else throw InputError("unknown column key '" + logical + "'");
}

SummaryDataset load_summary_table(const std::filesystem::path& path, const ColumnSchema& schema,
                                  std::optional<std::string> trait_id) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open summary table: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw InputError("empty summary table: " + path.string());
    const auto header = split_tabs(line);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col.emplace(std::string(trim(header[i])), i);

    auto locate = [&](const std::string& name) {
        const auto it = col.find(name);
        if (it == col.end()) {
            throw InputError("column '" + name + "' missing from " + path.string());
        }
        return it->second;
    };
    const std::size_t c_id = locate(schema.variant_id);
    const std::size_t c_ea = locate(schema.effect_allele);
    const std::size_t c_oa = locate(schema.other_allele);
    const std::size_t c_beta = locate(schema.beta);
    const std::size_t c_se = locate(schema.se);
    const std::size_t c_p = locate(schema.pval);
    const std::size_t c_n = locate(schema.n);
    const std::size_t width = std::max({c_id, c_ea, c_oa, c_beta, c_se, c_p, c_n}) + 1;

    SummaryDataset ds;
    ds.trait_id = trait_id.value_or(path.stem().string());
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto f = split_tabs(line);
        SummaryRow row;
        bool ok = f.size() >= width;
        if (ok) {
            row.variant_id = std::string(trim(f[c_id]));
            ok = !row.variant_id.empty() && parse_allele(f[c_ea], row.effect_allele) &&
                 parse_allele(f[c_oa], row.other_allele) && row.effect_allele != row.other_allele &&
                 parse_double(f[c_beta], row.effect) && parse_double(f[c_se], row.se) &&
                 parse_double(f[c_p], row.pvalue) && parse_integer(f[c_n], row.n);
        }
        ok = ok && row.se > 0.0 && row.pvalue >= 0.0 && row.pvalue <= 1.0 && row.n > 0;
        if (!ok) {
            ++ds.dropped_rows;
            continue;
        }
        if (!seen.insert(row.variant_id).second) {
            throw InputError("duplicate variant id '" + row.variant_id + "' in " + path.string());
        }
        ds.rows.push_back(std::move(row));
    }
    if (ds.rows.empty()) throw InputError("no usable rows in " + path.string());
    const long long n0 = ds.rows.front().n;
    for (const auto& r : ds.rows) {
        if (r.n != n0) {
            throw InputError("sample size is not constant within " + path.string() +
                             " (single-cohort summary statistics expected)");
        }
    }
    return ds;
}

bool is_palindromic(char a, char b) {
    return (a == 'A' && b == 'T') || (a == 'T' && b == 'A') || (a == 'C' && b == 'G') ||
           (a == 'G' && b == 'C');
}

void validate_overlap(const Matrix& overlap, const Vector& n) {
    const Eigen::Index k = n.size();
    if (overlap.rows() != k || overlap.cols() != k) {
        throw InputError("overlap matrix must be " + std::to_string(k) + "x" + std::to_string(k));
    }
    for (Eigen::Index s = 0; s < k; ++s) {
        if (overlap(s, s) != n[s]) throw InputError("overlap diagonal must equal cohort sizes");
        for (Eigen::Index t = 0; t < k; ++t) {
            const double v = overlap(s, t);
            if (v < 0 || v != std::floor(v)) throw InputError("overlap entries must be nonnegative integers");
            if (v != overlap(t, s)) throw InputError("overlap matrix must be symmetric");
            if (v > std::min(n[s], n[t])) throw InputError("overlap exceeds cohort size");
        }
    }
}

HarmonizedPanel harmonize(const SummaryDataset& outcome, const std::vector<SummaryDataset>& exposures,
                          const std::optional<Matrix>& overlap) {
    if (exposures.empty()) throw InputError("harmonize: at least one exposure is required");
    if (outcome.rows.empty()) throw InputError("harmonize: outcome dataset is empty");
    for (const auto& e : exposures) {
        if (e.rows.empty()) throw InputError("harmonize: exposure '" + e.trait_id + "' is empty");
    }
    const auto p = static_cast<Eigen::Index>(exposures.size());

    std::vector<std::unordered_map<std::string, std::size_t>> index(exposures.size());
    for (std::size_t s = 0; s < exposures.size(); ++s) {
        for (std::size_t r = 0; r < exposures[s].rows.size(); ++r) {
            index[s].emplace(exposures[s].rows[r].variant_id, r);
        }
    }

    struct Kept {
        std::size_t outcome_row;
        std::vector<std::size_t> rows;
        std::vector<double> sign;
    };
    std::vector<Kept> kept;
    bool any_shared = false;
    for (std::size_t r = 0; r < outcome.rows.size(); ++r) {
        const auto& ref = outcome.rows[r];
        Kept k{r, {}, {}};
        bool present = true;
        for (std::size_t s = 0; s < exposures.size() && present; ++s) {
            const auto it = index[s].find(ref.variant_id);
            if (it == index[s].end()) {
                present = false;
                break;
            }
            k.rows.push_back(it->second);
        }
        if (!present) continue;
        any_shared = true;
        if (is_palindromic(ref.effect_allele, ref.other_allele)) continue;
        for (std::size_t s = 0; s < exposures.size(); ++s) {
            const auto& row = exposures[s].rows[k.rows[s]];
            if (row.effect_allele == ref.effect_allele && row.other_allele == ref.other_allele) {
                k.sign.push_back(1.0);
            } else if (row.effect_allele == ref.other_allele && row.other_allele == ref.effect_allele) {
                k.sign.push_back(-1.0);
            } else {
                throw InputError("allele mismatch for variant '" + ref.variant_id + "' in trait '" +
                                 exposures[s].trait_id + "'");
            }
        }
        kept.push_back(std::move(k));
    }
    if (!any_shared || kept.empty()) {
        throw InputError("harmonize: no variants shared by all traits after filtering");
    }

    const auto m = static_cast<Eigen::Index>(kept.size());
    HarmonizedPanel panel;
    panel.trait_ids.push_back(outcome.trait_id);
    for (const auto& e : exposures) panel.trait_ids.push_back(e.trait_id);
    panel.B_raw.resize(m, p);
    panel.SE_B.resize(m, p);
    panel.P_B.resize(m, p);
    panel.alpha_raw.resize(m);
    panel.SE_alpha.resize(m);
    panel.P_alpha.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& k = kept[static_cast<std::size_t>(j)];
        const auto& ref = outcome.rows[k.outcome_row];
        panel.variant_ids.push_back(ref.variant_id);
        panel.effect_allele.push_back(ref.effect_allele);
        panel.other_allele.push_back(ref.other_allele);
        panel.alpha_raw[j] = ref.effect;
        panel.SE_alpha[j] = ref.se;
        panel.P_alpha[j] = ref.pvalue;
        for (Eigen::Index s = 0; s < p; ++s) {
            const auto& row = exposures[static_cast<std::size_t>(s)].rows[k.rows[static_cast<std::size_t>(s)]];
            panel.B_raw(j, s) = k.sign[static_cast<std::size_t>(s)] < 0 ? -row.effect : row.effect;
            panel.SE_B(j, s) = row.se;
            panel.P_B(j, s) = row.pvalue;
        }
    }
    panel.B_hat = panel.B_raw.cwiseQuotient(panel.SE_B);
    panel.alpha_hat = panel.alpha_raw.cwiseQuotient(panel.SE_alpha);

    panel.n.resize(p + 1);
    panel.n[0] = static_cast<double>(outcome.sample_size());
    for (Eigen::Index s = 0; s < p; ++s) {
        panel.n[s + 1] = static_cast<double>(exposures[static_cast<std::size_t>(s)].sample_size());
    }
    if (overlap) {
        validate_overlap(*overlap, panel.n);
        panel.overlap = overlap;
    }
    return panel;
}

std::pair<SummaryDataset, std::vector<SummaryDataset>> to_datasets(const HarmonizedPanel& panel) {
    const Eigen::Index m = panel.m();
    const Eigen::Index p = panel.p();
    SummaryDataset outcome;
    outcome.trait_id = panel.trait_ids.at(0);
    std::vector<SummaryDataset> exposures(static_cast<std::size_t>(p));
    for (Eigen::Index s = 0; s < p; ++s) exposures[static_cast<std::size_t>(s)].trait_id = panel.trait_ids.at(s + 1);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto id = panel.variant_ids[static_cast<std::size_t>(j)];
        const char ea = panel.effect_allele[static_cast<std::size_t>(j)];
        const char oa = panel.other_allele[static_cast<std::size_t>(j)];
        outcome.rows.push_back({id, ea, oa, panel.alpha_raw[j], panel.SE_alpha[j], panel.P_alpha[j],
                                static_cast<long long>(panel.n[0])});
        for (Eigen::Index s = 0; s < p; ++s) {
            exposures[static_cast<std::size_t>(s)].rows.push_back(
                {id, ea, oa, panel.B_raw(j, s), panel.SE_B(j, s), panel.P_B(j, s),
                 static_cast<long long>(panel.n[s + 1])});
        }
    }
    return {std::move(outcome), std::move(exposures)};
}

HarmonizedPanel subset_panel(const HarmonizedPanel& panel, const std::vector<Eigen::Index>& indices) {
    HarmonizedPanel out;
    out.trait_ids = panel.trait_ids;
    out.n = panel.n;
    out.overlap = panel.overlap;
    const auto m = static_cast<Eigen::Index>(indices.size());
    const Eigen::Index p = panel.p();
    out.B_hat.resize(m, p);
    out.SE_B.resize(m, p);
    out.B_raw.resize(m, p);
    out.P_B.resize(m, p);
    out.alpha_hat.resize(m);
    out.SE_alpha.resize(m);
    out.alpha_raw.resize(m);
    out.P_alpha.resize(m);
    const bool has_ids = !panel.variant_ids.empty();
    for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index j = indices[static_cast<std::size_t>(r)];
        if (j < 0 || j >= panel.m()) throw InputError("subset_panel: index out of range");
        out.B_hat.row(r) = panel.B_hat.row(j);
        out.SE_B.row(r) = panel.SE_B.row(j);
        out.B_raw.row(r) = panel.B_raw.row(j);
        out.P_B.row(r) = panel.P_B.row(j);
        out.alpha_hat[r] = panel.alpha_hat[j];
        out.SE_alpha[r] = panel.SE_alpha[j];
        out.alpha_raw[r] = panel.alpha_raw[j];
        out.P_alpha[r] = panel.P_alpha[j];
        if (has_ids) {
            const auto uj = static_cast<std::size_t>(j);
            out.variant_ids.push_back(panel.variant_ids[uj]);
            out.effect_allele.push_back(panel.effect_allele[uj]);
            out.other_allele.push_back(panel.other_allele[uj]);
        }
    }
    return out;
}

void restandardize(HarmonizedPanel& panel) {
    const Eigen::Index m = panel.B_raw.rows();
    const Eigen::Index p = panel.B_raw.cols();
    panel.B_hat.resize(m, p);
    panel.P_B.resize(m, p);
    panel.alpha_hat.resize(m);
    panel.P_alpha.resize(m);
    auto z_of = [](double effect, double se) { return se > 0.0 ? effect / se : 0.0; };
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index s = 0; s < p; ++s) {
            panel.B_hat(j, s) = z_of(panel.B_raw(j, s), panel.SE_B(j, s));
            panel.P_B(j, s) = stats::two_sided_normal_pvalue(panel.B_hat(j, s));
        }
        panel.alpha_hat[j] = z_of(panel.alpha_raw[j], panel.SE_alpha[j]);
        panel.P_alpha[j] = stats::two_sided_normal_pvalue(panel.alpha_hat[j]);
    }
}

PanelSelection partition_variants(const HarmonizedPanel& panel, const PartitionOptions& options) {
    if (!(options.iv_pvalue > 0.0 && options.iv_pvalue < options.null_pvalue && options.null_pvalue <= 1.0)) {
        throw InputError("partition: thresholds must satisfy 0 < iv_pvalue < null_pvalue <= 1");
    }
    std::vector<Eigen::Index> iv;
    std::vector<Eigen::Index> null;
    for (Eigen::Index j = 0; j < panel.m(); ++j) {
        const double min_exposure = panel.P_B.row(j).minCoeff();
        const double min_all = std::min(min_exposure, panel.P_alpha[j]);
        if (min_exposure <= options.iv_pvalue) {
            iv.push_back(j);
        } else if (min_all > options.null_pvalue) {
            null.push_back(j);
        }
    }
    if (options.max_iv > 0 && iv.size() > options.max_iv) {
        std::stable_sort(iv.begin(), iv.end(), [&](Eigen::Index a, Eigen::Index b) {
            return panel.P_B.row(a).minCoeff() < panel.P_B.row(b).minCoeff();
        });
        iv.resize(options.max_iv);
        std::sort(iv.begin(), iv.end());
    }
    if (static_cast<Eigen::Index>(iv.size()) < std::max<Eigen::Index>(panel.p(), 1)) {
        throw InputError("partition: " + std::to_string(iv.size()) +
                         " instrument(s) pass the IV threshold; at least p = " + std::to_string(panel.p()) +
                         " are required");
    }
    if (null.empty()) throw InputError("partition: no variants pass the null-panel threshold");
    return {subset_panel(panel, iv), subset_panel(panel, null)};
}

Matrix load_overlap_matrix(const std::filesystem::path& path, const std::vector<std::string>& trait_order) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open overlap matrix: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty overlap matrix: " + path.string());
    const auto header = split_tabs(line);
    std::vector<std::string> cols;
    for (std::size_t i = 1; i < header.size(); ++i) cols.emplace_back(trim(header[i]));
    const auto k = static_cast<Eigen::Index>(cols.size());
    Matrix raw(k, k);
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto f = split_tabs(line);
        if (static_cast<Eigen::Index>(f.size()) != k + 1) {
            throw InputError("overlap matrix row has wrong width in " + path.string());
        }
        const auto r = static_cast<Eigen::Index>(rows.size());
        if (r >= k) throw InputError("overlap matrix has more rows than columns");
        rows.emplace_back(trim(f[0]));
        for (Eigen::Index c = 0; c < k; ++c) {
            double v = 0.0;
            if (!parse_double(f[static_cast<std::size_t>(c + 1)], v)) {
                throw InputError("non-numeric overlap entry in " + path.string());
            }
            raw(r, c) = v;
        }
    }
    if (static_cast<Eigen::Index>(rows.size()) != k) throw InputError("overlap matrix is not square");
    auto position = [](const std::vector<std::string>& ids, const std::string& id) {
        const auto it = std::find(ids.begin(), ids.end(), id);
        if (it == ids.end()) throw InputError("trait '" + id + "' missing from overlap matrix");
        return static_cast<Eigen::Index>(it - ids.begin());
    };
    const auto t = static_cast<Eigen::Index>(trait_order.size());
    Matrix out(t, t);
    for (Eigen::Index a = 0; a < t; ++a) {
        const auto ra = position(rows, trait_order[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < t; ++b) {
            out(a, b) = raw(ra, position(cols, trait_order[static_cast<std::size_t>(b)]));
        }
    }
    return out;
}

}  // namespace mrbee
