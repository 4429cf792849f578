#include "mrbee/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mrbee/errors.hpp"

namespace mrbee {
namespace {

using nlohmann::json;

Vector to_vector(const json& j, const char* what) {
    if (!j.is_array()) throw InputError(std::string("config: '") + what + "' must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InputError(std::string("config: '") + what + "' must contain numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Matrix to_matrix(const json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw InputError(std::string("config: '") + what + "' must be a nonempty matrix");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw InputError(std::string("config: '") + what + "' is ragged");
        out.row(static_cast<Eigen::Index>(r)) = to_vector(j[r], what).transpose();
    }
    return out;
}

double number(const json& j, const char* key) {
    if (!j.contains(key)) throw InputError(std::string("config: missing '") + key + "'");
    if (!j[key].is_number()) throw InputError(std::string("config: '") + key + "' must be a number");
    return j[key].get<double>();
}

Eigen::Index positive_integer(const json& j, const char* key) {
    const double v = number(j, key);
    if (!(v >= 1.0) || v != std::floor(v)) throw InputError(std::string("config: '") + key + "' must be a positive integer");
    return static_cast<Eigen::Index>(v);
}

json parse(const std::string& text) {
    try {
        json j = json::parse(text);
        if (!j.is_object()) throw InputError("config: top level must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw InputError(std::string("config: malformed JSON: ") + e.what());
    }
}

std::optional<Matrix> parse_overlap(const json& j, const Vector& n) {
    if (!j.contains("overlap") || j["overlap"].is_null()) return std::nullopt;
    const json& o = j["overlap"];
    if (o.is_string()) {
        const auto s = o.get<std::string>();
        if (s == "full") return full_overlap(n);
        if (s == "none") return no_overlap(n);
        throw InputError("config: overlap must be 'full', 'none', {\"outcome_fraction\": f} or a matrix");
    }
    if (o.is_object()) {
        if (!o.contains("outcome_fraction")) throw InputError("config: overlap object needs 'outcome_fraction'");
        return outcome_fraction_overlap(n, number(o, "outcome_fraction"));
    }
    return to_matrix(o, "overlap");
}

PopulationSpec spec_from_json(const json& j) {
    if (!j.contains("theta")) throw InputError("config: missing 'theta'");
    const Vector theta = to_vector(j["theta"], "theta");
    const Eigen::Index p = theta.size();
    if (p < 1) throw InputError("config: theta must be nonempty");
    const Eigen::Index m = positive_integer(j, "m");
    if (!j.contains("n")) throw InputError("config: missing 'n'");
    Vector n = j["n"].is_number() ? Vector::Constant(p + 1, j["n"].get<double>()) : to_vector(j["n"], "n");
    if (n.size() != p + 1) throw InputError("config: 'n' must have p + 1 entries (outcome first)");
    for (Eigen::Index s = 0; s <= p; ++s) {
        if (!(n[s] >= 1.0) || n[s] != std::floor(n[s])) throw InputError("config: sample sizes must be positive integers");
    }
    std::optional<Matrix> overlap = parse_overlap(j, n);

    PopulationSpec spec;
    if (j.contains("heritability")) {
        const json& h = j["heritability"];
        if (!h.is_object()) throw InputError("config: 'heritability' must be an object");
        HeritabilitySpec hs;
        if (!h.contains("exposure")) throw InputError("config: heritability needs 'exposure'");
        hs.exposure_h2 = h["exposure"].is_number() ? Vector::Constant(p, h["exposure"].get<double>())
                                                   : to_vector(h["exposure"], "heritability.exposure");
        hs.outcome_h2 = number(h, "outcome");
        if (h.contains("psi_diag")) hs.psi_diag = number(h, "psi_diag");
        if (h.contains("genetic_ar1")) hs.genetic_ar1 = number(h, "genetic_ar1");
        if (h.contains("noise_ar1")) hs.noise_ar1 = number(h, "noise_ar1");
        spec = spec_from_heritability(theta, hs, n, overlap, m);
    } else {
        for (const char* key : {"Psi_bb", "Sigma_uu", "sigma_uv", "sigma_vv"}) {
            if (!j.contains(key)) throw InputError(std::string("config: missing '") + key + "' (or a 'heritability' block)");
        }
        spec.p = p;
        spec.theta = theta;
        spec.m = m;
        spec.n = n;
        spec.overlap = overlap;
        spec.Psi_bb = to_matrix(j["Psi_bb"], "Psi_bb");
        spec.Sigma_uu = to_matrix(j["Sigma_uu"], "Sigma_uu");
        spec.sigma_uv = to_vector(j["sigma_uv"], "sigma_uv");
        spec.sigma_vv = number(j, "sigma_vv");
    }
    return spec;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Method parse_method(const std::string& text) {
    if (text == "ivw") return Method::IVW;
    if (text == "mrbee") return Method::MRBEE;
    if (text == "mrbee-iter") return Method::MRBEE_iterative;
    throw InputError("unknown method '" + text + "' (expected ivw, mrbee or mrbee-iter)");
}

SimMode parse_sim_mode(const std::string& text) {
    if (text == "individual") return SimMode::Individual;
    if (text == "direct_errors") return SimMode::DirectErrors;
    throw InputError("unknown simulation mode '" + text + "' (expected individual or direct_errors)");
}

PopulationSpec parse_population_spec(const std::string& json_text) {
    try {
        PopulationSpec spec = spec_from_json(parse(json_text));
        validate_spec(spec, true);
        return spec;
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
}

namespace {

SimConfig sim_config_from_json(const json& j) {
    SimConfig c;
    c.spec = spec_from_json(j);
    if (j.contains("replications")) {
        const double r = number(j, "replications");
        if (!(r >= 0.0) || r != std::floor(r)) throw InputError("config: 'replications' must be a nonnegative integer");
        c.replications = static_cast<std::size_t>(r);
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw InputError("config: 'seed' must be a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("mode")) c.mode = parse_sim_mode(j["mode"].get<std::string>());
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j["methods"]) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("maf_range")) {
        const Vector r = to_vector(j["maf_range"], "maf_range");
        if (r.size() != 2) throw InputError("config: 'maf_range' must have two entries");
        c.maf_low = r[0];
        c.maf_high = r[1];
    }
    if (j.contains("uhp") && !j["uhp"].is_null()) {
        UhpConfig u;
        u.count = static_cast<Eigen::Index>(number(j["uhp"], "count"));
        if (j["uhp"].contains("magnitude_sd")) u.magnitude_sd = number(j["uhp"], "magnitude_sd");
        c.uhp = u;
    }
    if (j.contains("null_M")) c.null_M = positive_integer(j, "null_M");
    if (j.contains("error_cov_source")) {
        const auto s = j["error_cov_source"].get<std::string>();
        if (s == "estimated") c.error_cov_source = ErrorCovSource::Estimated;
        else if (s == "theoretical") c.error_cov_source = ErrorCovSource::Theoretical;
        else throw InputError("config: error_cov_source must be 'estimated' or 'theoretical'");
    }
    if (j.contains("fdr_q")) c.iterative.rule.q = number(j, "fdr_q");
    if (j.contains("outlier_rule")) {
        const auto s = j["outlier_rule"].get<std::string>();
        if (s == "fdr") c.iterative.rule.kind = OutlierRule::Kind::FDR;
        else if (s == "log_m") c.iterative.rule.kind = OutlierRule::Kind::LogM;
        else throw InputError("config: outlier_rule must be 'fdr' or 'log_m'");
    }
    if (j.contains("c0")) c.iterative.rule.c0 = number(j, "c0");
    if (j.contains("max_iter")) c.iterative.max_iter = static_cast<int>(positive_integer(j, "max_iter"));
    if (j.contains("tol")) c.iterative.tol = number(j, "tol");
    if (j.contains("threads")) c.threads = static_cast<unsigned>(number(j, "threads"));
    return c;
}

}  // namespace

SimConfig parse_sim_config(const std::string& json_text) {
    try {
        return sim_config_from_json(parse(json_text));
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
}

}  // namespace mrbee
