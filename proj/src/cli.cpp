#include "mrbee/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "mrbee/config.hpp"
#include "mrbee/error_cov.hpp"
#include "mrbee/errors.hpp"
#include "mrbee/estimators.hpp"
#include "mrbee/gwas_io.hpp"
#include "mrbee/pleiotropy.hpp"
#include "mrbee/report.hpp"
#include "mrbee/simulator.hpp"
#include "mrbee/theory.hpp"

namespace mrbee::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// Error tagged with the pipeline stage that raised it.
struct StageError {
    std::string stage;
    std::string message;
    int code;
};

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const InputError& e) {
        throw StageError{name, e.what(), 2};
    } catch (const EstimationError& e) {
        throw StageError{name, e.what(), 3};
    }
}

bool use_color() { return std::getenv("MRBEE_NO_COLOR") == nullptr && isatty(STDERR_FILENO); }

void report_error(const std::string& stage_name, const std::string& message) {
    if (use_color()) {
        std::cerr << "\033[31merror\033[0m [" << stage_name << "]: " << message << '\n';
    } else {
        std::cerr << "error [" << stage_name << "]: " << message << '\n';
    }
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file for hashing: " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

json file_entry(const std::string& role, const fs::path& path) {
    return {{"role", role}, {"path", path.string()}, {"sha256", sha256_file(path)}};
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory: " + dir.string());
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

void write_manifest(const fs::path& dir, json manifest) {
    manifest["tool"] = "mrbee";
    manifest["version"] = kVersion;
    auto out = open_out(dir / "run_manifest.json");
    out << manifest.dump(2) << '\n';
}

struct DataOptions {
    std::string outcome;
    std::vector<std::string> exposures;
    std::vector<std::string> columns;
    std::string overlap;
    double iv_pval = 5e-8;
    double null_pval = 0.05;
    std::size_t max_iv = 0;
    long long min_null = 30;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
    cmd->add_option("--outcome", o.outcome, "Outcome summary statistics (TSV)")->required();
    cmd->add_option("--exposure", o.exposures, "Exposure summary statistics (TSV); repeat per exposure")->required();
    cmd->add_option("--columns", o.columns, "Column remap key=header (variant_id, effect_allele, other_allele, beta, se, pval, n)");
    cmd->add_option("--overlap", o.overlap, "Optional sample-overlap matrix (TSV)");
    cmd->add_option("--iv-pval", o.iv_pval, "IV selection threshold on the minimum exposure p-value")->capture_default_str();
    cmd->add_option("--null-pval", o.null_pval, "Null-panel threshold on every trait's p-value")->capture_default_str();
    cmd->add_option("--max-iv", o.max_iv, "Keep at most this many IVs, strongest first (0 = all)")->capture_default_str();
    cmd->add_option("--min-null", o.min_null, "Minimum number of null variants")->capture_default_str();
}

struct PreparedData {
    HarmonizedPanel panel;
    PanelSelection selection;
    ErrorCovariance error_cov;
    json inputs = json::array();
    json counts = json::object();
};

PreparedData prepare(const DataOptions& o, bool verbose) {
    PreparedData d;
    ColumnSchema schema;
    stage("arguments", [&] {
        for (const auto& kv : o.columns) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw InputError("--columns expects key=header, got '" + kv + "'");
            schema.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        return 0;
    });
    auto load = [&](const std::string& role, const std::string& path) {
        return stage("load", [&] {
            if (!fs::exists(path)) throw InputError("file not found: " + path);
            d.inputs.push_back(file_entry(role, path));
            return load_summary_table(path, schema);
        });
    };
    const SummaryDataset outcome = load("outcome", o.outcome);
    std::vector<SummaryDataset> exposures;
    for (const auto& path : o.exposures) exposures.push_back(load("exposure", path));
    json dropped = {{outcome.trait_id, outcome.dropped_rows}};
    for (const auto& e : exposures) dropped[e.trait_id] = e.dropped_rows;
    d.counts["dropped_rows"] = dropped;

    std::optional<Matrix> overlap;
    if (!o.overlap.empty()) {
        overlap = stage("load", [&] {
            if (!fs::exists(o.overlap)) throw InputError("file not found: " + o.overlap);
            d.inputs.push_back(file_entry("overlap", o.overlap));
            std::vector<std::string> order{outcome.trait_id};
            for (const auto& e : exposures) order.push_back(e.trait_id);
            return load_overlap_matrix(o.overlap, order);
        });
    }
    d.panel = stage("harmonize", [&] { return harmonize(outcome, exposures, overlap); });
    d.selection = stage("partition", [&] {
        return partition_variants(d.panel, PartitionOptions{o.iv_pval, o.null_pval, o.max_iv});
    });
    d.error_cov = stage("error covariance", [&] {
        return estimate_error_cov(d.selection.null_panel, ErrorCovOptions{static_cast<Eigen::Index>(o.min_null)});
    });
    d.counts["harmonized_variants"] = d.panel.m();
    d.counts["iv_variants"] = d.selection.iv_panel.m();
    d.counts["null_variants"] = d.selection.null_panel.m();
    d.counts["error_cov_repaired"] = d.error_cov.repaired;
    if (verbose) {
        std::cerr << "harmonized " << d.panel.m() << " variants: " << d.selection.iv_panel.m() << " IVs, "
                  << d.selection.null_panel.m() << " null\n";
    }
    return d;
}

std::vector<std::string> errcov_trait_order(const HarmonizedPanel& panel) {
    std::vector<std::string> ids(panel.trait_ids.begin() + 1, panel.trait_ids.end());
    ids.push_back(panel.trait_ids.front());
    return ids;
}

json thresholds_json(const DataOptions& o) {
    return {{"iv_pval", o.iv_pval}, {"null_pval", o.null_pval}, {"max_iv", o.max_iv}, {"min_null", o.min_null}};
}

struct FitOptions {
    std::vector<std::string> methods;
    double fdr_q = 0.05;
    std::string outlier_rule = "fdr";
    double c0 = 3.0;
    int max_iter = 30;
    double tol = 1e-6;
};

int cmd_fit(const DataOptions& data, const FitOptions& fo, const std::string& out_dir, std::uint64_t seed, bool verbose) {
    std::vector<Method> methods = stage("arguments", [&] {
        std::vector<Method> out;
        const std::vector<std::string> names =
            fo.methods.empty() ? std::vector<std::string>{"ivw", "mrbee", "mrbee-iter"} : fo.methods;
        for (const auto& n : names) {
            const Method m = parse_method(n);
            if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        }
        if (fo.outlier_rule != "fdr" && fo.outlier_rule != "log-m") {
            throw InputError("--outlier-rule must be fdr or log-m");
        }
        if (!(fo.fdr_q > 0.0 && fo.fdr_q < 1.0)) throw InputError("--fdr-q must lie in (0, 1)");
        ensure_dir(out_dir);
        return out;
    });
    PreparedData d = prepare(data, verbose);
    const fs::path dir(out_dir);
    const std::vector<std::string> exposure_ids(d.panel.trait_ids.begin() + 1, d.panel.trait_ids.end());

    IterativeConfig ic;
    ic.rule.kind = fo.outlier_rule == "fdr" ? OutlierRule::Kind::FDR : OutlierRule::Kind::LogM;
    ic.rule.q = fo.fdr_q;
    ic.rule.c0 = fo.c0;
    ic.max_iter = fo.max_iter;
    ic.tol = fo.tol;

    std::vector<CausalEstimate> estimates;
    std::optional<IterativeFit> iterative;
    json iter_info = json::object();
    stage("estimation", [&] {
        for (Method m : methods) {
            if (m == Method::IVW) {
                estimates.push_back(fit_ivw(d.selection.iv_panel));
            } else if (m == Method::MRBEE) {
                estimates.push_back(fit_mrbee(d.selection.iv_panel, d.error_cov));
            } else {
                iterative = fit_mrbee_iterative(d.selection, d.error_cov, ic);
                estimates.push_back(iterative->estimate);
                iter_info = {{"iterations", iterative->iterations},
                             {"converged", iterative->converged},
                             {"outliers", iterative->outliers.size()}};
            }
        }
        return 0;
    });

    stage("write", [&] {
        auto est_out = open_out(dir / "estimates.tsv");
        write_estimates(est_out, estimates, exposure_ids);
        if (iterative) {
            auto o = open_out(dir / "outliers.tsv");
            write_outliers(o, d.selection.iv_panel, *iterative);
        }
        auto ec = open_out(dir / "errcov.tsv");
        write_error_cov(ec, d.error_cov, errcov_trait_order(d.panel));
        json method_names = json::array();
        for (Method m : methods) method_names.push_back(method_name(m));
        json outlier_cfg = {{"rule", fo.outlier_rule}, {"fdr_q", fo.fdr_q}, {"c0", fo.c0},
                            {"max_iter", fo.max_iter}, {"tol", fo.tol}};
        write_manifest(dir, {{"subcommand", "fit"},
                             {"inputs", d.inputs},
                             {"thresholds", thresholds_json(data)},
                             {"methods", method_names},
                             {"outlier_test", outlier_cfg},
                             {"iterative", iter_info},
                             {"seed", seed},
                             {"counts", d.counts}});
        return 0;
    });
    if (verbose) std::cerr << "wrote " << (dir / "estimates.tsv").string() << '\n';
    return 0;
}

int cmd_errcov(const DataOptions& data, const std::string& out_dir, bool verbose) {
    stage("arguments", [&] {
        ensure_dir(out_dir);
        return 0;
    });
    PreparedData d = prepare(data, verbose);
    const fs::path dir(out_dir);
    stage("write", [&] {
        auto ec = open_out(dir / "errcov.tsv");
        write_error_cov(ec, d.error_cov, errcov_trait_order(d.panel));
        write_manifest(dir, {{"subcommand", "errcov"},
                             {"inputs", d.inputs},
                             {"thresholds", thresholds_json(data)},
                             {"counts", d.counts}});
        return 0;
    });
    return 0;
}

struct SimOptions {
    std::string config;
    std::optional<long long> reps;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string mode;
};

const char* mode_name(SimMode m) { return m == SimMode::Individual ? "individual" : "direct_errors"; }

int cmd_simulate(const SimOptions& so, const std::string& out_dir, bool verbose) {
    SimConfig config = stage("config", [&] {
        SimConfig c = parse_sim_config(read_text_file(so.config));
        if (so.reps) {
            if (*so.reps < 1) throw InputError("--reps must be at least 1");
            c.replications = static_cast<std::size_t>(*so.reps);
        }
        if (c.replications < 1) throw InputError("replications must be at least 1");
        if (so.seed) c.seed = *so.seed;
        c.threads = so.threads ? *so.threads : 0;
        if (!so.mode.empty()) c.mode = parse_sim_mode(so.mode);
        validate_sim_config(c);
        ensure_dir(out_dir);
        return c;
    });
    if (verbose) {
        std::cerr << "simulating " << config.replications << " replications (" << mode_name(config.mode) << ")\n";
    }
    const ReplicationMetrics metrics = stage("simulation", [&] { return run_replications(config); });
    const fs::path dir(out_dir);
    stage("write", [&] {
        auto out = open_out(dir / "metrics.csv");
        write_metrics_csv(out, metrics);
        json method_names = json::array();
        for (Method m : config.methods) method_names.push_back(method_name(m));
        write_manifest(dir, {{"subcommand", "simulate"},
                             {"inputs", json::array({file_entry("config", so.config)})},
                             {"replications", config.replications},
                             {"seed", config.seed},
                             {"mode", mode_name(config.mode)},
                             {"methods", method_names},
                             {"null_M", config.null_M},
                             {"error_cov_source", resolved_error_cov_source(config) == ErrorCovSource::Estimated
                                                      ? "estimated"
                                                      : "theoretical"}});
        return 0;
    });
    return 0;
}

int cmd_theory(const std::string& config_path, const std::string& out_dir) {
    const PopulationSpec spec = stage("config", [&] { return parse_population_spec(read_text_file(config_path)); });
    std::ostringstream table;
    stage("theory", [&] {
        write_theory(table, spec);
        return 0;
    });
    if (out_dir.empty()) {
        std::cout << table.str();
        return 0;
    }
    stage("write", [&] {
        ensure_dir(out_dir);
        auto out = open_out(fs::path(out_dir) / "theory.tsv");
        out << table.str();
        write_manifest(out_dir, {{"subcommand", "theory"}, {"inputs", json::array({file_entry("config", config_path)})}});
        return 0;
    });
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Multivariable Mendelian randomization with bias-corrected estimating equations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");

    DataOptions fit_data;
    FitOptions fit_opts;
    std::string fit_out = "mrbee_out";
    std::uint64_t fit_seed = 0;
    auto* fit = app.add_subcommand("fit", "Estimate causal effects from GWAS summary statistics");
    add_data_options(fit, fit_data);
    fit->add_option("--method", fit_opts.methods, "ivw, mrbee or mrbee-iter; repeatable (default: all)");
    fit->add_option("--fdr-q", fit_opts.fdr_q, "FDR level of the pleiotropy test")->capture_default_str();
    fit->add_option("--outlier-rule", fit_opts.outlier_rule, "fdr or log-m")->capture_default_str();
    fit->add_option("--c0", fit_opts.c0, "Constant of the log-m threshold")->capture_default_str();
    fit->add_option("--max-iter", fit_opts.max_iter, "Iteration cap of the outlier loop")->capture_default_str();
    fit->add_option("--tol", fit_opts.tol, "Convergence tolerance on theta")->capture_default_str();
    fit->add_option("--out", fit_out, "Output directory")->capture_default_str();
    fit->add_option("--seed", fit_seed, "Recorded in the manifest")->capture_default_str();

    DataOptions ec_data;
    std::string ec_out = "mrbee_out";
    auto* errcov = app.add_subcommand("errcov", "Estimate the error covariance from null variants");
    add_data_options(errcov, ec_data);
    errcov->add_option("--out", ec_out, "Output directory")->capture_default_str();

    SimOptions sim;
    std::string sim_out = "mrbee_sim";
    long long reps = 0;
    std::uint64_t sim_seed = 0;
    unsigned threads = 0;
    auto* simulate = app.add_subcommand("simulate", "Run a Monte-Carlo replication study");
    simulate->add_option("--config", sim.config, "Simulation JSON")->required();
    auto* reps_opt = simulate->add_option("--reps", reps, "Override the replication count");
    auto* seed_opt = simulate->add_option("--seed", sim_seed, "Override the seed");
    auto* threads_opt = simulate->add_option("--threads", threads, "Worker threads (default: all cores)");
    simulate->add_option("--mode", sim.mode, "individual or direct_errors");
    simulate->add_option("--out", sim_out, "Output directory")->capture_default_str();

    std::string theory_config;
    std::string theory_out;
    auto* theory = app.add_subcommand("theory", "Print closed-form predictions for a population spec");
    theory->add_option("--config", theory_config, "Population spec JSON")->required();
    theory->add_option("--out", theory_out, "Write theory.tsv here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*fit) return cmd_fit(fit_data, fit_opts, fit_out, fit_seed, verbose);
        if (*errcov) return cmd_errcov(ec_data, ec_out, verbose);
        if (*simulate) {
            if (*reps_opt) sim.reps = reps;
            if (*seed_opt) sim.seed = sim_seed;
            if (*threads_opt) sim.threads = threads;
            return cmd_simulate(sim, sim_out, verbose);
        }
        if (*theory) return cmd_theory(theory_config, theory_out);
    } catch (const StageError& e) {
        report_error(e.stage, e.message);
        return e.code;
    } catch (const std::exception& e) {
        report_error("internal", e.what());
        return 3;
    }
    return 2;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> storage{"mrbee"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    argv.push_back(nullptr);
    return run(static_cast<int>(storage.size()), argv.data());
}

}  // namespace mrbee::cli
