// covar: command-line front end for the CoVaR estimators and experiment harness.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "covar/error.hpp"
#include "covar/harness.hpp"

namespace {

using namespace covar;

struct Flags {
    std::string config;
    std::string model;
    double rho = 0.0;
    std::string tail;
    std::uint32_t nu = 0;
    std::string estimator;
    double alpha = 0.0, beta = 0.0;
    std::vector<std::size_t> n;
    std::size_t k = 0, m = 0, n1 = 0, n2 = 0, b = 0;
    std::size_t reps = 0, first_rep = 0;
    std::uint64_t seed = 0;
    double ci_level = 0.0;
    std::size_t threads = 0;
    std::size_t bootstrap = 0;
    double reference = 0.0;
    std::size_t reference_n = 0;
    std::string out;
    std::string format = "csv";
    std::string raw_out;
    std::string cache;
    bool no_timing = false;
    std::vector<std::string> inputs;
};

void add_spec_flags(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON config file; flags override its values");
    app->add_option("--model", f.model, "linear | nonlinear | fixture | path to a model file");
    app->add_option("--rho", f.rho, "Correlation for the linear and nonlinear portfolios");
    app->add_option("--tail", f.tail, "normal | t");
    app->add_option("--nu", f.nu, "Degrees of freedom of the t common shock");
    app->add_option("--estimator", f.estimator, "BE | IS | QRE");
    app->add_option("--alpha", f.alpha, "VaR level of X");
    app->add_option("--beta", f.beta, "Quantile level of Y");
    app->add_option("--n", f.n, "Sample size(s)")->delimiter(',');
    app->add_option("--k", f.k, "Batches (BE)");
    app->add_option("--m", f.m, "Batch size (BE)");
    app->add_option("--n1", f.n1, "Stage-1 sample size (IS)");
    app->add_option("--n2", f.n2, "Stage-2 scenarios (IS)");
    app->add_option("--b", f.b, "Sectioning batches (IS)");
    app->add_option("--reps", f.reps, "Replications per sample size");
    app->add_option("--first-rep", f.first_rep, "Stream id of the first replication");
    app->add_option("--seed", f.seed, "Master seed");
    app->add_option("--ci-level", f.ci_level, "Confidence level");
    app->add_option("--threads", f.threads, "Worker threads");
    app->add_option("--bootstrap", f.bootstrap, "Bootstrap replicates for QRE intervals");
    app->add_option("--reference", f.reference, "Ground truth for delta-gamma models");
    app->add_option("--reference-n", f.reference_n, "Compute the truth by a cached high-n IS run of this size");
    app->add_option("--out", f.out, "Output file (default stdout)");
    app->add_option("--cache", f.cache, "Reference cache file (default: next to --out)");
    app->add_flag("--no-timing", f.no_timing, "Write zero timings for byte-reproducible reports");
}

bool given(const CLI::App* app, const char* name) { return app->count(name) > 0; }

ExperimentSpec build_spec(const CLI::App* app, const Flags& f) {
    ExperimentSpec s;
    if (given(app, "--config")) s = load_spec_file(f.config, s);
    if (given(app, "--model")) {
        try {
            s.model = parse_model_kind(f.model);
        } catch (const ConfigError&) {
            s.model = ModelKind::DgFile;
            s.model_path = f.model;
        }
    }
    if (given(app, "--rho")) s.rho = f.rho;
    if (given(app, "--tail")) {
        if (f.tail == "normal")
            s.tail = TailSpec::normal();
        else if (f.tail == "t" || f.tail == "student-t")
            s.tail.kind = TailKind::StudentT;
        else
            throw ConfigError("unknown tail '" + f.tail + "' (normal, t)");
    }
    if (given(app, "--nu")) s.tail.nu = f.nu;
    if (given(app, "--estimator")) s.estimator = parse_estimator_kind(f.estimator);
    if (given(app, "--alpha")) s.alpha = f.alpha;
    if (given(app, "--beta")) s.beta = f.beta;
    if (given(app, "--n")) s.sample_sizes = f.n;
    if (given(app, "--k")) s.allocation.k = f.k;
    if (given(app, "--m")) s.allocation.m = f.m;
    if (given(app, "--n1")) s.allocation.n1 = f.n1;
    if (given(app, "--n2")) s.allocation.n2 = f.n2;
    if (given(app, "--b")) s.allocation.b = f.b;
    if (given(app, "--reps")) s.replications = f.reps;
    if (given(app, "--first-rep")) s.first_replication = f.first_rep;
    if (given(app, "--seed")) s.seed = f.seed;
    if (given(app, "--ci-level")) s.ci_level = f.ci_level;
    if (given(app, "--threads")) s.threads = f.threads;
    if (given(app, "--bootstrap")) s.qre_bootstrap = f.bootstrap;
    if (given(app, "--reference")) s.reference = f.reference;
    if (f.no_timing) s.timing = false;
    if (s.sample_sizes.empty()) {
        if (s.allocation.explicit_batching()) s.sample_sizes = {s.allocation.k * s.allocation.m};
        if (s.allocation.explicit_is()) s.sample_sizes = {s.allocation.n1 + s.allocation.n2};
    }
    s.validate();
    return s;
}

std::string cache_path(const Flags& f) {
    if (!f.cache.empty()) return f.cache;
    if (f.out.empty()) return "reference_cache.json";
    const auto dir = std::filesystem::path(f.out).parent_path();
    return (dir / "reference_cache.json").string();
}

std::optional<double> resolve_truth(const CLI::App* app, const ExperimentSpec& spec, const Flags& f) {
    if (auto t = analytic_or_reference_truth(spec)) return t;
    if (given(app, "--reference-n")) {
        const PreparedModel pm = prepare_model(spec);
        return reference_run(pm.dg, spec.tail, spec.alpha, spec.beta, f.reference_n, spec.seed, cache_path(f));
    }
    return std::nullopt;
}

void write_output(const Flags& f, const std::string& text) {
    if (f.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(f.out);
    if (!out) throw ConfigError("cannot write '" + f.out + "'");
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void cmd_estimate(const CLI::App* app, const Flags& f) {
    ExperimentSpec spec = build_spec(app, f);
    const std::size_t n = spec.sample_sizes.front();
    const PreparedModel model = prepare_model(spec);
    const ReplicationResult r = run_replication(spec, model, n, spec.first_replication);
    nlohmann::ordered_json j;
    j["model"] = spec.model == ModelKind::DgFile ? spec.model_path : to_string(spec.model);
    j["estimator"] = to_string(spec.estimator);
    j["tail"] = spec.tail.label();
    j["alpha"] = spec.alpha;
    j["beta"] = spec.beta;
    j["n"] = n;
    j["alloc"] = allocation_label(spec, n);
    j["point"] = r.point;
    if (r.has_ci) {
        j["ci_low"] = r.ci_low;
        j["ci_high"] = r.ci_high;
        j["ci_level"] = spec.ci_level;
    } else {
        j["ci"] = "none";
    }
    if (auto t = resolve_truth(app, spec, f)) j["truth"] = *t;
    j["seconds"] = r.seconds;
    write_output(f, j.dump(2) + "\n");
}

std::vector<MetricsRow> sweep(const CLI::App* app, const Flags& f, const ExperimentSpec& spec) {
    const auto truth = resolve_truth(app, spec, f);
    if (!f.raw_out.empty()) {
        if (spec.sample_sizes.size() != 1) throw ConfigError("--raw-out needs exactly one sample size");
        if (!truth) throw ConfigError("no ground truth: pass --reference or --reference-n");
        const std::size_t n = spec.sample_sizes.front();
        const auto results =
            run_replications(spec, prepare_model(spec), n, spec.first_replication, spec.replications);
        std::ofstream raw(f.raw_out);
        if (!raw) throw ConfigError("cannot write '" + f.raw_out + "'");
        raw << emit_replications(results, spec.first_replication);
        return {summarize(results, *truth, n, allocation_label(spec, n))};
    }
    return run_experiment(spec, truth);
}

void cmd_table(const CLI::App* app, const Flags& f) {
    const ExperimentSpec spec = build_spec(app, f);
    const auto rows = sweep(app, f, spec);
    write_output(f, emit_report(rows, parse_report_format(f.format)));
}

void cmd_rates(const CLI::App* app, const Flags& f) {
    const ExperimentSpec spec = build_spec(app, f);
    const auto rows = sweep(app, f, spec);
    write_output(f, emit_report(rows, parse_report_format(f.format)));
    char line[64];
    std::snprintf(line, sizeof line, "loglog_slope %.6f\n", loglog_slope(rows));
    (f.out.empty() ? std::cerr : std::cout) << line;
}

void cmd_merge(const CLI::App* app, const Flags& f) {
    const ExperimentSpec spec = build_spec(app, f);
    if (spec.sample_sizes.size() != 1) throw ConfigError("merge needs exactly one --n");
    const auto truth = resolve_truth(app, spec, f);
    if (!truth) throw ConfigError("no ground truth: pass --reference or --reference-n");
    std::vector<ReplicationResult> all;
    for (const auto& path : f.inputs) {
        const auto part = parse_replications(read_file(path));
        all.insert(all.end(), part.begin(), part.end());
    }
    const std::size_t n = spec.sample_sizes.front();
    const std::vector<MetricsRow> rows{summarize(all, *truth, n, allocation_label(spec, n))};
    write_output(f, emit_report(rows, parse_report_format(f.format)));
}

void cmd_reference(const CLI::App* app, const Flags& f) {
    ExperimentSpec spec = build_spec(app, f);
    if (spec.model != ModelKind::Fixture && spec.model != ModelKind::DgFile)
        throw ConfigError("reference runs need a delta-gamma model");
    const PreparedModel pm = prepare_model(spec);
    const std::size_t n_ref = spec.sample_sizes.front();
    bool computed = false;
    const double v = reference_run(pm.dg, spec.tail, spec.alpha, spec.beta, n_ref, spec.seed, cache_path(f), &computed);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g\n", v);
    write_output(f, buf);
    if (!computed) std::cerr << "reference: cache hit\n";
}

void cmd_export_fixture(const Flags& f) {
    std::ostringstream os;
    write_model(os, fixture_model());
    write_output(f, os.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte-Carlo CoVaR estimation: batching, IS-inspired and quantile-regression estimators"};
    app.require_subcommand(1);
    Flags f;

    auto* estimate = app.add_subcommand("estimate", "Run one estimate and print a JSON report");
    add_spec_flags(estimate, f);
    auto* table = app.add_subcommand("table", "Replicated sweep over sample sizes");
    add_spec_flags(table, f);
    table->add_option("--format", f.format, "csv | markdown");
    table->add_option("--raw-out", f.raw_out, "Also write per-replication results (single n)");
    auto* rates = app.add_subcommand("rates", "Sweep plus log-log RMSE slope");
    add_spec_flags(rates, f);
    rates->add_option("--format", f.format, "csv | markdown");
    auto* merge = app.add_subcommand("merge", "Summarize per-replication files from split runs");
    add_spec_flags(merge, f);
    merge->add_option("--format", f.format, "csv | markdown");
    merge->add_option("--inputs", f.inputs, "Files written by table --raw-out")->required();
    auto* reference = app.add_subcommand("reference", "High-n IS ground truth (n_ref = --n), cached");
    add_spec_flags(reference, f);
    auto* fixture = app.add_subcommand("export-fixture", "Write the embedded 50-dimensional model");
    fixture->add_option("--out", f.out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*estimate) cmd_estimate(estimate, f);
        if (*table) cmd_table(table, f);
        if (*rates) cmd_rates(rates, f);
        if (*merge) cmd_merge(merge, f);
        if (*reference) cmd_reference(reference, f);
        if (*fixture) cmd_export_fixture(f);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidParameter& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const DegenerateIsError& e) {
        std::cerr << "estimator degeneracy: " << e.what() << '\n';
        return 3;
    } catch (const CurvatureError& e) {
        std::cerr << "estimator degeneracy: " << e.what() << '\n';
        return 3;
    } catch (const InfiniteQuantileError& e) {
        std::cerr << "estimator degeneracy: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
