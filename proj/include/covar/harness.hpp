#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covar/analytic.hpp"
#include "covar/dgmodel.hpp"
#include "covar/estimators.hpp"

namespace covar {

enum class ModelKind { Linear, Nonlinear, DgFile, Fixture };
enum class EstimatorKind { BE, IS, QRE };

ModelKind parse_model_kind(const std::string& s);
EstimatorKind parse_estimator_kind(const std::string& s);
std::string to_string(ModelKind k);
std::string to_string(EstimatorKind k);

/// Explicit (k, m) for BE, (n1, n2, b) for IS; zeros mean "derive from n".
struct Allocation {
    std::size_t k = 0;
    std::size_t m = 0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    std::size_t b = 10;

    [[nodiscard]] bool explicit_batching() const { return k != 0 || m != 0; }
    [[nodiscard]] bool explicit_is() const { return n1 != 0 || n2 != 0; }
};

struct ExperimentSpec {
    ModelKind model = ModelKind::Linear;
    std::string model_path;  // DgFile only
    double rho = 0.95;       // Linear / Nonlinear
    LinearPortfolioSpec linear{};
    NonlinearPortfolioSpec nonlinear{};
    TailSpec tail{};
    EstimatorKind estimator = EstimatorKind::BE;
    double alpha = 0.95;
    double beta = 0.95;
    std::vector<std::size_t> sample_sizes;
    Allocation allocation{};
    std::size_t replications = 100;
    std::size_t first_replication = 0;  // stream id of the first replication
    std::uint64_t seed = 1;
    double ci_level = 0.95;
    std::size_t threads = 1;
    std::size_t qre_bootstrap = 200;
    std::optional<double> reference;  // user-supplied truth
    bool timing = true;               // false writes seconds = 0

    void validate() const;
};

/// Parses a JSON-compatible document; unknown keys raise ConfigError.
ExperimentSpec spec_from_json(const std::string& text, ExperimentSpec base = {});
ExperimentSpec load_spec_file(const std::string& path, ExperimentSpec base = {});

/// The estimator-ready form of a spec's model.
struct PreparedModel {
    ModelKind kind = ModelKind::Linear;
    LinearPortfolioSpec linear{};
    NonlinearPortfolioSpec nonlinear{};
    SimplifiedDeltaGamma dg{};
};

PreparedModel prepare_model(const ExperimentSpec& spec);

/// Analytic truth for linear/nonlinear, else the user reference; nullopt otherwise.
std::optional<double> analytic_or_reference_truth(const ExperimentSpec& spec);

struct ReplicationResult {
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool has_ci = false;
    double seconds = 0.0;
};

/// Allocation label for a sample size, e.g. "k=200;m=200" or "n1=50;n2=50;b=10".
std::string allocation_label(const ExperimentSpec& spec, std::size_t n);

/// One replication at sample size n using stream (seed_for(n), stream_id).
ReplicationResult run_replication(const ExperimentSpec& spec, const PreparedModel& model, std::size_t n,
                                  std::uint64_t stream_id);

/// Seed of the replication streams for sample size n.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t n);

/// Replications [first, first + count) at n, spread over spec.threads
/// workers; results are stored by index, so the output does not depend on
/// the worker count.
std::vector<ReplicationResult> run_replications(const ExperimentSpec& spec, const PreparedModel& model, std::size_t n,
                                                std::size_t first, std::size_t count);

/// Generic parallel-for used by run_replications.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body);

struct MetricsRow {
    std::size_t n = 0;
    std::string alloc;
    double bias = 0.0;
    double sd = 0.0;
    double rmse = 0.0;
    double cp = 0.0;     // NaN when no replication produced an interval
    double width = 0.0;  // NaN likewise
    double seconds = 0.0;
};

/// bias = mean - truth; sd with the R - 1 divisor (0 when R = 1);
/// rmse = sqrt(bias^2 + sd^2); cp and width over replications with a CI.
MetricsRow summarize(std::span<const ReplicationResult> results, double truth, std::size_t n, std::string alloc);

/// Runs every sample size. Needs a truth: analytic, spec.reference, or the
/// explicit `truth` argument (e.g. from reference_run); otherwise ConfigError.
std::vector<MetricsRow> run_experiment(const ExperimentSpec& spec, std::optional<double> truth = std::nullopt);

/// Least-squares slope of log(rmse) on log(n).
double loglog_slope(std::span<const MetricsRow> rows);

enum class ReportFormat { Csv, Markdown };
ReportFormat parse_report_format(const std::string& s);

std::string emit_report(std::span<const MetricsRow> rows, ReportFormat format);
std::vector<MetricsRow> parse_csv_report(const std::string& text);

/// Per-replication dump for split runs: "rep,point,ci_low,ci_high,has_ci,seconds".
std::string emit_replications(std::span<const ReplicationResult> results, std::size_t first);
std::vector<ReplicationResult> parse_replications(const std::string& text);

/// High-n IS estimate (n1 = n2 = n_ref / 2, b = 10) cached in a JSON file
/// keyed by (model hash, tail, alpha, beta, n_ref, seed). An empty
/// cache_path disables caching. `computed` reports whether the estimator ran.
double reference_run(const SimplifiedDeltaGamma& model, const TailSpec& tail, double alpha, double beta,
                     std::size_t n_ref, std::uint64_t seed, const std::string& cache_path = {},
                     bool* computed = nullptr);

std::string reference_key(const SimplifiedDeltaGamma& model, const TailSpec& tail, double alpha, double beta,
                          std::size_t n_ref, std::uint64_t seed);

}  // namespace covar
