#include "covar/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "covar/error.hpp"

namespace covar {

namespace {

using json = nlohmann::json;

bool in_unit(double p) { return p > 0.0 && p < 1.0; }

bool is_dg(ModelKind k) { return k == ModelKind::DgFile || k == ModelKind::Fixture; }

BatchConfig batch_config(const ExperimentSpec& spec, std::size_t n) {
    if (spec.allocation.explicit_batching()) return {spec.allocation.k, spec.allocation.m};
    return BatchConfig::for_sample_size(n);
}

IsConfig is_config(const ExperimentSpec& spec, std::size_t n) {
    if (spec.allocation.explicit_is()) return {spec.allocation.n1, spec.allocation.n2, spec.allocation.b};
    IsConfig cfg = IsConfig::for_sample_size(n);
    cfg.b = spec.allocation.b;
    return cfg;
}

LossSample draw(const ExperimentSpec& spec, const PreparedModel& model, RngStream& stream, std::size_t n) {
    switch (model.kind) {
        case ModelKind::Linear:
            return sample_linear(model.linear, stream, n);
        case ModelKind::Nonlinear:
            return sample_nonlinear(model.nonlinear, stream, n);
        default:
            return sample_losses(model.dg, spec.tail, stream, n);
    }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ModelKind parse_model_kind(const std::string& s) {
    if (s == "linear") return ModelKind::Linear;
    if (s == "nonlinear") return ModelKind::Nonlinear;
    if (s == "fixture") return ModelKind::Fixture;
    if (s == "dg-file") return ModelKind::DgFile;
    throw ConfigError("unknown model '" + s + "' (linear, nonlinear, fixture, or a model file path)");
}

EstimatorKind parse_estimator_kind(const std::string& s) {
    std::string u = s;
    std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (u == "BE") return EstimatorKind::BE;
    if (u == "IS" || u == "ISE") return EstimatorKind::IS;
    if (u == "QRE") return EstimatorKind::QRE;
    throw ConfigError("unknown estimator '" + s + "' (BE, IS, QRE)");
}

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Linear: return "linear";
        case ModelKind::Nonlinear: return "nonlinear";
        case ModelKind::DgFile: return "dg-file";
        case ModelKind::Fixture: return "fixture";
    }
    return "?";
}

std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::BE: return "BE";
        case EstimatorKind::IS: return "IS";
        case EstimatorKind::QRE: return "QRE";
    }
    return "?";
}

void ExperimentSpec::validate() const {
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (!in_unit(alpha) || !in_unit(beta)) throw ConfigError("alpha and beta must lie in (0,1)");
    if (!in_unit(ci_level)) throw ConfigError("ci_level must lie in (0,1)");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (sample_sizes.empty()) throw ConfigError("no sample sizes given");
    if (model == ModelKind::DgFile && model_path.empty()) throw ConfigError("dg-file model needs a path");
    if (!(std::fabs(rho) <= 1.0)) throw ConfigError("rho must lie in [-1,1]");
    try {
        tail.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(e.what());
    }
    if (!is_dg(model) && tail.kind != TailKind::Normal)
        throw ConfigError("Student-t tails apply to delta-gamma models only");
    if (estimator == EstimatorKind::IS && !is_dg(model))
        throw ConfigError("the IS estimator needs a delta-gamma model with positive curvature");
    for (const std::size_t n : sample_sizes) {
        if (n == 0) throw ConfigError("sample sizes must be positive");
        const std::string at = " at n=" + std::to_string(n);
        switch (estimator) {
            case EstimatorKind::BE: {
                const BatchConfig cfg = batch_config(*this, n);
                if (cfg.k == 0 || cfg.m == 0) throw ConfigError("batching needs k >= 1 and m >= 1" + at);
                if (allocation.explicit_batching() && cfg.k * cfg.m != n)
                    throw ConfigError("k*m = " + std::to_string(cfg.k * cfg.m) + " does not match" + at);
                break;
            }
            case EstimatorKind::IS: {
                const IsConfig cfg = is_config(*this, n);
                if (allocation.explicit_is() && cfg.n1 + cfg.n2 != n)
                    throw ConfigError("n1+n2 = " + std::to_string(cfg.n1 + cfg.n2) + " does not match" + at);
                try {
                    cfg.validate();
                } catch (const InvalidParameter& e) {
                    throw ConfigError(std::string(e.what()) + at);
                }
                break;
            }
            case EstimatorKind::QRE:
                if (n < 10) throw ConfigError("QRE needs n >= 10" + at);
                break;
        }
    }
}

ExperimentSpec spec_from_json(const std::string& text, ExperimentSpec base) {
    static const std::vector<std::string> known = {
        "model", "model_path", "rho", "tail", "nu", "estimator", "alpha", "beta", "n", "k", "m", "n1", "n2",
        "b", "reps", "first_rep", "seed", "ci_level", "threads", "bootstrap", "reference", "timing",
        "mu_x", "mu_y", "sigma_x", "sigma_y", "delta", "gamma"};
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    for (const auto& item : j.items())
        if (std::find(known.begin(), known.end(), item.key()) == known.end())
            throw ConfigError("config: unknown key '" + item.key() + "'");
    ExperimentSpec s = std::move(base);
    try {
        if (j.contains("model")) {
            const auto name = j.at("model").get<std::string>();
            try {
                s.model = parse_model_kind(name);
            } catch (const ConfigError&) {
                s.model = ModelKind::DgFile;
                s.model_path = name;
            }
        }
        read_key(j, "model_path", s.model_path);
        if (!s.model_path.empty() && !j.contains("model")) s.model = ModelKind::DgFile;
        read_key(j, "rho", s.rho);
        if (j.contains("tail")) {
            const auto t = j.at("tail").get<std::string>();
            if (t == "normal")
                s.tail = TailSpec::normal();
            else if (t == "t" || t == "student-t" || t == "studentt")
                s.tail.kind = TailKind::StudentT;
            else
                throw ConfigError("config: unknown tail '" + t + "'");
        }
        read_key(j, "nu", s.tail.nu);
        if (j.contains("estimator")) s.estimator = parse_estimator_kind(j.at("estimator").get<std::string>());
        read_key(j, "alpha", s.alpha);
        read_key(j, "beta", s.beta);
        if (j.contains("n")) {
            const auto& n = j.at("n");
            s.sample_sizes = n.is_array() ? n.get<std::vector<std::size_t>>() : std::vector<std::size_t>{n.get<std::size_t>()};
        }
        read_key(j, "k", s.allocation.k);
        read_key(j, "m", s.allocation.m);
        read_key(j, "n1", s.allocation.n1);
        read_key(j, "n2", s.allocation.n2);
        read_key(j, "b", s.allocation.b);
        read_key(j, "reps", s.replications);
        read_key(j, "first_rep", s.first_replication);
        read_key(j, "seed", s.seed);
        read_key(j, "ci_level", s.ci_level);
        read_key(j, "threads", s.threads);
        read_key(j, "bootstrap", s.qre_bootstrap);
        read_key(j, "timing", s.timing);
        if (j.contains("reference")) s.reference = j.at("reference").get<double>();
        for (const char* key : {"mu_x", "sigma_x", "sigma_y"}) {
            if (!j.contains(key)) continue;
            const double v = j.at(key).get<double>();
            if (std::string(key) == "mu_x") s.linear.mu_x = s.nonlinear.mu_x = v;
            if (std::string(key) == "sigma_x") s.linear.sigma_x = s.nonlinear.sigma_x = v;
            if (std::string(key) == "sigma_y") s.linear.sigma_y = s.nonlinear.sigma_y = v;
        }
        read_key(j, "mu_y", s.linear.mu_y);
        read_key(j, "delta", s.nonlinear.delta);
        read_key(j, "gamma", s.nonlinear.gamma);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return s;
}

ExperimentSpec load_spec_file(const std::string& path, ExperimentSpec base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return spec_from_json(buf.str(), std::move(base));
}

PreparedModel prepare_model(const ExperimentSpec& spec) {
    PreparedModel pm;
    pm.kind = spec.model;
    pm.linear = spec.linear;
    pm.linear.rho = spec.rho;
    pm.nonlinear = spec.nonlinear;
    pm.nonlinear.rho = spec.rho;
    if (spec.model == ModelKind::Fixture) pm.dg = fixture_model();
    if (spec.model == ModelKind::DgFile) pm.dg = load_model_file(spec.model_path);
    return pm;
}

std::optional<double> analytic_or_reference_truth(const ExperimentSpec& spec) {
    const PreparedModel pm = prepare_model(spec);
    if (spec.model == ModelKind::Linear) return linear_covar(pm.linear, spec.alpha, spec.beta);
    if (spec.model == ModelKind::Nonlinear) return nonlinear_covar(pm.nonlinear, spec.alpha, spec.beta).covar;
    return spec.reference;
}

std::string allocation_label(const ExperimentSpec& spec, std::size_t n) {
    switch (spec.estimator) {
        case EstimatorKind::BE: {
            const BatchConfig c = batch_config(spec, n);
            return "k=" + std::to_string(c.k) + ";m=" + std::to_string(c.m);
        }
        case EstimatorKind::IS: {
            const IsConfig c = is_config(spec, n);
            return "n1=" + std::to_string(c.n1) + ";n2=" + std::to_string(c.n2) + ";b=" + std::to_string(c.b);
        }
        case EstimatorKind::QRE:
            return "bootstrap=" + std::to_string(spec.qre_bootstrap);
    }
    return {};
}

std::uint64_t replication_seed(std::uint64_t seed, std::size_t n) {
    return mix64(seed ^ mix64(static_cast<std::uint64_t>(n) + 0x5851f42d4c957f2dULL));
}

ReplicationResult run_replication(const ExperimentSpec& spec, const PreparedModel& model, std::size_t n,
                                  std::uint64_t stream_id) {
    RngStream stream(replication_seed(spec.seed, n), stream_id);
    const auto start = std::chrono::steady_clock::now();
    ReplicationResult out;
    switch (spec.estimator) {
        case EstimatorKind::BE: {
            const LossSample sample = draw(spec, model, stream, n);
            const BatchingResult res = batching_estimate(sample, batch_config(spec, n), spec.alpha, spec.beta);
            out.point = res.point;
            try {
                const OrderStatCi ci = batching_ci(res.yhats, spec.beta, 1.0 - spec.ci_level);
                out.ci_low = ci.low;
                out.ci_high = ci.high;
                out.has_ci = true;
            } catch (const InfeasibleCiError&) {
                out.ci_low = out.ci_high = out.point;
                out.has_ci = false;
            }
            break;
        }
        case EstimatorKind::IS: {
            const EstimateReport rep =
                is_estimate(model.dg, spec.tail, is_config(spec, n), spec.alpha, spec.beta, stream, spec.ci_level);
            out.point = rep.point;
            out.ci_low = rep.ci_low;
            out.ci_high = rep.ci_high;
            out.has_ci = rep.has_ci;
            break;
        }
        case EstimatorKind::QRE: {
            const LossSample sample = draw(spec, model, stream, n);
            const EstimateReport rep =
                qre_covar(sample, spec.alpha, spec.beta, spec.qre_bootstrap, stream, spec.ci_level);
            out.point = rep.point;
            out.ci_low = rep.ci_low;
            out.ci_high = rep.ci_high;
            out.has_ci = rep.has_ci;
            break;
        }
    }
    if (spec.timing) out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(count);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::vector<ReplicationResult> run_replications(const ExperimentSpec& spec, const PreparedModel& model, std::size_t n,
                                                std::size_t first, std::size_t count) {
    std::vector<ReplicationResult> out(count);
    parallel_for(count, spec.threads, [&](std::size_t i) { out[i] = run_replication(spec, model, n, first + i); });
    return out;
}

MetricsRow summarize(std::span<const ReplicationResult> results, double truth, std::size_t n, std::string alloc) {
    if (results.empty()) throw InvalidParameter("summarize: no replications");
    const auto r = static_cast<double>(results.size());
    long double sum = 0.0L, secs = 0.0L;
    for (const auto& res : results) {
        sum += res.point;
        secs += res.seconds;
    }
    const double mean = static_cast<double>(sum / r);
    long double ss = 0.0L;
    for (const auto& res : results) ss += static_cast<long double>(res.point - mean) * (res.point - mean);

    MetricsRow row;
    row.n = n;
    row.alloc = std::move(alloc);
    row.bias = mean - truth;
    row.sd = results.size() > 1 ? std::sqrt(static_cast<double>(ss / (r - 1.0))) : 0.0;
    row.rmse = std::sqrt(row.bias * row.bias + row.sd * row.sd);
    row.seconds = static_cast<double>(secs / r);

    std::size_t with_ci = 0, covered = 0;
    long double width = 0.0L;
    for (const auto& res : results) {
        if (!res.has_ci) continue;
        ++with_ci;
        if (res.ci_low <= truth && truth <= res.ci_high) ++covered;
        width += res.ci_high - res.ci_low;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.cp = with_ci ? static_cast<double>(covered) / static_cast<double>(with_ci) : nan;
    row.width = with_ci ? static_cast<double>(width / static_cast<long double>(with_ci)) : nan;
    return row;
}

std::vector<MetricsRow> run_experiment(const ExperimentSpec& spec, std::optional<double> truth) {
    spec.validate();
    std::optional<double> t = analytic_or_reference_truth(spec);
    if (!t) t = truth;
    if (!t)
        throw ConfigError("no ground truth for a delta-gamma model: pass --reference <value> or run the "
                          "'reference' subcommand and pass --reference-n");
    const PreparedModel model = prepare_model(spec);
    std::vector<MetricsRow> rows;
    for (const std::size_t n : spec.sample_sizes) {
        const auto results = run_replications(spec, model, n, spec.first_replication, spec.replications);
        rows.push_back(summarize(results, *t, n, allocation_label(spec, n)));
    }
    return rows;
}

double loglog_slope(std::span<const MetricsRow> rows) {
    if (rows.size() < 3) throw InvalidParameter("loglog_slope: need at least 3 rows");
    std::vector<double> lx, ly;
    for (const auto& r : rows) {
        if (!(r.rmse > 0.0)) throw InvalidParameter("loglog_slope: rmse must be positive");
        if (r.n == 0) throw InvalidParameter("loglog_slope: n must be positive");
        lx.push_back(std::log(static_cast<double>(r.n)));
        ly.push_back(std::log(r.rmse));
    }
    std::vector<std::size_t> ns;
    for (const auto& r : rows) ns.push_back(r.n);
    std::sort(ns.begin(), ns.end());
    if (std::adjacent_find(ns.begin(), ns.end()) != ns.end())
        throw InvalidParameter("loglog_slope: sample sizes must be distinct");
    const double k = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / k;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / k;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace covar
