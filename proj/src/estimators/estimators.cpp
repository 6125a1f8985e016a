#include "covar/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

#include "covar/distributions.hpp"
#include "covar/error.hpp"

namespace covar {

namespace {

void require_level(double p, const char* name) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError(std::string(name) + " must lie in (0,1)");
}

constexpr std::uint64_t kStageOneTag = 1;
constexpr std::uint64_t kStageTwoTag = 2;

// Weighted-quantile worker on pre-filled (value, weight) pairs. The entries
// are sorted in place by value (stable, so ties keep scenario order).
struct Weighted {
    double value;
    double weight;
};

double weighted_quantile_inplace(std::vector<Weighted>& entries, double beta) {
    long double total = 0.0L;
    for (const auto& e : entries) {
        if (!(e.weight >= 0.0)) throw InvalidParameter("weighted_quantile: weights must be non-negative");
        total += e.weight;
    }
    if (!(total > 0.0L))
        throw DegenerateIsError(
            "all importance weights are zero: the target VaR never exceeded the conditional minimum g*; "
            "increase n1 or check that the model's largest X curvature sits on the last driver");
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Weighted& a, const Weighted& b) { return a.value < b.value; });
    long double cum = 0.0L;
    const double* last_positive = nullptr;
    for (const auto& e : entries) {
        if (e.weight <= 0.0) continue;
        cum += e.weight / total;
        last_positive = &e.value;
        if (cum > beta) {
            if (std::isinf(e.value))
                throw InfiniteQuantileError("weighted_quantile: the beta-quantile falls on an infinite value");
            return e.value;
        }
    }
    // Rounding left the cumulative sum at or just below beta.
    if (last_positive == nullptr || std::isinf(*last_positive))
        throw InfiniteQuantileError("weighted_quantile: the beta-quantile falls on an infinite value");
    return *last_positive;
}

// Stage-2 draw shared by is_scenario and the estimator loop.
RootWeights draw_scenario(const SimplifiedDeltaGamma& model, const TailSpec& tail, double x, RngStream& stream) {
    const std::size_t last = model.d - 1;
    double xi1 = model.c1;
    double eta2 = model.c2;
    // Drivers first, then the shock, so the normal case consumes exactly
    // d - 1 normals per scenario.
    thread_local std::vector<double> z;
    z.resize(last);
    for (double& v : z) v = std_normal(stream);
    const double w = draw_shock(tail, stream);
    const double inv_w = 1.0 / w;
    for (std::size_t j = 0; j < last; ++j) {
        const double s = z[j] * inv_w;
        xi1 += model.delta1[j] * s + model.gamma1[j] * s * s;
        eta2 += model.delta2[j] * s + model.gamma2[j] * s * s;
    }
    RootWeights rw = conditional_root_weights(xi1, model.delta1[last] * inv_w, model.gamma1[last] * inv_w * inv_w, x);
    if (rw.crossed) {
        const double s1 = rw.r1 * inv_w;
        const double s2 = rw.r2 * inv_w;
        rw.y1 = eta2 + model.delta2[last] * s1 + model.gamma2[last] * s1 * s1;
        rw.y2 = eta2 + model.delta2[last] * s2 + model.gamma2[last] * s2 * s2;
    }
    return rw;
}

void require_is_applicable(const SimplifiedDeltaGamma& model) {
    model.validate();
    if (!(model.gamma1.back() > 0.0))
        throw CurvatureError("IS estimation needs a positive X curvature on the last driver (gamma1[d-1] = " +
                             std::to_string(model.gamma1.back()) + ")");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::size_t ceil_rank(double p, std::size_t n) {
    if (n == 0) throw InvalidParameter("ceil_rank: empty sample");
    const double v = p * static_cast<double>(n);
    const double r = std::round(v);
    double rank = std::fabs(v - r) <= 1e-9 * std::max(1.0, std::fabs(v)) ? r : std::ceil(v);
    rank = std::clamp(rank, 1.0, static_cast<double>(n));
    return static_cast<std::size_t>(rank);
}

double var_order_stat(std::span<const double> xs, double alpha) {
    if (xs.empty()) throw InvalidParameter("var_order_stat: empty sample");
    require_level(alpha, "alpha");
    std::vector<double> copy(xs.begin(), xs.end());
    const std::size_t idx = ceil_rank(alpha, copy.size()) - 1;
    std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(idx), copy.end());
    return copy[idx];
}

BatchConfig BatchConfig::for_sample_size(std::size_t n) {
    if (n < 4) throw InvalidParameter("BatchConfig: sample size too small for batching");
    const auto k = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 2.0 / 3.0) / 2.0 - 1e-9));
    return {k, n / k};
}

BatchingResult batching_estimate(const LossSample& sample, const BatchConfig& cfg, double alpha, double beta) {
    sample.validate();
    require_level(alpha, "alpha");
    require_level(beta, "beta");
    if (cfg.k == 0 || cfg.m == 0) throw InvalidParameter("batching_estimate: k and m must be positive");
    const std::size_t used = cfg.k * cfg.m;
    if (sample.size() < used)
        throw InvalidParameter("batching_estimate: sample has " + std::to_string(sample.size()) +
                               " observations, k*m = " + std::to_string(used));

    BatchingResult out;
    out.discarded = sample.size() - used;
    out.yhats.resize(cfg.k);
    const std::size_t rank = ceil_rank(alpha, cfg.m) - 1;
    // (x, position) pairs: lexicographic order equals a stable sort on x.
    std::vector<std::pair<double, std::size_t>> batch(cfg.m);
    for (std::size_t i = 0; i < cfg.k; ++i) {
        const std::size_t base = i * cfg.m;
        for (std::size_t j = 0; j < cfg.m; ++j) batch[j] = {sample.x[base + j], j};
        std::nth_element(batch.begin(), batch.begin() + static_cast<std::ptrdiff_t>(rank), batch.end());
        out.yhats[i] = sample.y[base + batch[rank].second];
    }
    out.point = var_order_stat(out.yhats, beta);
    return out;
}

OrderStatCi batching_ci(std::span<const double> yhats, double beta, double gamma_level) {
    require_level(beta, "beta");
    require_level(gamma_level, "gamma");
    const std::size_t k = yhats.size();
    if (k < 2) throw InvalidParameter("batching_ci: need at least 2 batches");
    const double z = inv_norm_cdf(1.0 - gamma_level / 2.0);
    const double spread = z * std::sqrt(beta * (1.0 - beta));
    auto ranks = [&](std::size_t kk) {
        const double kd = static_cast<double>(kk);
        const double k1 = kd * (beta - spread / std::sqrt(kd));
        const double k2 = kd * (beta + spread / std::sqrt(kd));
        return std::pair{std::floor(k1), std::ceil(k2)};
    };
    const auto [lo, hi] = ranks(k);
    if (lo < 1.0 || hi > static_cast<double>(k)) {
        std::size_t need = k + 1;
        for (; need < 100000000; ++need) {
            const auto [l, h] = ranks(need);
            if (l >= 1.0 && h <= static_cast<double>(need)) break;
        }
        throw InfeasibleCiError("batching_ci: order-statistic ranks (" + std::to_string(static_cast<long long>(lo)) +
                                ", " + std::to_string(static_cast<long long>(hi)) + ") fall outside [1, " +
                                std::to_string(k) + "]; at beta=" + std::to_string(beta) +
                                " the interval needs at least k=" + std::to_string(need) + " batches");
    }
    std::vector<double> sorted(yhats.begin(), yhats.end());
    std::sort(sorted.begin(), sorted.end());
    OrderStatCi ci;
    ci.low_rank = static_cast<std::size_t>(lo);
    ci.high_rank = static_cast<std::size_t>(hi);
    ci.low = sorted[ci.low_rank - 1];
    ci.high = sorted[ci.high_rank - 1];
    return ci;
}

IsConfig IsConfig::for_sample_size(std::size_t n) {
    IsConfig cfg;
    cfg.n2 = n / 2;
    cfg.n1 = n - cfg.n2;
    cfg.b = 10;
    return cfg;
}

void IsConfig::validate() const {
    if (n1 == 0 || n2 == 0) throw InvalidParameter("IsConfig: n1 and n2 must be positive");
    if (b < 2) throw InvalidParameter("IsConfig: sectioning needs b >= 2");
    if (n2 % b != 0)
        throw InvalidParameter("IsConfig: b=" + std::to_string(b) + " does not divide n2=" + std::to_string(n2));
}

RootWeights conditional_root_weights(double xi1, double b, double a, double x) {
    if (!(a > 0.0))
        throw CurvatureError("conditional_root_weights: curvature a must be positive, got " + std::to_string(a));
    RootWeights rw;
    const double disc = b * b + 4.0 * a * (x - xi1);
    if (!(disc > 0.0)) return rw;  // x <= g*: no crossing (x == g* has probability zero)
    const double root = std::sqrt(disc);
    // Cancellation-free pair: one root from q / a, the other from c / q.
    const double q = b >= 0.0 ? -0.5 * (b + root) : 0.5 * (root - b);
    const double ra = q / a;
    const double rb = (xi1 - x) / q;
    rw.crossed = true;
    rw.r1 = std::min(ra, rb);
    rw.r2 = std::max(ra, rb);
    rw.lambda = root;
    rw.q1 = norm_pdf(rw.r1) / root;
    rw.q2 = norm_pdf(rw.r2) / root;
    return rw;
}

RootWeights is_scenario(const SimplifiedDeltaGamma& model, const TailSpec& tail, double v_alpha_hat,
                        RngStream& stream) {
    require_is_applicable(model);
    tail.validate();
    return draw_scenario(model, tail, v_alpha_hat, stream);
}

std::vector<RootWeights> is_scenarios(const SimplifiedDeltaGamma& model, const TailSpec& tail, double v_alpha_hat,
                                      RngStream& stream, std::size_t n2) {
    require_is_applicable(model);
    tail.validate();
    std::vector<RootWeights> out(n2);
    for (auto& rw : out) rw = draw_scenario(model, tail, v_alpha_hat, stream);
    return out;
}

std::vector<double> normalize_weights(std::span<const double> weights) {
    long double total = 0.0L;
    for (double w : weights) {
        if (!(w >= 0.0)) throw InvalidParameter("normalize_weights: weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0L)) throw DegenerateIsError("normalize_weights: all weights are zero");
    std::vector<double> out(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) out[i] = static_cast<double>(weights[i] / total);
    return out;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights, double beta) {
    require_level(beta, "beta");
    if (values.size() != weights.size()) throw InvalidParameter("weighted_quantile: length mismatch");
    if (values.empty()) throw InvalidParameter("weighted_quantile: no values");
    std::vector<Weighted> entries(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) entries[i] = {values[i], weights[i]};
    return weighted_quantile_inplace(entries, beta);
}

Interval sectioning_ci(std::span<const double> section_points, double point, double gamma_level) {
    require_level(gamma_level, "gamma");
    const std::size_t b = section_points.size();
    if (b < 2) throw InvalidParameter("sectioning_ci: need at least 2 sections");
    double ss = 0.0;
    for (double v : section_points) ss += (v - point) * (v - point);
    const double s = std::sqrt(ss / static_cast<double>(b - 1));
    const double t = student_t_quantile(1.0 - gamma_level / 2.0, static_cast<double>(b - 1));
    const double half = t * s / std::sqrt(static_cast<double>(b));
    return {point - half, point + half};
}

EstimateReport is_estimate(const SimplifiedDeltaGamma& model, const TailSpec& tail, const IsConfig& cfg, double alpha,
                           double beta, RngStream& stream, double ci_level) {
    require_is_applicable(model);
    tail.validate();
    cfg.validate();
    require_level(alpha, "alpha");
    require_level(beta, "beta");
    require_level(ci_level, "ci_level");

    RngStream stage1 = stream.fork(kStageOneTag);
    RngStream stage2 = stream.fork(kStageTwoTag);

    const LossSample first = sample_losses(model, tail, stage1, cfg.n1);
    const double v_alpha = var_order_stat(first.x, alpha);

    std::vector<Weighted> entries(2 * cfg.n2);
    std::size_t crossed = 0;
    for (std::size_t k = 0; k < cfg.n2; ++k) {
        const RootWeights rw = draw_scenario(model, tail, v_alpha, stage2);
        crossed += rw.crossed ? 1 : 0;
        entries[2 * k] = {rw.y1, rw.q1};
        entries[2 * k + 1] = {rw.y2, rw.q2};
    }

    // Sections are contiguous scenario blocks; estimate them before the
    // full-sample sort reorders the entries.
    const std::size_t per = 2 * (cfg.n2 / cfg.b);
    std::vector<double> sections(cfg.b);
    std::vector<Weighted> block(per);
    for (std::size_t j = 0; j < cfg.b; ++j) {
        std::copy_n(entries.begin() + static_cast<std::ptrdiff_t>(j * per), per, block.begin());
        sections[j] = weighted_quantile_inplace(block, beta);
    }
    EstimateReport rep;
    rep.point = weighted_quantile_inplace(entries, beta);
    const Interval ci = sectioning_ci(sections, rep.point, 1.0 - ci_level);
    rep.ci_low = ci.low;
    rep.ci_high = ci.high;
    rep.level = ci_level;
    rep.has_ci = true;
    rep.diagnostics["v_alpha"] = v_alpha;
    rep.diagnostics["crossed_fraction"] = static_cast<double>(crossed) / static_cast<double>(cfg.n2);
    rep.diagnostics["n1"] = static_cast<double>(cfg.n1);
    rep.diagnostics["n2"] = static_cast<double>(cfg.n2);
    rep.diagnostics["b"] = static_cast<double>(cfg.b);
    return rep;
}

double conditional_cdf_from_scenarios(std::span<const RootWeights> scenarios, double y) {
    long double num = 0.0L, den = 0.0L;
    for (const auto& rw : scenarios) {
        if (!rw.crossed) continue;
        den += rw.q1 + rw.q2;
        if (rw.y1 <= y) num += rw.q1;
        if (rw.y2 <= y) num += rw.q2;
    }
    if (!(den > 0.0L)) throw DegenerateIsError("conditional CDF: no scenario crossed the target x");
    return static_cast<double>(num / den);
}

double is_conditional_cdf(const SimplifiedDeltaGamma& model, const TailSpec& tail, double x, double y,
                          std::size_t n2, RngStream& stream) {
    if (n2 == 0) throw InvalidParameter("is_conditional_cdf: n2 must be positive");
    const auto scenarios = is_scenarios(model, tail, x, stream, n2);
    return conditional_cdf_from_scenarios(scenarios, y);
}

double band_conditional_cdf(const LossSample& sample, double x, double y, double eps) {
    sample.validate();
    if (!(eps > 0.0)) throw InvalidParameter("band_conditional_cdf: eps must be positive");
    std::size_t in_band = 0, below = 0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        if (std::fabs(sample.x[i] - x) > eps) continue;
        ++in_band;
        if (sample.y[i] <= y) ++below;
    }
    if (in_band == 0)
        throw EmptyBandError("band_conditional_cdf: no observation within eps=" + std::to_string(eps) + " of x");
    return static_cast<double>(below) / static_cast<double>(in_band);
}

void write_root_weights_csv(std::ostream& os, std::span<const RootWeights> scenarios) {
    os << "scenario,crossed,r1,r2,lambda,q1,q2,y1,y2\n";
    for (std::size_t k = 0; k < scenarios.size(); ++k) {
        const auto& rw = scenarios[k];
        os << k << ',';
        if (rw.crossed) {
            os << "1," << fmt_double(rw.r1) << ',' << fmt_double(rw.r2) << ',' << fmt_double(rw.lambda) << ','
               << fmt_double(rw.q1) << ',' << fmt_double(rw.q2) << ',' << fmt_double(rw.y1) << ','
               << fmt_double(rw.y2) << '\n';
        } else {
            os << "0,,,0,0,0,,\n";
        }
    }
}

}  // namespace covar
