#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "covar/dgmodel.hpp"
#include "covar/rng.hpp"

namespace covar {

/// 1-based rank ceil(p * n), clamped to [1, n]. Products that land within
/// 1e-9 relative of an integer are treated as that integer so that, e.g.,
/// 0.95 * 100 selects rank 95 despite binary rounding.
std::size_t ceil_rank(double p, std::size_t n);

/// Empirical alpha-quantile: the ceil(alpha * n)-th smallest value.
double var_order_stat(std::span<const double> xs, double alpha);

// ---------------------------------------------------------------------------
// Batching estimator

struct BatchConfig {
    std::size_t k = 0;  // batches
    std::size_t m = 0;  // batch size

    /// k = ceil(n^(2/3) / 2), m = floor(n / k).
    static BatchConfig for_sample_size(std::size_t n);
};

struct BatchingResult {
    double point = 0.0;
    std::vector<double> yhats;   // one conditional draw per batch, batch order
    std::size_t discarded = 0;   // trailing observations beyond k * m
};

/// Per batch, take the Y paired with the ceil(alpha m)-th smallest X (ties
/// broken by input order); the estimate is the ceil(beta k)-th smallest of
/// those draws. Samples longer than k * m have their tail discarded and
/// reported in `discarded`.
BatchingResult batching_estimate(const LossSample& sample, const BatchConfig& cfg, double alpha, double beta);

struct OrderStatCi {
    double low = 0.0;
    double high = 0.0;
    std::size_t low_rank = 0;   // floor(K1), 1-based
    std::size_t high_rank = 0;  // ceil(K2), 1-based
};

/// Distribution-free interval (Y_(floor K1), Y_(ceil K2)) with
/// K1,2 = k (beta -/+ z_{1-gamma/2} sqrt(beta (1 - beta) / k)).
/// Infeasible ranks raise InfeasibleCiError naming the smallest workable k.
OrderStatCi batching_ci(std::span<const double> yhats, double beta, double gamma_level);

// ---------------------------------------------------------------------------
// IS-inspired estimator

struct IsConfig {
    std::size_t n1 = 0;  // stage-1 VaR sample
    std::size_t n2 = 0;  // stage-2 scenarios
    std::size_t b = 10;  // sectioning batches; must divide n2

    /// n1 = n2 = n / 2 (n1 takes the odd unit), b = 10.
    static IsConfig for_sample_size(std::size_t n);
    void validate() const;
};

struct RootWeights {
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    bool crossed = false;
    double r1 = 0.0;
    double r2 = 0.0;
    double lambda = 0.0;
    double q1 = 0.0;
    double q2 = 0.0;
    double y1 = kInf;
    double y2 = kInf;
};

/// Roots of g(z) = xi1 + b z + a z^2 = x and their density weights
/// q = phi(r) / lambda with lambda = |g'(r)|. Throws CurvatureError for a <= 0.
/// x at or below the minimum g* is reported as not crossed.
RootWeights conditional_root_weights(double xi1, double b, double a, double x);

/// One stage-2 scenario: draws Z_1..Z_{d-1} (and W), solves for Z_d.
RootWeights is_scenario(const SimplifiedDeltaGamma& model, const TailSpec& tail, double v_alpha_hat,
                        RngStream& stream);

/// n2 scenarios drawn exactly as is_estimate draws them.
std::vector<RootWeights> is_scenarios(const SimplifiedDeltaGamma& model, const TailSpec& tail, double v_alpha_hat,
                                      RngStream& stream, std::size_t n2);

/// Weights divided by their sum. Throws DegenerateIsError when the sum is 0.
std::vector<double> normalize_weights(std::span<const double> weights);

/// Smallest value whose cumulative normalized weight exceeds beta.
/// +inf values are allowed when they carry zero weight.
double weighted_quantile(std::span<const double> values, std::span<const double> weights, double beta);

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

/// point +/- t_{b-1, 1-gamma/2} * S / sqrt(b), S the section spread about point.
Interval sectioning_ci(std::span<const double> section_points, double point, double gamma_level);

struct EstimateReport {
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double level = 0.95;
    bool has_ci = true;
    std::map<std::string, double> diagnostics;
};

/// Two-stage estimator. Stage 1 estimates VaR_alpha(X) from n1 full
/// samples; stage 2 draws n2 conditional scenarios and takes the weighted
/// beta-quantile of the 2 n2 root-evaluated Y values; the interval comes
/// from sectioning the scenarios into b blocks sharing the stage-1 VaR.
EstimateReport is_estimate(const SimplifiedDeltaGamma& model, const TailSpec& tail, const IsConfig& cfg, double alpha,
                           double beta, RngStream& stream, double ci_level = 0.95);

/// Ratio estimator of P(Y <= y | X = x) over n2 scenarios.
double is_conditional_cdf(const SimplifiedDeltaGamma& model, const TailSpec& tail, double x, double y,
                          std::size_t n2, RngStream& stream);

/// Same ratio evaluated on already drawn scenarios.
double conditional_cdf_from_scenarios(std::span<const RootWeights> scenarios, double y);

/// #{Y <= y, |X - x| <= eps} / #{|X - x| <= eps}. Brute-force test oracle.
double band_conditional_cdf(const LossSample& sample, double x, double y, double eps);

/// CSV with columns scenario,crossed,r1,r2,lambda,q1,q2,y1,y2. A scenario
/// that did not cross is written with crossed=0 and empty root/Y fields;
/// the flag, not a float infinity, marks the +inf sentinel.
void write_root_weights_csv(std::ostream& os, std::span<const RootWeights> scenarios);

}  // namespace covar
