#pragma once

#include <cstddef>
#include <cstdint>

#include "covar/dgmodel.hpp"
#include "covar/estimators.hpp"
#include "covar/rng.hpp"

namespace covar {

// Jointly normal losses:
//   Y = mu_y + sigma_y (rho (X - mu_x) / sigma_x + sqrt(1 - rho^2) Z).
struct LinearPortfolioSpec {
    double mu_x = -0.005;
    double mu_y = -0.00286;
    double sigma_x = 0.08;
    double sigma_y = 0.06111;
    double rho = 0.95;

    void validate() const;
};

// Y = delta X + gamma X^2 / 2 + xi with xi built like the linear noise term.
struct NonlinearPortfolioSpec {
    double mu_x = -0.03;
    double sigma_x = 0.2;
    double sigma_y = 0.3;
    double rho = 0.95;
    double delta = 0.2;
    double gamma = 0.8;

    void validate() const;
};

double linear_covar(const LinearPortfolioSpec& spec, double alpha, double beta);

struct NonlinearCovar {
    double covar = 0.0;
    double var_x = 0.0;
};

NonlinearCovar nonlinear_covar(const NonlinearPortfolioSpec& spec, double alpha, double beta);

// Correlation maximizing the CoVaR of both closed forms.
double rho_star(double alpha, double beta);

LossSample sample_linear(const LinearPortfolioSpec& spec, RngStream& stream, std::size_t n);
LossSample sample_nonlinear(const NonlinearPortfolioSpec& spec, RngStream& stream, std::size_t n);

/// Sum of rho_beta(y - a - b x) with rho_beta(u) = u (beta - 1{u < 0}).
double pinball_objective(const LossSample& sample, double beta, double a, double b);

struct QreFit {
    double a = 0.0;
    double b = 0.0;
    double objective = 0.0;  // pinball loss at (a, b)
    std::size_t iterations = 0;
    bool converged = false;
    // Smoothed objective after each IRLS iteration; the solver's monotone path.
    std::vector<double> trace;
};

struct QreOptions {
    double smoothing = 1e-6;
    std::size_t max_iterations = 200;
    double tolerance = 1e-10;
    // Once an IRLS step moves less than this (relative), switch to the exact
    // active-set finish.
    double finish_tolerance = 1e-4;
    bool throw_on_cap = true;
    bool record_trace = false;
};

/// Linear beta-quantile regression of Y on X. Iteratively reweighted least
/// squares (a majorize-minimize scheme on the smoothed pinball loss) brings
/// the line close; an exact active-set step then lands on the minimizer.
/// Hitting the iteration cap first raises ConvergenceError unless
/// opts.throw_on_cap is false, in which case the best iterate is returned.
/// max_iterations = 0 skips IRLS and goes straight to the exact step.
QreFit qre_fit(const LossSample& sample, double beta, const QreOptions& opts = {});

/// Same solver started from a given (a, b).
QreFit qre_fit_from(const LossSample& sample, double beta, double a0, double b0, const QreOptions& opts = {});

/// Quantile-regression CoVaR: a + b * VaR_alpha(X) with VaR taken from the
/// sample. bootstrap_reps > 0 adds a case-resampling percentile interval;
/// otherwise the interval collapses to the point and has_ci is false.
EstimateReport qre_covar(const LossSample& sample, double alpha, double beta, std::size_t bootstrap_reps,
                         RngStream& stream, double ci_level = 0.95);

}  // namespace covar
