#pragma once

#include <cstdint>

#include "covar/rng.hpp"

namespace covar {

/// Standard normal density.
double norm_pdf(double z) noexcept;

/// Standard normal CDF, evaluated through erfc for accuracy in both tails.
double norm_cdf(double z) noexcept;

/// Inverse standard normal CDF (Wichura's AS241, PPND16).
/// Throws DomainError unless 0 < p < 1.
double inv_norm_cdf(double p);

/// One N(0,1) variate by inversion of a single open-interval uniform.
double std_normal(RngStream& stream) noexcept;

/// Gamma(shape, 1) variate, Marsaglia-Tsang squeeze. Shapes below one use
/// the boost Gamma(shape + 1) * U^(1/shape).
double gamma_variate(RngStream& stream, double shape);

/// Chi-squared variate with nu degrees of freedom. nu == 0 is rejected.
double chi_squared(RngStream& stream, std::uint32_t nu);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Student-t CDF with nu > 0 degrees of freedom.
double student_t_cdf(double t, double nu);

/// Student-t quantile by safeguarded Newton on student_t_cdf; the result
/// satisfies |F(t) - p| <= 1e-10.
double student_t_quantile(double p, double nu);

}  // namespace covar
