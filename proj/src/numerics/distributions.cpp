#include "covar/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "covar/error.hpp"

namespace covar {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

template <std::size_t N>
double horner(const double (&c)[N], double x) noexcept {
    double acc = c[N - 1];
    for (std::size_t i = N - 1; i-- > 0;) acc = acc * x + c[i];
    return acc;
}

// AS241 coefficient tables, lowest order first.
constexpr double kA[] = {3.3871328727963666080e0, 1.3314166789178437745e+2, 1.9715909503065514427e+3,
                         1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
                         3.3430575583588128105e+4, 2.5090809287301226727e+3};
constexpr double kB[] = {1.0,
                         4.2313330701600911252e+1,
                         6.8718700749205790830e+2,
                         5.3941960214247511077e+3,
                         2.1213794301586595867e+4,
                         3.9307895800092710610e+4,
                         2.8729085735721942674e+4,
                         5.2264952788528545610e+3};
constexpr double kC[] = {1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
                         3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
                         2.27238449892691845833e-2, 7.74545014278341407640e-4};
constexpr double kD[] = {1.0,
                         2.05319162663775882187e0,
                         1.67638483018380384940e0,
                         6.89767334985100004550e-1,
                         1.48103976427480074590e-1,
                         1.51986665636164571966e-2,
                         5.47593808499534494600e-4,
                         1.05075007164441684324e-9};
constexpr double kE[] = {6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
                         2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                         2.71155556874348757815e-5, 2.01033439929228813265e-7};
constexpr double kF[] = {1.0,
                         5.99832206555887937690e-1,
                         1.36929880922735805310e-1,
                         1.48753612908506148525e-2,
                         7.86869131145613259100e-4,
                         1.84631831751005468180e-5,
                         1.42151175831644588870e-7,
                         2.04426310338993978564e-15};

double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 1000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw ConvergenceError("incomplete beta continued fraction did not converge");
}

double student_t_pdf(double t, double nu) {
    const double log_norm = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
    return std::exp(log_norm - 0.5 * (nu + 1.0) * std::log1p(t * t / nu));
}

}  // namespace

double norm_pdf(double z) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double norm_cdf(double z) noexcept { return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0); }

double inv_norm_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("inv_norm_cdf: p must lie in (0,1), got " + std::to_string(p));
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * horner(kA, r) / horner(kB, r);
    }
    double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
    double z;
    if (r <= 5.0) {
        r -= 1.6;
        z = horner(kC, r) / horner(kD, r);
    } else {
        r -= 5.0;
        z = horner(kE, r) / horner(kF, r);
    }
    return q < 0.0 ? -z : z;
}

double std_normal(RngStream& stream) noexcept {
    // inv_norm_cdf cannot throw on the open interval.
    return inv_norm_cdf(stream.uniform_open());
}

double gamma_variate(RngStream& stream, double shape) {
    if (!(shape > 0.0)) throw InvalidParameter("gamma_variate: shape must be positive");
    if (shape < 1.0) {
        const double g = gamma_variate(stream, shape + 1.0);
        return g * std::pow(stream.uniform_open(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = std_normal(stream);
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = stream.uniform_open();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double chi_squared(RngStream& stream, std::uint32_t nu) {
    if (nu == 0) throw InvalidParameter("chi_squared: degrees of freedom must be >= 1");
    return 2.0 * gamma_variate(stream, 0.5 * nu);
}

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw InvalidParameter("incomplete_beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete_beta: x must lie in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
    return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double nu) {
    if (!(nu > 0.0)) throw InvalidParameter("student_t_cdf: nu must be positive");
    if (std::isinf(t)) return t > 0.0 ? 1.0 : 0.0;
    const double x = nu / (nu + t * t);
    const double tail = 0.5 * incomplete_beta(0.5 * nu, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double nu) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("student_t_quantile: p must lie in (0,1)");
    if (!(nu > 0.0)) throw InvalidParameter("student_t_quantile: nu must be positive");
    if (p == 0.5) return 0.0;
    // Bracket, then Newton steps that fall back to bisection when they leave it.
    double lo = -1.0, hi = 1.0;
    while (student_t_cdf(lo, nu) > p) lo *= 2.0;
    while (student_t_cdf(hi, nu) < p) hi *= 2.0;
    double t = inv_norm_cdf(p);
    if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double f = student_t_cdf(t, nu) - p;
        if (std::fabs(f) <= 1e-10 * 0.5) return t;
        if (f > 0.0) hi = t; else lo = t;
        double next = t - f / student_t_pdf(t, nu);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == t) return t;
        t = next;
    }
    throw ConvergenceError("student_t_quantile did not converge");
}

}  // namespace covar
