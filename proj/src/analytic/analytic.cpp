#include "covar/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "covar/distributions.hpp"
#include "covar/error.hpp"

namespace covar {

namespace {

void require_level(double p, const char* name) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError(std::string(name) + " must lie in (0,1)");
}

double correlation_term(double rho, double alpha, double beta) {
    return rho * inv_norm_cdf(alpha) + std::sqrt(1.0 - rho * rho) * inv_norm_cdf(beta);
}

struct Moments {
    long double sw = 0, swx = 0, swxx = 0, swy = 0, swxy = 0;
};

// Solve the 2x2 normal equations [sw swx; swx swxx] (a, b) = (ry, rxy).
std::pair<double, double> solve2(long double sw, long double swx, long double swxx, long double ry, long double rxy) {
    const long double det = sw * swxx - swx * swx;
    if (!(std::fabs(static_cast<double>(det)) > 0.0))
        throw ConvergenceError("qre_fit: singular weighted normal equations (constant X?)");
    return {static_cast<double>((ry * swxx - swx * rxy) / det), static_cast<double>((sw * rxy - swx * ry) / det)};
}

double smoothed_objective(const LossSample& s, double beta, double a, double b, double eps) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double r = s.y[i] - a - b * s.x[i];
        const double ar = std::fabs(r);
        const double h = ar >= eps ? ar : r * r / (2.0 * eps) + eps / 2.0;
        acc += 0.5 * h + (beta - 0.5) * r;
    }
    return static_cast<double>(acc);
}


// Minimizes sum_i rho_beta(y_i - a - b x_i) - sa a - sb b over the given
// points by bisection on the convex profile in b. The a-minimizer for fixed
// b is an order statistic of the residuals whose rank does not depend on b.
bool solve_reduced(const std::vector<double>& xs, const std::vector<double>& ys, double beta, double sa, double sb,
                   double b_start, double& a_out, double& b_out) {
    const std::size_t m = xs.size();
    const double target = beta * static_cast<double>(m) + sa;
    double jr = std::ceil(target);
    if (std::fabs(target - std::round(target)) <= 1e-9 * std::max(1.0, std::fabs(target))) jr = std::round(target);
    if (jr < 1.0 || jr > static_cast<double>(m)) return false;
    const auto j = static_cast<std::size_t>(jr) - 1;

    std::vector<double> r(m);
    std::vector<std::size_t> idx(m);
    auto profile = [&](double bb, double& aa) {
        for (std::size_t i = 0; i < m; ++i) {
            r[i] = ys[i] - bb * xs[i];
            idx[i] = i;
        }
        std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(j), idx.end(),
                         [&](std::size_t p, std::size_t q) { return r[p] < r[q]; });
        aa = r[idx[j]];
        long double psi_sum = 0.0L, xpsi = 0.0L;
        for (std::size_t pos = 0; pos < m; ++pos) {
            if (pos == j) continue;
            const double psi = pos < j ? beta - 1.0 : beta;
            psi_sum += psi;
            xpsi += psi * xs[idx[pos]];
        }
        const long double psi_tie = -sa - psi_sum;
        xpsi += psi_tie * xs[idx[j]];
        return static_cast<double>(-xpsi - sb);
    };

    double a_tmp = 0.0;
    double width = 1e-3 * (1.0 + std::fabs(b_start));
    double lo = b_start - width, hi = b_start + width;
    double glo = profile(lo, a_tmp), ghi = profile(hi, a_tmp);
    for (int k = 0; k < 200 && !(glo <= 0.0 && ghi >= 0.0); ++k) {
        width *= 2.0;
        if (glo > 0.0) {
            hi = lo;
            ghi = glo;
            lo -= width;
            glo = profile(lo, a_tmp);
        } else {
            lo = hi;
            glo = ghi;
            hi += width;
            ghi = profile(hi, a_tmp);
        }
    }
    if (!(glo <= 0.0 && ghi >= 0.0)) throw ConvergenceError("qre_fit: could not bracket the slope");
    for (int k = 0; k < 200 && hi - lo > 1e-14 * (1.0 + std::max(std::fabs(lo), std::fabs(hi))); ++k) {
        const double mid = 0.5 * (lo + hi);
        if (profile(mid, a_tmp) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    b_out = 0.5 * (lo + hi);
    profile(b_out, a_out);
    return true;
}

// Exact minimizer of the pinball loss near (a0, b0). Points far from the
// current line keep their residual sign and contribute a linear term; the
// near set is solved exactly and the sign pattern verified, widening the
// near set until it holds.
std::pair<double, double> exact_finish(const LossSample& s, double beta, double a0, double b0) {
    const std::size_t n = s.size();
    std::vector<double> dist(n), tmp;
    std::vector<signed char> sign(n);
    std::vector<double> nx, ny;
    double ca = a0, cb = b0;
    double frac = 0.02;
    for (;;) {
        for (std::size_t i = 0; i < n; ++i) dist[i] = std::fabs(s.y[i] - ca - cb * s.x[i]) / (1.0 + std::fabs(s.x[i]));
        const auto cnt = std::min(n, std::max<std::size_t>(64, static_cast<std::size_t>(frac * static_cast<double>(n))));
        double delta = std::numeric_limits<double>::infinity();
        if (cnt < n) {
            // Threshold from a strided subsample; exactness does not depend on it.
            const std::size_t stride = std::max<std::size_t>(1, n / 4096);
            tmp.clear();
            for (std::size_t i = 0; i < n; i += stride) tmp.push_back(dist[i]);
            const auto pick = std::min(tmp.size() - 1, cnt * tmp.size() / n);
            std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(pick), tmp.end());
            delta = tmp[pick];
        }
        nx.clear();
        ny.clear();
        long double sa = 0.0L, sb = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            if (dist[i] <= delta) {
                sign[i] = 0;
                nx.push_back(s.x[i]);
                ny.push_back(s.y[i]);
                continue;
            }
            const bool below = s.y[i] - ca - cb * s.x[i] < 0.0;
            const double psi = below ? beta - 1.0 : beta;
            sign[i] = below ? -1 : 1;
            sa += psi;
            sb += psi * s.x[i];
        }
        double a = ca, b = cb;
        const bool ok =
            solve_reduced(nx, ny, beta, static_cast<double>(sa), static_cast<double>(sb), cb, a, b);
        if (ok) {
            bool holds = true;
            for (std::size_t i = 0; i < n && holds; ++i) {
                if (sign[i] == 0) continue;
                const double r = s.y[i] - a - b * s.x[i];
                holds = sign[i] < 0 ? r <= 0.0 : r >= 0.0;
            }
            if (holds) return {a, b};
            ca = a;
            cb = b;
        }
        if (cnt == n) throw ConvergenceError("qre_fit: exact finish failed on the full sample");
        frac *= 4.0;
    }
}

}  // namespace

void LinearPortfolioSpec::validate() const {
    if (!(sigma_x > 0.0 && sigma_y > 0.0)) throw InvalidParameter("LinearPortfolioSpec: sigmas must be positive");
    if (!(std::fabs(rho) <= 1.0)) throw InvalidParameter("LinearPortfolioSpec: |rho| must be <= 1");
}

void NonlinearPortfolioSpec::validate() const {
    if (!(sigma_x > 0.0 && sigma_y > 0.0)) throw InvalidParameter("NonlinearPortfolioSpec: sigmas must be positive");
    if (!(std::fabs(rho) <= 1.0)) throw InvalidParameter("NonlinearPortfolioSpec: |rho| must be <= 1");
}

double linear_covar(const LinearPortfolioSpec& spec, double alpha, double beta) {
    spec.validate();
    require_level(alpha, "alpha");
    require_level(beta, "beta");
    return spec.mu_y + spec.sigma_y * correlation_term(spec.rho, alpha, beta);
}

NonlinearCovar nonlinear_covar(const NonlinearPortfolioSpec& spec, double alpha, double beta) {
    spec.validate();
    require_level(alpha, "alpha");
    require_level(beta, "beta");
    NonlinearCovar out;
    out.var_x = spec.mu_x + inv_norm_cdf(alpha) * spec.sigma_x;
    out.covar = spec.delta * out.var_x + 0.5 * spec.gamma * out.var_x * out.var_x +
                spec.sigma_y * correlation_term(spec.rho, alpha, beta);
    return out;
}

double rho_star(double alpha, double beta) {
    require_level(alpha, "alpha");
    require_level(beta, "beta");
    const double qa = inv_norm_cdf(alpha);
    const double qb = inv_norm_cdf(beta);
    const double den = qa * qa + qb * qb;
    if (den == 0.0) throw DomainError("rho_star: undefined when alpha = beta = 0.5");
    return std::sqrt(qa * qa / den);
}

LossSample sample_linear(const LinearPortfolioSpec& spec, RngStream& stream, std::size_t n) {
    spec.validate();
    if (n == 0) throw InvalidParameter("sample_linear: n must be positive");
    const double tilt = std::sqrt(1.0 - spec.rho * spec.rho);
    LossSample out;
    out.x.resize(n);
    out.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = std_normal(stream);
        const double z2 = std_normal(stream);
        out.x[i] = spec.mu_x + spec.sigma_x * z1;
        out.y[i] = spec.mu_y + spec.sigma_y * (spec.rho * z1 + tilt * z2);
    }
    return out;
}

LossSample sample_nonlinear(const NonlinearPortfolioSpec& spec, RngStream& stream, std::size_t n) {
    spec.validate();
    if (n == 0) throw InvalidParameter("sample_nonlinear: n must be positive");
    const double tilt = std::sqrt(1.0 - spec.rho * spec.rho);
    LossSample out;
    out.x.resize(n);
    out.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = std_normal(stream);
        const double z2 = std_normal(stream);
        const double x = spec.mu_x + spec.sigma_x * z1;
        const double xi = spec.sigma_y * (spec.rho * z1 + tilt * z2);
        out.x[i] = x;
        out.y[i] = spec.delta * x + 0.5 * spec.gamma * x * x + xi;
    }
    return out;
}

double pinball_objective(const LossSample& sample, double beta, double a, double b) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double u = sample.y[i] - a - b * sample.x[i];
        acc += u * (beta - (u < 0.0 ? 1.0 : 0.0));
    }
    return static_cast<double>(acc);
}

QreFit qre_fit(const LossSample& sample, double beta, const QreOptions& opts) {
    sample.validate();
    if (sample.size() < 10) throw InvalidParameter("qre_fit: need at least 10 observations");
    // Least-squares start.
    long double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        sx += sample.x[i];
        sy += sample.y[i];
        sxx += static_cast<long double>(sample.x[i]) * sample.x[i];
        sxy += static_cast<long double>(sample.x[i]) * sample.y[i];
    }
    const auto [a0, b0] = solve2(static_cast<long double>(sample.size()), sx, sxx, sy, sxy);
    return qre_fit_from(sample, beta, a0, b0, opts);
}

QreFit qre_fit_from(const LossSample& sample, double beta, double a0, double b0, const QreOptions& opts) {
    sample.validate();
    require_level(beta, "beta");
    if (sample.size() < 10) throw InvalidParameter("qre_fit: need at least 10 observations");
    const double eps = opts.smoothing;
    const long double tilt = 2.0L * beta - 1.0L;

    QreFit fit;
    double a = a0, b = b0;
    double best_a = a, best_b = b;
    double best_obj = opts.max_iterations > 0 ? smoothed_objective(sample, beta, a, b, eps) : 0.0;
    if (opts.record_trace && opts.max_iterations > 0) fit.trace.push_back(best_obj);

    bool finish = opts.max_iterations == 0;
    for (std::size_t iter = 1; iter <= opts.max_iterations; ++iter) {
        Moments m;
        long double sum_x = 0.0L;
        for (std::size_t i = 0; i < sample.size(); ++i) {
            const double x = sample.x[i];
            const double y = sample.y[i];
            const double w = 1.0 / std::max(std::fabs(y - a - b * x), eps);
            m.sw += w;
            m.swx += w * x;
            m.swxx += w * x * x;
            m.swy += w * y;
            m.swxy += w * x * y;
            sum_x += x;
        }
        const auto [na, nb] =
            solve2(m.sw, m.swx, m.swxx, m.swy + tilt * static_cast<long double>(sample.size()), m.swxy + tilt * sum_x);
        const double change = std::max(std::fabs(na - a), std::fabs(nb - b));
        a = na;
        b = nb;
        const double obj = smoothed_objective(sample, beta, a, b, eps);
        if (opts.record_trace) fit.trace.push_back(obj);
        if (obj <= best_obj) {
            best_obj = obj;
            best_a = a;
            best_b = b;
        }
        fit.iterations = iter;
        const double scale = 1.0 + std::max(std::fabs(a), std::fabs(b));
        if (change <= opts.tolerance * scale) {
            fit.converged = true;
            break;
        }
        if (change <= opts.finish_tolerance * scale) {
            finish = true;
            break;
        }
    }
    if (finish) {
        const auto [ea, eb] = exact_finish(sample, beta, best_a, best_b);
        if (opts.max_iterations == 0 ||
            pinball_objective(sample, beta, ea, eb) <= pinball_objective(sample, beta, best_a, best_b)) {
            best_a = ea;
            best_b = eb;
        }
        fit.converged = true;
    }
    if (!fit.converged && opts.throw_on_cap) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "qre_fit: no convergence after " << opts.max_iterations << " iterations; last iterate a=" << a
            << " b=" << b;
        throw ConvergenceError(msg.str());
    }
    fit.a = best_a;
    fit.b = best_b;
    fit.objective = pinball_objective(sample, beta, best_a, best_b);
    return fit;
}

EstimateReport qre_covar(const LossSample& sample, double alpha, double beta, std::size_t bootstrap_reps,
                         RngStream& stream, double ci_level) {
    require_level(alpha, "alpha");
    require_level(ci_level, "ci_level");
    const QreFit fit = qre_fit(sample, beta);
    const double var_x = var_order_stat(sample.x, alpha);

    EstimateReport rep;
    rep.point = fit.a + fit.b * var_x;
    rep.level = ci_level;
    rep.diagnostics["a"] = fit.a;
    rep.diagnostics["b"] = fit.b;
    rep.diagnostics["var_x"] = var_x;
    rep.diagnostics["iterations"] = static_cast<double>(fit.iterations);
    if (bootstrap_reps == 0) {
        rep.ci_low = rep.ci_high = rep.point;
        rep.has_ci = false;
        return rep;
    }

    // Case-resampling bootstrap, one substream per replicate, each fit warm
    // started from the full-sample solution.
    const RngStream base = stream.fork();
    const std::size_t n = sample.size();
    std::vector<double> boots(bootstrap_reps);
    LossSample resample;
    resample.x.resize(n);
    resample.y.resize(n);
    QreOptions opts;
    opts.max_iterations = 0;
    for (std::size_t r = 0; r < bootstrap_reps; ++r) {
        RngStream rs = base.substream(r);
        for (std::size_t i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(rs.uniform01() * static_cast<double>(n));
            resample.x[i] = sample.x[idx];
            resample.y[i] = sample.y[idx];
        }
        const QreFit bf = qre_fit_from(resample, beta, fit.a, fit.b, opts);
        boots[r] = bf.a + bf.b * var_order_stat(resample.x, alpha);
    }
    std::sort(boots.begin(), boots.end());
    const double tail = (1.0 - ci_level) / 2.0;
    rep.ci_low = boots[ceil_rank(tail, bootstrap_reps) - 1];
    rep.ci_high = boots[ceil_rank(1.0 - tail, bootstrap_reps) - 1];
    rep.has_ci = true;
    rep.diagnostics["bootstrap_reps"] = static_cast<double>(bootstrap_reps);
    return rep;
}

}  // namespace covar
