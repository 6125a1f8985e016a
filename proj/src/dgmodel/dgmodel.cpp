#include "covar/dgmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "covar/distributions.hpp"
#include "covar/error.hpp"

namespace covar {

namespace {

void require_len(const std::vector<double>& v, std::size_t d, const char* name) {
    if (v.size() != d)
        throw InvalidParameter(std::string(name) + " has length " + std::to_string(v.size()) + ", expected " +
                               std::to_string(d));
    for (double x : v)
        if (!std::isfinite(x)) throw InvalidParameter(std::string(name) + " contains a non-finite entry");
}

double quad_form(const SymMatrix& m, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.dim(); ++i)
        for (std::size_t j = 0; j < m.dim(); ++j) s += v[i] * m(i, j) * v[j];
    return s;
}

constexpr std::uint64_t kShockTag = 0x57;

}  // namespace

void RawDeltaGamma::validate() const {
    if (d == 0) throw InvalidParameter("RawDeltaGamma: d must be positive");
    if (!(delta_t > 0.0)) throw InvalidParameter("RawDeltaGamma: delta_t must be positive");
    require_len(delta1_bar, d, "delta1_bar");
    require_len(delta2_bar, d, "delta2_bar");
    if (gamma1_bar.dim() != d || gamma2_bar.dim() != d || sigma.dim() != d)
        throw InvalidParameter("RawDeltaGamma: matrix dimensions disagree with d");
}

std::pair<double, double> RawDeltaGamma::loss(std::span<const double> ds) const {
    if (ds.size() != d) throw InvalidParameter("RawDeltaGamma::loss: factor move has wrong length");
    const double x = -theta1 * delta_t - std::inner_product(delta1_bar.begin(), delta1_bar.end(), ds.begin(), 0.0) -
                     0.5 * quad_form(gamma1_bar, ds);
    const double y = -theta2 * delta_t - std::inner_product(delta2_bar.begin(), delta2_bar.end(), ds.begin(), 0.0) -
                     0.5 * quad_form(gamma2_bar, ds);
    return {x, y};
}

void SimplifiedDeltaGamma::validate() const {
    if (d == 0) throw InvalidParameter("SimplifiedDeltaGamma: d must be positive");
    if (!std::isfinite(c1) || !std::isfinite(c2)) throw InvalidParameter("SimplifiedDeltaGamma: c1/c2 not finite");
    require_len(delta1, d, "delta1");
    require_len(gamma1, d, "gamma1");
    require_len(delta2, d, "delta2");
    require_len(gamma2, d, "gamma2");
    if (*std::max_element(gamma1.begin(), gamma1.end()) != gamma1.back())
        throw InvalidParameter("SimplifiedDeltaGamma: the last driver must carry the largest gamma1");
}

SimplifiedDeltaGamma SimplifiedDeltaGamma::scale_y(double a) const {
    SimplifiedDeltaGamma out = *this;
    out.c2 *= a;
    for (double& v : out.delta2) v *= a;
    for (double& v : out.gamma2) v *= a;
    return out;
}

std::uint64_t SimplifiedDeltaGamma::hash() const {
    std::ostringstream os;
    write_model(os, *this);
    // FNV-1a over the canonical serialization.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : os.str()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

TailSpec TailSpec::student_t(std::uint32_t nu) {
    TailSpec t{TailKind::StudentT, nu};
    t.validate();
    return t;
}

void TailSpec::validate() const {
    if (kind == TailKind::StudentT && nu < 1) throw InvalidParameter("TailSpec: Student-t requires nu >= 1");
}

std::string TailSpec::label() const {
    return kind == TailKind::Normal ? std::string("normal") : "t" + std::to_string(nu);
}

void LossSample::validate() const {
    if (x.size() != y.size())
        throw InvalidParameter("LossSample: x has " + std::to_string(x.size()) + " entries but y has " +
                               std::to_string(y.size()));
}

Simplification simplify(const RawDeltaGamma& raw) {
    raw.validate();
    const std::size_t d = raw.d;
    const Matrix chol = cholesky(raw.sigma);
    const Matrix chol_t = chol.transpose();

    Matrix a = chol_t * raw.gamma1_bar.matrix() * chol;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) a(i, j) *= -0.5;
    const SymEigen eig = sym_eigen(SymMatrix::symmetrized(a));

    // sym_eigen already sorts ascending; the stable sort keeps the
    // last-is-largest invariant explicit if that ever changes.
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return eig.values[i] < eig.values[j]; });
    Matrix u(d, d);
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t r = 0; r < d; ++r) u(r, c) = eig.vectors(r, order[c]);

    Simplification out;
    out.transform = chol * u;
    const Matrix ct = out.transform.transpose();

    SimplifiedDeltaGamma& m = out.model;
    m.d = d;
    m.c1 = -raw.theta1 * raw.delta_t;
    m.c2 = -raw.theta2 * raw.delta_t;
    m.delta1 = ct * raw.delta1_bar;
    m.delta2 = ct * raw.delta2_bar;
    for (double& v : m.delta1) v = -v;
    for (double& v : m.delta2) v = -v;
    m.gamma1.resize(d);
    for (std::size_t c = 0; c < d; ++c) m.gamma1[c] = eig.values[order[c]];

    out.y_curvature = ct * raw.gamma2_bar.matrix() * out.transform;
    double off = 0.0;
    m.gamma2.resize(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            out.y_curvature(i, j) *= -0.5;
            if (i != j) off += out.y_curvature(i, j) * out.y_curvature(i, j);
        }
    for (std::size_t i = 0; i < d; ++i) m.gamma2[i] = out.y_curvature(i, i);
    out.y_offdiag_norm = std::sqrt(off);
    out.is_applicable = m.gamma1.back() > 0.0;
    return out;
}

std::pair<double, double> loss_from_z(const SimplifiedDeltaGamma& model, std::span<const double> z, double w) {
    if (!(w > 0.0)) throw DomainError("loss_from_z: shock w must be positive");
    if (z.size() != model.d) throw InvalidParameter("loss_from_z: driver vector has wrong length");
    double x = model.c1;
    double y = model.c2;
    const double inv_w = 1.0 / w;
    for (std::size_t j = 0; j < model.d; ++j) {
        const double s = z[j] * inv_w;
        x += model.delta1[j] * s + model.gamma1[j] * s * s;
        y += model.delta2[j] * s + model.gamma2[j] * s * s;
    }
    return {x, y};
}

double draw_shock(const TailSpec& tail, RngStream& stream) {
    if (tail.kind == TailKind::Normal) return 1.0;
    return std::sqrt(chi_squared(stream, tail.nu) / tail.nu);
}

LossSample sample_losses(const SimplifiedDeltaGamma& model, const TailSpec& tail, RngStream& stream, std::size_t n) {
    model.validate();
    tail.validate();
    if (n == 0) throw InvalidParameter("sample_losses: n must be positive");
    RngStream shocks = stream.fork(kShockTag);
    LossSample out;
    out.x.resize(n);
    out.y.resize(n);
    std::vector<double> z(model.d);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : z) v = std_normal(stream);
        const double w = draw_shock(tail, shocks);
        std::tie(out.x[i], out.y[i]) = loss_from_z(model, z, w);
    }
    return out;
}

Matrix random_correlation(std::span<const double> eigenvalues, RngStream& stream) {
    const std::size_t d = eigenvalues.size();
    if (d == 0) throw InvalidParameter("random_correlation: empty spectrum");
    double total = 0.0;
    for (double e : eigenvalues) {
        if (!(e >= 0.0)) throw InvalidParameter("random_correlation: eigenvalues must be non-negative");
        total += e;
    }
    if (std::fabs(total - static_cast<double>(d)) > 1e-8 * d)
        throw InvalidParameter("random_correlation: eigenvalues must sum to the dimension");

    // Haar-distributed orthogonal matrix: modified Gram-Schmidt on a
    // Gaussian matrix (positive R diagonal by construction).
    Matrix q(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) q(i, j) = std_normal(stream);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t p = 0; p < c; ++p) {
            double dot = 0.0;
            for (std::size_t r = 0; r < d; ++r) dot += q(r, p) * q(r, c);
            for (std::size_t r = 0; r < d; ++r) q(r, c) -= dot * q(r, p);
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < d; ++r) norm += q(r, c) * q(r, c);
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < d; ++r) q(r, c) /= norm;
    }

    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += q(i, k) * eigenvalues[k] * q(j, k);
            m(i, j) = s;
        }

    // Givens sweeps: rotate in the (i, j) plane so m(i,i) becomes 1,
    // pairing a diagonal above one with one below (or vice versa).
    constexpr double kDiagTol = 1e-12;
    for (std::size_t i = 0; i + 1 < d; ++i) {
        const double aii = m(i, i);
        if (std::fabs(aii - 1.0) <= kDiagTol) continue;
        std::size_t j = i + 1;
        for (; j < d; ++j) {
            const double ajj = m(j, j);
            if ((aii > 1.0 && ajj < 1.0) || (aii < 1.0 && ajj > 1.0)) break;
        }
        if (j == d) break;  // remaining diagonal already within tolerance of 1
        const double aiid = aii - 1.0;
        const double ajjd = m(j, j) - 1.0;
        const double aij = m(i, j);
        const double disc = std::sqrt(std::max(aij * aij - aiid * ajjd, 0.0));
        const double t = (aij + std::copysign(disc, aij)) / ajjd;
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        // New basis vector e_i' = c e_i - s e_j, e_j' = s e_i + c e_j.
        for (std::size_t k = 0; k < d; ++k) {
            const double mki = m(k, i);
            const double mkj = m(k, j);
            m(k, i) = c * mki - s * mkj;
            m(k, j) = s * mki + c * mkj;
        }
        for (std::size_t k = 0; k < d; ++k) {
            const double mik = m(i, k);
            const double mjk = m(j, k);
            m(i, k) = c * mik - s * mjk;
            m(j, k) = s * mik + c * mjk;
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        m(i, i) = 1.0;
        for (std::size_t j = i + 1; j < d; ++j) m(i, j) = m(j, i) = 0.5 * (m(i, j) + m(j, i));
    }
    return m;
}

RawDeltaGamma generate_raw_params(std::uint64_t seed) {
    constexpr std::size_t d = 50;
    const RngStream root(seed, 0);

    RawDeltaGamma raw;
    raw.d = d;
    raw.delta_t = 1.0;
    raw.theta1 = 0.0;
    raw.theta2 = 0.0;

    RngStream sd_stream = root.substream(1);
    std::vector<double> sd(d);
    for (double& v : sd) v = sd_stream.uniform01();
    std::sort(sd.begin(), sd.end());

    for (std::size_t attempt = 0;; ++attempt) {
        RngStream eig_stream = root.substream(100 + attempt);
        std::vector<double> e(d);
        for (std::size_t j = 0; j < d / 2; ++j) {
            e[j] = 2.0 * eig_stream.uniform01();
            e[d - 1 - j] = 2.0 - e[j];
        }
        const Matrix corr = random_correlation(e, eig_stream);
        Matrix sigma(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) sigma(i, j) = sd[i] * sd[j] * corr(i, j);
        SymMatrix sym(std::move(sigma));
        try {
            (void)cholesky(sym);
        } catch (const NotPositiveDefinite&) {
            if (attempt >= 64) throw;
            continue;
        }
        raw.sigma = std::move(sym);
        raw.generation_retries = attempt;
        break;
    }

    RngStream coef = root.substream(2);
    auto uniform_vec = [&](double lo, double hi) {
        std::vector<double> v(d);
        for (double& x : v) x = lo + (hi - lo) * coef.uniform01();
        return v;
    };
    auto curvature = [&](double half_width, std::initializer_list<std::pair<std::size_t, double>> pinned) {
        Matrix g(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) g(i, j) = -half_width + 2.0 * half_width * coef.uniform01();
        for (const auto& [k, value] : pinned) g(k, k) = value;
        return SymMatrix::symmetrized(g);
    };
    raw.delta1_bar = uniform_vec(-0.005, 0.005);
    raw.gamma1_bar = curvature(0.02, {{49, 0.8}});
    raw.delta2_bar = uniform_vec(-0.005, 0.005);
    raw.gamma2_bar = curvature(0.04, {{48, 0.1}, {49, 0.05}});
    return raw;
}

void write_model(std::ostream& os, const SimplifiedDeltaGamma& model) {
    model.validate();
    // Hand-rolled so every number carries 17 significant digits.
    auto vec = [&](const char* name, const std::vector<double>& v, bool last) {
        os << "  \"" << name << "\": [";
        char buf[40];
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", v[i]);
            os << (i ? ", " : "") << buf;
        }
        os << "]" << (last ? "\n" : ",\n");
    };
    char c1[40], c2[40];
    std::snprintf(c1, sizeof c1, "%.17g", model.c1);
    std::snprintf(c2, sizeof c2, "%.17g", model.c2);
    os << "{\n  \"d\": " << model.d << ",\n  \"c1\": " << c1 << ",\n  \"c2\": " << c2 << ",\n";
    vec("delta1", model.delta1, false);
    vec("gamma1", model.gamma1, false);
    vec("delta2", model.delta2, false);
    vec("gamma2", model.gamma2, true);
    os << "}\n";
}

SimplifiedDeltaGamma read_model(std::istream& is) {
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model file is not valid JSON: ") + e.what());
    }
    SimplifiedDeltaGamma m;
    try {
        m.d = j.at("d").get<std::size_t>();
        m.c1 = j.value("c1", 0.0);
        m.c2 = j.value("c2", 0.0);
        m.delta1 = j.at("delta1").get<std::vector<double>>();
        m.gamma1 = j.at("gamma1").get<std::vector<double>>();
        m.delta2 = j.at("delta2").get<std::vector<double>>();
        m.gamma2 = j.at("gamma2").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model file is missing a field: ") + e.what());
    }
    try {
        m.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("model file: ") + e.what());
    }
    return m;
}

SimplifiedDeltaGamma load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file " + path);
    return read_model(in);
}

void save_model_file(const std::string& path, const SimplifiedDeltaGamma& model) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file " + path);
    write_model(out, model);
}

}  // namespace covar
