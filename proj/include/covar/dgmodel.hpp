#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "covar/linalg.hpp"
#include "covar/rng.hpp"

namespace covar {

/// Delta-gamma loss of two portfolios in terms of correlated factor moves
/// dS ~ N(0, sigma):
///   L_i = -theta_i * dt - delta_i_bar^T dS - 1/2 dS^T gamma_i_bar dS
struct RawDeltaGamma {
    std::size_t d = 0;
    double delta_t = 1.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    std::vector<double> delta1_bar;
    std::vector<double> delta2_bar;
    SymMatrix gamma1_bar;
    SymMatrix gamma2_bar;
    SymMatrix sigma;
    // Number of times the correlation eigenvalues were redrawn because
    // sigma came out numerically singular. Zero for hand-built models.
    std::size_t generation_retries = 0;

    void validate() const;
    /// Loss pair evaluated directly at a factor move.
    [[nodiscard]] std::pair<double, double> loss(std::span<const double> ds) const;
};

/// Diagonal quadratic losses in d independent standard normal drivers:
///   X = c1 + sum_j (delta1_j Z_j + gamma1_j Z_j^2), same for Y.
/// The last driver carries the largest X curvature.
struct SimplifiedDeltaGamma {
    std::size_t d = 0;
    double c1 = 0.0;
    double c2 = 0.0;
    std::vector<double> delta1;
    std::vector<double> gamma1;
    std::vector<double> delta2;
    std::vector<double> gamma2;

    /// Throws InvalidParameter on length mismatch, non-finite entries, or
    /// when gamma1's last entry is not its maximum.
    void validate() const;
    /// Returns a copy with (c2, delta2, gamma2) multiplied by a.
    [[nodiscard]] SimplifiedDeltaGamma scale_y(double a) const;
    /// Stable digest of the serialized coefficients.
    [[nodiscard]] std::uint64_t hash() const;

    friend bool operator==(const SimplifiedDeltaGamma&, const SimplifiedDeltaGamma&) = default;
};

enum class TailKind { Normal, StudentT };

struct TailSpec {
    TailKind kind = TailKind::Normal;
    std::uint32_t nu = 0;

    static TailSpec normal() { return {}; }
    static TailSpec student_t(std::uint32_t nu);
    void validate() const;
    [[nodiscard]] std::string label() const;
};

struct LossSample {
    std::vector<double> x;
    std::vector<double> y;

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
    void validate() const;
};

struct Simplification {
    SimplifiedDeltaGamma model;
    Matrix transform;    // C with C C^T = sigma; dS = C Z
    Matrix y_curvature;  // full -1/2 C^T gamma2_bar C, whose diagonal is gamma2
    double y_offdiag_norm = 0.0;
    bool is_applicable = true;  // false when every gamma1 <= 0
};

Simplification simplify(const RawDeltaGamma& raw);

/// (x, y) at drivers z and common shock w (w = 1 for normal factors).
std::pair<double, double> loss_from_z(const SimplifiedDeltaGamma& model, std::span<const double> z, double w = 1.0);

/// The common shock sqrt(chi2_nu / nu), or 1 for normal tails.
double draw_shock(const TailSpec& tail, RngStream& stream);

/// n i.i.d. loss pairs. Drivers come from `stream` in order; shocks for
/// Student-t tails come from a child stream forked at entry, so normal and
/// Student-t runs on equal streams share their drivers.
LossSample sample_losses(const SimplifiedDeltaGamma& model, const TailSpec& tail, RngStream& stream, std::size_t n);

/// Random 50-factor two-portfolio model: random correlation, exposures and curvatures.
RawDeltaGamma generate_raw_params(std::uint64_t seed);

/// Correlation matrix with the given spectrum: Haar rotation of diag(e)
/// followed by Givens sweeps that set each diagonal entry to one.
/// Eigenvalues must be non-negative and sum to their count.
Matrix random_correlation(std::span<const double> eigenvalues, RngStream& stream);

/// Embedded 50-dimensional simplified model (c1 = c2 = 0).
const SimplifiedDeltaGamma& fixture_model();

/// JSON document {d, c1, c2, delta1, gamma1, delta2, gamma2}.
void write_model(std::ostream& os, const SimplifiedDeltaGamma& model);
SimplifiedDeltaGamma read_model(std::istream& is);
SimplifiedDeltaGamma load_model_file(const std::string& path);
void save_model_file(const std::string& path, const SimplifiedDeltaGamma& model);

}  // namespace covar
