#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace covar {

/// Dense row-major matrix. Only what the delta-gamma reduction needs.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t d);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    [[nodiscard]] Matrix transpose() const;
    /// max_i sum_j |a_ij|
    [[nodiscard]] double norm_inf() const noexcept;
    [[nodiscard]] double max_abs() const noexcept;

    friend Matrix operator*(const Matrix& a, const Matrix& b);
    friend Matrix operator-(const Matrix& a, const Matrix& b);
    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::vector<double> operator*(const Matrix& a, std::span<const double> x);

/// Square matrix whose stored entries are exactly symmetric.
/// Construction throws InvalidParameter otherwise.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(Matrix m);

    /// (m + m^T) / 2, for inputs that are symmetric only up to roundoff.
    static SymMatrix symmetrized(const Matrix& m);

    [[nodiscard]] std::size_t dim() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
    [[nodiscard]] const Matrix& matrix() const noexcept { return m_; }

private:
    Matrix m_;
};

/// Lower-triangular L with L L^T = sigma. A pivot at or below
/// 1e-12 * max diagonal raises NotPositiveDefinite.
Matrix cholesky(const SymMatrix& sigma);

struct SymEigen {
    Matrix vectors;              // columns are eigenvectors
    std::vector<double> values;  // ascending
};

/// Cyclic Jacobi. Converged when the largest off-diagonal magnitude is at
/// most 1e-12 * ||A||_inf; more than 100 sweeps raises ConvergenceError.
SymEigen sym_eigen(const SymMatrix& a);

}  // namespace covar
