#include "covar/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "covar/error.hpp"

namespace covar {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw InvalidParameter("Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t d) {
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

double Matrix::norm_inf() const noexcept {
    double best = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (double v : row(i)) s += std::fabs(v);
        best = std::max(best, s);
    }
    return best;
}

double Matrix::max_abs() const noexcept {
    double best = 0.0;
    for (double v : data_) best = std::max(best, std::fabs(v));
    return best;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw InvalidParameter("Matrix product: dimension mismatch");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
        for (std::size_t k = 0; k < a.cols_; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw InvalidParameter("Matrix difference: dimension mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data_.size(); ++i) c.data_[i] -= b.data_[i];
    return c;
}

std::vector<double> operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw InvalidParameter("Matrix-vector product: dimension mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        y[i] = std::inner_product(r.begin(), r.end(), x.begin(), 0.0);
    }
    return y;
}

SymMatrix::SymMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw InvalidParameter("SymMatrix: matrix is not square");
    if (m_.rows() == 0) throw InvalidParameter("SymMatrix: dimension must be positive");
    for (std::size_t i = 0; i < m_.rows(); ++i)
        for (std::size_t j = i + 1; j < m_.cols(); ++j)
            if (m_(i, j) != m_(j, i))
                throw InvalidParameter("SymMatrix: entries (" + std::to_string(i) + "," + std::to_string(j) +
                                       ") and transpose differ");
}

SymMatrix SymMatrix::symmetrized(const Matrix& m) {
    if (m.rows() != m.cols()) throw InvalidParameter("SymMatrix: matrix is not square");
    Matrix s(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return SymMatrix(std::move(s));
}

Matrix cholesky(const SymMatrix& sigma) {
    const std::size_t d = sigma.dim();
    double max_diag = 0.0;
    for (std::size_t i = 0; i < d; ++i) max_diag = std::max(max_diag, sigma(i, i));
    const double tol = 1e-12 * max_diag;

    Matrix l(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        double pivot = sigma(j, j);
        for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
        if (!(pivot > tol))
            throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) + " is " + std::to_string(pivot) +
                                      ", matrix is not positive definite");
        const double ljj = std::sqrt(pivot);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < d; ++i) {
            double s = sigma(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

SymEigen sym_eigen(const SymMatrix& sym) {
    const std::size_t d = sym.dim();
    Matrix a = sym.matrix();
    Matrix v = Matrix::identity(d);
    const double tol = 1e-12 * a.norm_inf();

    auto max_offdiag = [&] {
        double m = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) m = std::max(m, std::fabs(a(i, j)));
        return m;
    };

    int sweeps = 0;
    while (max_offdiag() > tol) {
        if (++sweeps > 100) throw ConvergenceError("sym_eigen: Jacobi did not converge in 100 sweeps");
        for (std::size_t p = 0; p + 1 < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = a(p, k) = c * akp - s * akq;
                    a(k, q) = a(q, k) = s * akp + c * akq;
                }
                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    SymEigen out{Matrix(d, d), std::vector<double>(d)};
    for (std::size_t c = 0; c < d; ++c) {
        out.values[c] = a(order[c], order[c]);
        for (std::size_t r = 0; r < d; ++r) out.vectors(r, c) = v(r, order[c]);
    }
    return out;
}

}  // namespace covar
