#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "sde/rng.hpp"

namespace sde {

/// Dense real matrix, 64-bit entries, row-major flat storage.
/// Every arithmetic routine uses a fixed summation order (ascending inner
/// index) so results are bitwise reproducible across runs.
class Matrix {
public:
    Matrix() = default;

    /// Zero-filled m x n matrix. Throws DimensionError on zero dimensions.
    Matrix(std::size_t rows, std::size_t cols);

    /// Adopts a flat row-major buffer; size must equal rows*cols.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    bool all_finite() const noexcept;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Dense arithmetic. Shapes are checked; mismatches throw DimensionError.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix scale(const Matrix& a, double c);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// m x n matrix of i.i.d. N(0, sigma^2) draws, filled row-major.
/// sigma = 0 yields the zero matrix; sigma < 0 throws RangeError.
Matrix gaussian_matrix(Rng& rng, std::size_t m, std::size_t n, double sigma);

/// Haar-distributed n x n orthogonal matrix: Gram-Schmidt of a Gaussian
/// matrix with one reorthogonalization pass; the triangular factor's
/// diagonal is positive by construction.
Matrix random_orthogonal(Rng& rng, std::size_t n);

}  // namespace sde
