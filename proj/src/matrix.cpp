#include "sde/matrix.hpp"

#include <cmath>

#include "sde/errors.hpp"

namespace sde {

namespace {

void require_valid_dims(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("matrix dimensions must be at least 1x1, got " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    require_valid_dims(rows, cols);
    data_.assign(rows * cols, 0.0);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require_valid_dims(rows, cols);
    if (data_.size() != rows * cols) {
        throw DimensionError("flat buffer size " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) throw DimensionError("from_rows needs at least one row");
    const std::size_t cols = rows.begin()->size();
    Matrix m(rows.size(), cols);
    std::size_t i = 0;
    for (const auto& r : rows) {
        if (r.size() != cols) throw DimensionError("ragged rows in from_rows");
        std::size_t j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

bool Matrix::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul shape mismatch: " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                             "x" + std::to_string(b.cols()));
    }
    Matrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    // i-k-j order: cache friendly and each c(i,j) accumulates in ascending k.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.data().data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* bk = b.data().data() + k * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix scale(const Matrix& a, double c) {
    Matrix s = a;
    for (double& v : s.data()) v *= c;
    return s;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("add shape mismatch");
    }
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("sub shape mismatch");
    }
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

double frobenius_norm(const Matrix& a) {
    double sum = 0.0;
    for (double v : a.data()) sum += v * v;
    return std::sqrt(sum);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Matrix gaussian_matrix(Rng& rng, std::size_t m, std::size_t n, double sigma) {
    require_valid_dims(m, n);
    if (sigma < 0.0) throw RangeError("gaussian_matrix sigma must be >= 0");
    Matrix f(m, n);
    for (double& v : f.data()) v = sigma * rng.normal();
    return f;
}

Matrix random_orthogonal(Rng& rng, std::size_t n) {
    Matrix a = gaussian_matrix(rng, n, n, 1.0);
    // Columns of `a`, orthonormalized in place; work column-major for
    // contiguous access.
    Matrix cols = transpose(a);
    for (std::size_t j = 0; j < n; ++j) {
        auto vj = cols.row(j);
        // Two Gram-Schmidt passes against the already finished columns.
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < j; ++i) {
                auto qi = cols.row(i);
                const double proj = dot(qi, vj);
                for (std::size_t t = 0; t < n; ++t) vj[t] -= proj * qi[t];
            }
        }
        const double r = norm2(vj);
        if (!(r > 1e-300)) {
            throw NumericError("random_orthogonal: numerically dependent Gaussian columns");
        }
        for (std::size_t t = 0; t < n; ++t) vj[t] /= r;
    }
    return transpose(cols);
}

}  // namespace sde
