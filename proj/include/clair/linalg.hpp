#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace clair {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<Vector>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    Vector column(std::size_t c) const;
    Matrix transposed() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct SvdResult {
    Matrix u;                      // rows x k, orthonormal columns
    std::vector<double> singular;  // k values, non-increasing, >= 0
    Matrix v;                      // cols x k, orthonormal columns
};

struct SvdOptions {
    double tolerance = 1e-12;
    int max_sweeps = 60;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);
double frobenius_norm(const Matrix& m);

/// Throws ZeroVector when the norm is at most 1e-12.
Vector l2_normalize(std::span<const double> v);

/// aᵀb / (‖a‖‖b‖) clamped to [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Max-subtracted softmax.
Vector softmax(std::span<const double> v);
double log_sum_exp(std::span<const double> v);

std::size_t argmax(std::span<const double> v);

Matrix matmul(const Matrix& a, const Matrix& b);
/// a · bᵀ, the common case for row-stored feature sets.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& m, std::span<const double> v);
Vector transposed_matvec(const Matrix& m, std::span<const double> v);

/// Normalizes every row in place; ZeroVector on any degenerate row.
void normalize_rows(Matrix& m);

/// One-sided Jacobi SVD. Largest-magnitude entry of each U column is positive.
SvdResult svd(const Matrix& m, const SvdOptions& options = {});

/// Orthonormalizes the columns of a tall (rows >= cols) matrix with two passes
/// of modified Gram-Schmidt; the implied R has a positive diagonal.
Matrix orthonormalize_columns(const Matrix& m);

double determinant(const Matrix& m);

} // namespace clair
