#include "clair/linalg.hpp"

#include "clair/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace clair {

namespace {

constexpr double kZeroNorm = 1e-12;

void require_same_size(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) {
        fail(ErrorKind::DimensionMismatch,
             std::string(what) + ": " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        fail(ErrorKind::ShapeMismatch, "matrix data length does not match rows*cols");
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) fail(ErrorKind::ShapeMismatch, "ragged rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

Vector Matrix::column(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_size(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double frobenius_norm(const Matrix& m) { return norm(m.data()); }

Vector l2_normalize(std::span<const double> v) {
    const double n = norm(v);
    if (!(n > kZeroNorm)) fail(ErrorKind::ZeroVector, "cannot normalize a vector with norm " + std::to_string(n));
    Vector out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    require_same_size(a, b, "cosine_similarity");
    const double na = norm(a);
    const double nb = norm(b);
    if (!(na > kZeroNorm) || !(nb > kZeroNorm)) fail(ErrorKind::ZeroVector, "cosine similarity of a zero vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vector softmax(std::span<const double> v) {
    Vector out(v.size());
    if (v.empty()) return out;
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - mx);
    return mx + std::log(sum);
}

std::size_t argmax(std::span<const double> v) {
    // first maximum wins, so ties resolve to the lowest index
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) fail(ErrorKind::ShapeMismatch, "matmul inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) fail(ErrorKind::ShapeMismatch, "matmul_transposed column counts differ");
    Matrix out(a.rows(), b.rows());
    const std::size_t d = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i).data();
        double* oi = out.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row(j).data();
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += ai[k] * bj[k];
            oi[j] = s;
        }
    }
    return out;
}

Vector matvec(const Matrix& m, std::span<const double> v) {
    if (m.cols() != v.size()) fail(ErrorKind::DimensionMismatch, "matvec dimension mismatch");
    Vector out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double* mr = m.row(r).data();
        double s = 0.0;
        for (std::size_t c = 0; c < v.size(); ++c) s += mr[c] * v[c];
        out[r] = s;
    }
    return out;
}

Vector transposed_matvec(const Matrix& m, std::span<const double> v) {
    if (m.rows() != v.size()) fail(ErrorKind::DimensionMismatch, "transposed_matvec dimension mismatch");
    Vector out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double vr = v[r];
        if (vr == 0.0) continue;
        const double* mr = m.row(r).data();
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += mr[c] * vr;
    }
    return out;
}

void normalize_rows(Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        const Vector unit = l2_normalize(row);
        std::copy(unit.begin(), unit.end(), row.begin());
    }
}

namespace {

// Tall case (rows >= cols). Columns of `a` are rotated until mutually
// orthogonal; the accumulated rotations form V.
SvdResult jacobi_tall(const Matrix& m, const SvdOptions& options) {
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    // column-major working copies so rotations touch contiguous memory
    std::vector<Vector> a(cols, Vector(rows));
    std::vector<Vector> v(cols, Vector(cols, 0.0));
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) a[c][r] = m(r, c);
        v[c][c] = 1.0;
    }
    const double fro2 = std::max(dot(m.data(), m.data()), std::numeric_limits<double>::min());
    const double negligible = fro2 * 1e-26;

    bool converged = cols < 2;
    for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                const double alpha = dot(a[p], a[p]);
                const double beta = dot(a[q], a[q]);
                if (alpha <= negligible || beta <= negligible) continue;
                const double gamma = dot(a[p], a[q]);
                const double rel = std::abs(gamma) / std::sqrt(alpha * beta);
                off = std::max(off, rel);
                if (rel <= std::numeric_limits<double>::epsilon()) continue;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < rows; ++i) {
                    const double ap = a[p][i];
                    const double aq = a[q][i];
                    a[p][i] = c * ap - s * aq;
                    a[q][i] = s * ap + c * aq;
                }
                for (std::size_t i = 0; i < cols; ++i) {
                    const double vp = v[p][i];
                    const double vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        converged = off < options.tolerance;
    }
    if (!converged) {
        fail(ErrorKind::NoConvergence,
             "one-sided Jacobi did not converge within " + std::to_string(options.max_sweeps) + " sweeps");
    }

    std::vector<double> sigma(cols);
    for (std::size_t c = 0; c < cols; ++c) sigma[c] = norm(a[c]);
    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    SvdResult out{Matrix(rows, cols), std::vector<double>(cols), Matrix(cols, cols)};
    const double smax = cols > 0 ? sigma[order[0]] : 0.0;
    // Columns below the rotation cutoff were never orthogonalized, so they count as null too.
    const double rank_tol = std::max(smax * static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon(),
                                     std::sqrt(negligible));

    std::vector<Vector> ucols;
    ucols.reserve(cols);
    std::vector<bool> needs_completion(cols, false);
    for (std::size_t k = 0; k < cols; ++k) {
        const std::size_t src = order[k];
        out.singular[k] = sigma[src];
        Vector u = a[src];
        if (sigma[src] > rank_tol && sigma[src] > 0.0) {
            for (double& x : u) x /= sigma[src];
        } else {
            needs_completion[k] = true;
        }
        ucols.push_back(std::move(u));
        for (std::size_t i = 0; i < cols; ++i) out.v(i, k) = v[src][i];
    }

    // Null-space columns of U: at each step take the standard basis vector with the
    // largest residual against the columns fixed so far.
    std::vector<bool> fixed(cols);
    for (std::size_t k = 0; k < cols; ++k) fixed[k] = !needs_completion[k];
    for (std::size_t k = 0; k < cols; ++k) {
        if (!needs_completion[k]) continue;
        Vector best;
        double best_norm = 0.0;
        for (std::size_t basis = 0; basis < rows; ++basis) {
            Vector e(rows, 0.0);
            e[basis] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t j = 0; j < cols; ++j) {
                    if (!fixed[j]) continue;
                    const double proj = dot(e, ucols[j]);
                    for (std::size_t i = 0; i < rows; ++i) e[i] -= proj * ucols[j][i];
                }
            }
            const double en = norm(e);
            if (en > best_norm) {
                best_norm = en;
                best = std::move(e);
            }
        }
        if (best_norm < 1e-3) fail(ErrorKind::NoConvergence, "could not complete orthonormal U basis");
        for (double& x : best) x /= best_norm;
        ucols[k] = std::move(best);
        fixed[k] = true;
    }

    for (std::size_t k = 0; k < cols; ++k) {
        const auto& u = ucols[k];
        std::size_t big = 0;
        for (std::size_t i = 1; i < rows; ++i)
            if (std::abs(u[i]) > std::abs(u[big])) big = i;
        const double sign = u[big] < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < rows; ++i) out.u(i, k) = sign * u[i];
        if (sign < 0.0)
            for (std::size_t i = 0; i < cols; ++i) out.v(i, k) = -out.v(i, k);
    }
    return out;
}

} // namespace

SvdResult svd(const Matrix& m, const SvdOptions& options) {
    if (m.rows() == 0 || m.cols() == 0) fail(ErrorKind::ShapeMismatch, "svd of an empty matrix");
    for (double x : m.data())
        if (!std::isfinite(x)) fail(ErrorKind::NonFinite, "svd input contains non-finite values");
    if (m.rows() >= m.cols()) return jacobi_tall(m, options);

    // Wide: factor the transpose and swap roles, then restore the U sign rule.
    SvdResult t = jacobi_tall(m.transposed(), options);
    SvdResult out{std::move(t.v), std::move(t.singular), std::move(t.u)};
    for (std::size_t k = 0; k < out.u.cols(); ++k) {
        std::size_t big = 0;
        for (std::size_t i = 1; i < out.u.rows(); ++i)
            if (std::abs(out.u(i, k)) > std::abs(out.u(big, k))) big = i;
        if (out.u(big, k) < 0.0) {
            for (std::size_t i = 0; i < out.u.rows(); ++i) out.u(i, k) = -out.u(i, k);
            for (std::size_t i = 0; i < out.v.rows(); ++i) out.v(i, k) = -out.v(i, k);
        }
    }
    return out;
}

Matrix orthonormalize_columns(const Matrix& m) {
    if (m.rows() < m.cols()) fail(ErrorKind::ShapeMismatch, "orthonormalize_columns needs rows >= cols");
    std::vector<Vector> cols(m.cols());
    for (std::size_t c = 0; c < m.cols(); ++c) cols[c] = m.column(c);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < c; ++j) {
                const double proj = dot(cols[c], cols[j]);
                for (std::size_t i = 0; i < m.rows(); ++i) cols[c][i] -= proj * cols[j][i];
            }
        }
        cols[c] = l2_normalize(cols[c]);
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < m.rows(); ++r) out(r, c) = cols[c][r];
    return out;
}

double determinant(const Matrix& m) {
    if (m.rows() != m.cols()) fail(ErrorKind::ShapeMismatch, "determinant of a non-square matrix");
    const std::size_t n = m.rows();
    Matrix lu = m;
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
        if (lu(piv, k) == 0.0) return 0.0;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
            det = -det;
        }
        det *= lu(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = lu(i, k) / lu(k, k);
            for (std::size_t j = k; j < n; ++j) lu(i, j) -= f * lu(k, j);
        }
    }
    return det;
}

} // namespace clair
