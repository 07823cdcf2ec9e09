#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "gridiv/errors.hpp"

namespace gridiv {

using Vector = std::vector<double>;

/// Dense row-major matrix. Holds the power-flow Jacobian and the KKT
/// Jacobian at desk scale; no sparsity.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool all_finite() const;

    /// A*x; throws DimensionMismatch.
    Vector apply(const Vector& x) const;
    /// A^T*x; throws DimensionMismatch.
    Vector apply_transpose(const Vector& x) const;

    static DenseMatrix identity(std::size_t n);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// LU factorization with partial pivoting, PA = LU, kept around so adjoint
/// solves can reuse it. A pivot below 1e-12 after pivoting raises
/// SingularMatrix.
class LuFactorization {
public:
    explicit LuFactorization(const DenseMatrix& a);

    std::size_t dim() const { return n_; }

    Vector solve(const Vector& b) const;
    /// Solves A^T x = b from the same factorization (used by the adjoint).
    Vector solve_transpose(const Vector& b) const;

    /// Reconstructs P*A from the packed factors (testing hook for the
    /// PA = LU invariant).
    DenseMatrix reconstruct_pa() const;
    const std::vector<std::size_t>& permutation() const { return perm_; }

private:
    std::size_t n_ = 0;
    DenseMatrix lu_;                  // packed L (unit diagonal implicit) and U
    std::vector<std::size_t> perm_;   // row i of PA is row perm_[i] of A
};

/// One-shot solve of A x = b. Partial pivoting; ||Ax - b||_inf stays within
/// 1e-10 * max(1, ||b||_inf) for well-conditioned systems.
Vector lu_solve(const DenseMatrix& a, const Vector& b);

using VectorFunction = std::function<Vector(const Vector&)>;

/// Central-difference Jacobian of f at x, step h * max(1, |x_j|) per
/// coordinate. Oracle for every analytic derivative in the project; keep it
/// independent of the code it checks.
DenseMatrix fd_jacobian(const VectorFunction& f, const Vector& x, double h = 1e-5);

/// Central second difference (f(x+h e_j) - 2 f(x) + f(x-h e_j)) / h^2 and the
/// mixed-difference analogue, for Hessian checks.
DenseMatrix fd_hessian_component(const VectorFunction& f, std::size_t component,
                                 const Vector& x, double h = 1e-4);

double infinity_norm(const Vector& v);
double two_norm(const Vector& v);

}  // namespace gridiv
