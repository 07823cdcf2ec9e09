#include "gridiv/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gridiv {

namespace {
constexpr double kPivotFloor = 1e-12;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Vector DenseMatrix::apply(const Vector& x) const {
    if (x.size() != cols_)
        throw DimensionMismatch("apply: matrix is " + std::to_string(rows_) + "x" +
                                std::to_string(cols_) + ", vector has " + std::to_string(x.size()));
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        double acc = 0.0;
        const double* row = data_.data() + i * cols_;
        for (std::size_t j = 0; j < cols_; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

Vector DenseMatrix::apply_transpose(const Vector& x) const {
    if (x.size() != rows_)
        throw DimensionMismatch("apply_transpose: matrix is " + std::to_string(rows_) + "x" +
                                std::to_string(cols_) + ", vector has " + std::to_string(x.size()));
    Vector y(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        const double* row = data_.data() + i * cols_;
        for (std::size_t j = 0; j < cols_; ++j) y[j] += row[j] * x[i];
    }
    return y;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

LuFactorization::LuFactorization(const DenseMatrix& a) : n_(a.rows()), lu_(a), perm_(a.rows()) {
    if (a.rows() != a.cols())
        throw DimensionMismatch("lu: matrix is " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + ", expected square");
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});

    for (std::size_t k = 0; k < n_; ++k) {
        // partial pivoting: largest magnitude in column k at or below the diagonal
        std::size_t piv = k;
        double best = std::abs(lu_(k, k));
        for (std::size_t i = k + 1; i < n_; ++i) {
            const double mag = std::abs(lu_(i, k));
            if (mag > best) {
                best = mag;
                piv = i;
            }
        }
        if (best < kPivotFloor)
            throw SingularMatrix("lu: pivot " + std::to_string(best) + " below " +
                                 std::to_string(kPivotFloor) + " at column " + std::to_string(k));
        if (piv != k) {
            for (std::size_t j = 0; j < n_; ++j) std::swap(lu_(k, j), lu_(piv, j));
            std::swap(perm_[k], perm_[piv]);
        }
        const double inv_pivot = 1.0 / lu_(k, k);
        for (std::size_t i = k + 1; i < n_; ++i) {
            const double factor = lu_(i, k) * inv_pivot;
            lu_(i, k) = factor;
            if (factor == 0.0) continue;
            for (std::size_t j = k + 1; j < n_; ++j) lu_(i, j) -= factor * lu_(k, j);
        }
    }
}

Vector LuFactorization::solve(const Vector& b) const {
    if (b.size() != n_)
        throw DimensionMismatch("lu solve: dimension " + std::to_string(b.size()) + " != " +
                                std::to_string(n_));
    Vector x(n_);
    // forward substitution with permuted rhs, L has unit diagonal
    for (std::size_t i = 0; i < n_; ++i) {
        double acc = b[perm_[i]];
        for (std::size_t j = 0; j < i; ++j) acc -= lu_(i, j) * x[j];
        x[i] = acc;
    }
    for (std::size_t ii = n_; ii-- > 0;) {
        double acc = x[ii];
        for (std::size_t j = ii + 1; j < n_; ++j) acc -= lu_(ii, j) * x[j];
        x[ii] = acc / lu_(ii, ii);
    }
    return x;
}

Vector LuFactorization::solve_transpose(const Vector& b) const {
    if (b.size() != n_)
        throw DimensionMismatch("lu solve_transpose: dimension " + std::to_string(b.size()) +
                                " != " + std::to_string(n_));
    // A^T = (P^T L U)^T = U^T L^T P, so solve U^T y = b, L^T z = y, x = P^T z
    Vector y(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        double acc = b[i];
        for (std::size_t j = 0; j < i; ++j) acc -= lu_(j, i) * y[j];
        y[i] = acc / lu_(i, i);
    }
    for (std::size_t ii = n_; ii-- > 0;) {
        double acc = y[ii];
        for (std::size_t j = ii + 1; j < n_; ++j) acc -= lu_(j, ii) * y[j];
        y[ii] = acc;
    }
    Vector x(n_);
    for (std::size_t i = 0; i < n_; ++i) x[perm_[i]] = y[i];
    return x;
}

DenseMatrix LuFactorization::reconstruct_pa() const {
    DenseMatrix pa(n_, n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
            double acc = 0.0;
            const std::size_t upto = std::min(i, j);
            for (std::size_t k = 0; k <= upto; ++k) {
                const double l_ik = (k == i) ? 1.0 : lu_(i, k);
                if (k <= j) acc += l_ik * lu_(k, j);
            }
            pa(i, j) = acc;
        }
    }
    return pa;
}

Vector lu_solve(const DenseMatrix& a, const Vector& b) {
    if (a.rows() != b.size())
        throw DimensionMismatch("lu_solve: matrix is " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + ", rhs has " + std::to_string(b.size()));
    return LuFactorization(a).solve(b);
}

DenseMatrix fd_jacobian(const VectorFunction& f, const Vector& x, double h) {
    const std::size_t n = x.size();
    DenseMatrix jac;
    Vector xp = x;
    for (std::size_t j = 0; j < n; ++j) {
        const double hj = h * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + hj;
        const Vector fp = f(xp);
        xp[j] = x[j] - hj;
        const Vector fm = f(xp);
        xp[j] = x[j];
        if (fp.size() != fm.size())
            throw DimensionMismatch("fd_jacobian: f returned inconsistent sizes");
        if (jac.rows() == 0) jac = DenseMatrix(fp.size(), n, 0.0);
        for (std::size_t i = 0; i < fp.size(); ++i) {
            if (!std::isfinite(fp[i]) || !std::isfinite(fm[i]))
                throw NonFiniteEvaluation("fd_jacobian: non-finite f at coordinate " +
                                          std::to_string(j));
            jac(i, j) = (fp[i] - fm[i]) / (2.0 * hj);
        }
    }
    if (jac.rows() == 0) jac = DenseMatrix(f(x).size(), 0, 0.0);
    return jac;
}

DenseMatrix fd_hessian_component(const VectorFunction& f, std::size_t component, const Vector& x,
                                 double h) {
    const std::size_t n = x.size();
    DenseMatrix hess(n, n, 0.0);
    const auto eval = [&](const Vector& p) {
        const Vector v = f(p);
        if (component >= v.size())
            throw DimensionMismatch("fd_hessian_component: component out of range");
        if (!std::isfinite(v[component]))
            throw NonFiniteEvaluation("fd_hessian_component: non-finite evaluation");
        return v[component];
    };
    const double f0 = eval(x);
    Vector p = x;
    for (std::size_t i = 0; i < n; ++i) {
        const double hi = h * std::max(1.0, std::abs(x[i]));
        p[i] = x[i] + hi;
        const double fp = eval(p);
        p[i] = x[i] - hi;
        const double fm = eval(p);
        p[i] = x[i];
        hess(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double hj = h * std::max(1.0, std::abs(x[j]));
            p[i] = x[i] + hi;
            p[j] = x[j] + hj;
            const double fpp = eval(p);
            p[j] = x[j] - hj;
            const double fpm = eval(p);
            p[i] = x[i] - hi;
            const double fmm = eval(p);
            p[j] = x[j] + hj;
            const double fmp = eval(p);
            p[i] = x[i];
            p[j] = x[j];
            const double mixed = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            hess(i, j) = mixed;
            hess(j, i) = mixed;
        }
    }
    return hess;
}

double infinity_norm(const Vector& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
}

double two_norm(const Vector& v) {
    double acc = 0.0;
    for (double e : v) acc += e * e;
    return std::sqrt(acc);
}

}  // namespace gridiv
