#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ntkkan/errors.hpp"

namespace ntkkan {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double max_asymmetry(const Matrix& a) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = i + 1; j < a.cols(); ++j)
            m = std::max(m, std::abs(a(i, j) - a(j, i)));
    return m;
}

/// Dense symmetric eigensolver: Householder tridiagonalization followed by
/// implicit-shift QL, with accumulated transformations. Deterministic, sized
/// for the <=10^3 kernels this library produces.
class SymmetricEigenSolver {
public:
    /// Decompose a; throws NonSymmetric beyond `sym_tol`, NoConvergence past
    /// the QL iteration cap. Eigenvalues come out ascending in `values()`.
    explicit SymmetricEigenSolver(const Matrix& a, double sym_tol = 1e-10) {
        if (a.rows() != a.cols()) throw NonSymmetric("matrix is not square");
        const double asym = max_asymmetry(a);
        const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
        if (asym > sym_tol * scale) {
            throw NonSymmetric("matrix asymmetry " + std::to_string(asym) + " exceeds tolerance");
        }
        const int n = static_cast<int>(a.rows());
        z_ = (a + a.transpose()) * 0.5;
        d_.resize(n);
        std::vector<double> e(static_cast<std::size_t>(n), 0.0);
        tridiagonalize(e);
        ql_implicit(e);
        sort_ascending();
    }

    const Vector& values() const { return d_; }
    const Matrix& vectors() const { return z_; }  // column i pairs with values()[i]

private:
    void tridiagonalize(std::vector<double>& e) {
        const int n = static_cast<int>(d_.size());
        Matrix& a = z_;
        for (int i = n - 1; i >= 1; --i) {
            const int l = i - 1;
            double h = 0.0, scale = 0.0;
            if (l > 0) {
                for (int k = 0; k <= l; ++k) scale += std::abs(a(i, k));
                if (scale == 0.0) {
                    e[i] = a(i, l);
                } else {
                    for (int k = 0; k <= l; ++k) {
                        a(i, k) /= scale;
                        h += a(i, k) * a(i, k);
                    }
                    double f = a(i, l);
                    double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
                    e[i] = scale * g;
                    h -= f * g;
                    a(i, l) = f - g;
                    f = 0.0;
                    for (int j = 0; j <= l; ++j) {
                        a(j, i) = a(i, j) / h;
                        g = 0.0;
                        for (int k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
                        for (int k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
                        e[j] = g / h;
                        f += e[j] * a(i, j);
                    }
                    const double hh = f / (h + h);
                    for (int j = 0; j <= l; ++j) {
                        f = a(i, j);
                        g = e[j] - hh * f;
                        e[j] = g;
                        for (int k = 0; k <= j; ++k) a(j, k) -= f * e[k] + g * a(i, k);
                    }
                }
            } else {
                e[i] = a(i, l);
            }
            d_[i] = h;
        }
        d_[0] = 0.0;
        e[0] = 0.0;
        for (int i = 0; i < n; ++i) {
            const int l = i - 1;
            if (d_[i] != 0.0) {
                for (int j = 0; j <= l; ++j) {
                    double g = 0.0;
                    for (int k = 0; k <= l; ++k) g += a(i, k) * a(k, j);
                    for (int k = 0; k <= l; ++k) a(k, j) -= g * a(k, i);
                }
            }
            d_[i] = a(i, i);
            a(i, i) = 1.0;
            for (int j = 0; j <= l; ++j) a(j, i) = a(i, j) = 0.0;
        }
    }

    void ql_implicit(std::vector<double>& e) {
        const int n = static_cast<int>(d_.size());
        Matrix& z = z_;
        for (int i = 1; i < n; ++i) e[static_cast<std::size_t>(i) - 1] = e[static_cast<std::size_t>(i)];
        e[static_cast<std::size_t>(n) - 1] = 0.0;
        constexpr int kMaxIter = 60;
        for (int l = 0; l < n; ++l) {
            int iter = 0;
            int m;
            do {
                for (m = l; m < n - 1; ++m) {
                    const double dd = std::abs(d_[m]) + std::abs(d_[m + 1]);
                    if (std::abs(e[static_cast<std::size_t>(m)]) <=
                        std::numeric_limits<double>::epsilon() * dd)
                        break;
                }
                if (m != l) {
                    if (iter++ == kMaxIter) throw NoConvergence("QL iteration cap reached");
                    double g = (d_[l + 1] - d_[l]) / (2.0 * e[static_cast<std::size_t>(l)]);
                    double r = std::hypot(g, 1.0);
                    g = d_[m] - d_[l] +
                        e[static_cast<std::size_t>(l)] / (g + std::copysign(r, g));
                    double s = 1.0, c = 1.0, p = 0.0;
                    int i;
                    for (i = m - 1; i >= l; --i) {
                        double f = s * e[static_cast<std::size_t>(i)];
                        const double b = c * e[static_cast<std::size_t>(i)];
                        r = std::hypot(f, g);
                        e[static_cast<std::size_t>(i) + 1] = r;
                        if (r == 0.0) {
                            d_[i + 1] -= p;
                            e[static_cast<std::size_t>(m)] = 0.0;
                            break;
                        }
                        s = f / r;
                        c = g / r;
                        g = d_[i + 1] - p;
                        r = (d_[i] - g) * s + 2.0 * c * b;
                        p = s * r;
                        d_[i + 1] = g + p;
                        g = c * r - b;
                        for (int k = 0; k < n; ++k) {
                            f = z(k, i + 1);
                            z(k, i + 1) = s * z(k, i) + c * f;
                            z(k, i) = c * z(k, i) - s * f;
                        }
                    }
                    if (r == 0.0 && i >= l) continue;
                    d_[l] -= p;
                    e[static_cast<std::size_t>(l)] = g;
                    e[static_cast<std::size_t>(m)] = 0.0;
                }
            } while (m != l);
        }
    }

    void sort_ascending() {
        const int n = static_cast<int>(d_.size());
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return d_[a] < d_[b]; });
        Vector ds(n);
        Matrix zs(n, n);
        for (int i = 0; i < n; ++i) {
            ds[i] = d_[idx[static_cast<std::size_t>(i)]];
            zs.col(i) = z_.col(idx[static_cast<std::size_t>(i)]);
        }
        d_ = std::move(ds);
        z_ = std::move(zs);
    }

    Vector d_;
    Matrix z_;
};

} // namespace ntkkan
