#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ntkkan/errors.hpp"

namespace ntkkan {

inline constexpr double kChebDomainTol = 1e-12;

/// Clamp x into [-1, 1] within the tolerance band, reject beyond it.
inline double cheb_clamp(double x) {
    if (std::abs(x) > 1.0 + kChebDomainTol) {
        throw DomainError("chebyshev input " + std::to_string(x) + " outside [-1,1]");
    }
    return std::clamp(x, -1.0, 1.0);
}

/// T_0..T_k at x via the three-term recurrence. The trigonometric form
/// cos(n*acos x) loses accuracy near the interval ends and is used only as a
/// test oracle.
inline void cheb_eval_all(int k, double x, double* out) {
    x = cheb_clamp(x);
    out[0] = 1.0;
    if (k >= 1) out[1] = x;
    for (int n = 2; n <= k; ++n) out[n] = 2.0 * x * out[n - 1] - out[n - 2];
}

inline std::vector<double> cheb_eval_all(int k, double x) {
    if (k < 0) throw ConfigError("chebyshev degree must be >= 0");
    std::vector<double> v(static_cast<std::size_t>(k) + 1);
    cheb_eval_all(k, x, v.data());
    return v;
}

/// T_0'..T_k' at x: T_n' = 2 T_{n-1} + 2 x T_{n-1}' - T_{n-2}'.
inline void cheb_deriv_all(int k, double x, double* out) {
    x = cheb_clamp(x);
    out[0] = 0.0;
    if (k >= 1) out[1] = 1.0;
    double tm2 = 1.0, tm1 = x;  // T_{n-2}, T_{n-1}
    for (int n = 2; n <= k; ++n) {
        out[n] = 2.0 * tm1 + 2.0 * x * out[n - 1] - out[n - 2];
        const double t = 2.0 * x * tm1 - tm2;
        tm2 = tm1;
        tm1 = t;
    }
}

inline std::vector<double> cheb_deriv_all(int k, double x) {
    if (k < 0) throw ConfigError("chebyshev degree must be >= 0");
    std::vector<double> v(static_cast<std::size_t>(k) + 1);
    cheb_deriv_all(k, x, v.data());
    return v;
}

/// silu path b(x) = x / (1 + e^{-x}).
inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_deriv(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

/// Uniform B-spline basis on [-1, 1]: grid_size intervals, polynomial order
/// (degree) `order`, end knots repeated so evaluation covers the whole span.
/// Basis count is grid_size + order; interior values form a partition of
/// unity.
struct BsplineBasis {
    int grid_size = 1;
    int order = 0;
    std::vector<double> knots;
    double silu_weight = 1.0;    // w_b default; trainable copies live per edge
    double spline_weight = 1.0;  // w_s
    bool shared_silu_weight = false;

    static BsplineBasis uniform(int grid_size, int order) {
        if (grid_size < 1) throw ConfigError("bspline grid_size must be >= 1");
        if (order < 0) throw ConfigError("bspline order must be >= 0");
        BsplineBasis b;
        b.grid_size = grid_size;
        b.order = order;
        const double h = 2.0 / grid_size;
        for (int i = 0; i < order; ++i) b.knots.push_back(-1.0);
        for (int i = 0; i <= grid_size; ++i) b.knots.push_back(-1.0 + h * i);
        for (int i = 0; i < order; ++i) b.knots.push_back(1.0);
        return b;
    }

    int count() const { return grid_size + order; }

    void validate() const {
        if (knots.empty()) throw ConfigError("bspline knot vector is empty");
        for (std::size_t i = 1; i < knots.size(); ++i) {
            if (knots[i] < knots[i - 1]) throw ConfigError("bspline knots must be ascending");
        }
    }
};

/// Cox–de Boor evaluation of all basis functions at x (clamped to the knot
/// span). out must hold basis.count() values.
inline void bspline_eval_all(const BsplineBasis& basis, double x, double* out) {
    basis.validate();
    const int p = basis.order;
    const int m = basis.count();
    const auto& t = basis.knots;
    x = std::clamp(x, t.front(), t.back());

    // Degree-0 indicators on the extended knot vector; zero-length spans at
    // the repeated ends stay zero. The last interval is closed on the right.
    const int nk = static_cast<int>(t.size());
    std::vector<double> b(static_cast<std::size_t>(nk) - 1, 0.0);
    for (int i = 0; i < nk - 1; ++i) {
        const bool last = (i == nk - 2) || t[i + 1] >= t.back();
        if ((x >= t[i] && x < t[i + 1]) || (last && t[i] < t[i + 1] && x >= t[i] && x <= t[i + 1])) {
            b[i] = 1.0;
            break;
        }
    }
    for (int d = 1; d <= p; ++d) {
        for (int i = 0; i + d + 1 < nk; ++i) {
            double v = 0.0;
            const double den1 = t[i + d] - t[i];
            const double den2 = t[i + d + 1] - t[i + 1];
            if (den1 > 0.0) v += (x - t[i]) / den1 * b[i];
            if (den2 > 0.0) v += (t[i + d + 1] - x) / den2 * b[i + 1];
            b[i] = v;
        }
    }
    for (int i = 0; i < m; ++i) out[i] = b[i];
}

inline std::vector<double> bspline_eval_all(const BsplineBasis& basis, double x) {
    std::vector<double> v(static_cast<std::size_t>(basis.count()));
    bspline_eval_all(basis, x, v.data());
    return v;
}

} // namespace ntkkan
