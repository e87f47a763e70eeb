#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ntkkan/errors.hpp"

namespace ntkkan {

inline constexpr int kMaxJetOrder = 4;

/// One differentiation direction: which input coordinate is seeded and the
/// chain-rule factor picked up from domain scaling (2/(b-a) per order).
struct SeedDirection {
    int coordinate_index = 0;
    double scale = 1.0;
};

/// Truncated Taylor expansion of a scalar along one seed direction, orders
/// 0..order (order <= 4). Each coefficient may carry a dense gradient with
/// respect to all trainable parameters; slot 0 is always the plain value.
class Jet {
public:
    Jet() : order_(0) { c_.fill(0.0); }

    explicit Jet(int order) : order_(check_order(order)) { c_.fill(0.0); }

    Jet(int order, std::size_t nparams) : order_(check_order(order)), nparams_(nparams) {
        c_.fill(0.0);
        g_.assign((static_cast<std::size_t>(order_) + 1) * nparams_, 0.0);
    }

    int order() const { return order_; }
    bool has_grads() const { return nparams_ > 0; }
    std::size_t nparams() const { return nparams_; }

    double& coeff(int n) { return c_[static_cast<std::size_t>(n)]; }
    double coeff(int n) const { return c_[static_cast<std::size_t>(n)]; }
    double value() const { return c_[0]; }

    double* grad_row(int n) { return g_.data() + static_cast<std::size_t>(n) * nparams_; }
    const double* grad_row(int n) const { return g_.data() + static_cast<std::size_t>(n) * nparams_; }

    static int check_order(int order) {
        if (order < 0 || order > kMaxJetOrder) {
            throw ConfigError("jet order " + std::to_string(order) + " outside [0," +
                              std::to_string(kMaxJetOrder) + "]");
        }
        return order;
    }

private:
    int order_;
    std::array<double, kMaxJetOrder + 1> c_;
    std::size_t nparams_ = 0;
    std::vector<double> g_;  // (order+1) x nparams, row-major by order
};

namespace detail {

inline void require_same_order(const Jet& a, const Jet& b) {
    if (a.order() != b.order()) {
        throw OrderMismatch("jet operands have orders " + std::to_string(a.order()) + " and " +
                            std::to_string(b.order()));
    }
}

inline std::size_t payload_size(const Jet& a, const Jet& b) {
    if (a.has_grads() && b.has_grads() && a.nparams() != b.nparams()) {
        throw OrderMismatch("jet payload sizes differ");
    }
    return a.has_grads() ? a.nparams() : b.nparams();
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

} // namespace detail

/// Lift a scalar: [value, scale, 0, ...] when seeded, [value, 0, ...] otherwise.
inline Jet jet_lift(double value, bool seeded, double scale, int order) {
    Jet j(order);
    j.coeff(0) = value;
    if (seeded && order >= 1) j.coeff(1) = scale;
    return j;
}

/// Lift input coordinate `coord`; seeded iff it matches the seed direction.
inline Jet jet_lift_coord(double value, int coord, const SeedDirection& seed, int order) {
    return jet_lift(value, coord == seed.coordinate_index, seed.scale, order);
}

inline Jet jet_constant(double value, int order) { return jet_lift(value, false, 0.0, order); }

/// Lift a trainable parameter with a one-hot gradient payload on slot 0.
inline Jet jet_param(double value, int order, std::size_t nparams, std::size_t index) {
    Jet j(order, nparams);
    j.coeff(0) = value;
    j.grad_row(0)[index] = 1.0;
    return j;
}

inline Jet jet_add(const Jet& a, const Jet& b) {
    detail::require_same_order(a, b);
    const std::size_t np = detail::payload_size(a, b);
    Jet r = np ? Jet(a.order(), np) : Jet(a.order());
    for (int n = 0; n <= a.order(); ++n) {
        r.coeff(n) = a.coeff(n) + b.coeff(n);
        if (np) {
            if (a.has_grads()) detail::axpy(1.0, a.grad_row(n), r.grad_row(n), np);
            if (b.has_grads()) detail::axpy(1.0, b.grad_row(n), r.grad_row(n), np);
        }
    }
    return r;
}

inline Jet jet_sub(const Jet& a, const Jet& b) {
    detail::require_same_order(a, b);
    const std::size_t np = detail::payload_size(a, b);
    Jet r = np ? Jet(a.order(), np) : Jet(a.order());
    for (int n = 0; n <= a.order(); ++n) {
        r.coeff(n) = a.coeff(n) - b.coeff(n);
        if (np) {
            if (a.has_grads()) detail::axpy(1.0, a.grad_row(n), r.grad_row(n), np);
            if (b.has_grads()) detail::axpy(-1.0, b.grad_row(n), r.grad_row(n), np);
        }
    }
    return r;
}

inline Jet jet_scale(const Jet& a, double c) {
    Jet r = a;
    for (int n = 0; n <= a.order(); ++n) {
        r.coeff(n) *= c;
        if (r.has_grads()) {
            double* g = r.grad_row(n);
            for (std::size_t i = 0; i < r.nparams(); ++i) g[i] *= c;
        }
    }
    return r;
}

/// Cauchy product truncated at the jet order; payloads follow the product rule.
inline Jet jet_mul(const Jet& a, const Jet& b) {
    detail::require_same_order(a, b);
    const std::size_t np = detail::payload_size(a, b);
    Jet r = np ? Jet(a.order(), np) : Jet(a.order());
    for (int n = 0; n <= a.order(); ++n) {
        double s = 0.0;
        for (int m = 0; m <= n; ++m) s += a.coeff(m) * b.coeff(n - m);
        r.coeff(n) = s;
        if (np) {
            double* g = r.grad_row(n);
            for (int m = 0; m <= n; ++m) {
                if (a.has_grads()) detail::axpy(b.coeff(n - m), a.grad_row(m), g, np);
                if (b.has_grads()) detail::axpy(a.coeff(m), b.grad_row(n - m), g, np);
            }
        }
    }
    return r;
}

/// tanh propagated through the truncated series via w = 1 - u^2:
///   u_0 = tanh(a_0),  u_c = (1/c) sum_{m=1..c} m a_m w_{c-m}.
inline Jet jet_tanh(const Jet& a) {
    const int J = a.order();
    const std::size_t np = a.nparams();
    Jet u = np ? Jet(J, np) : Jet(J);
    std::array<double, kMaxJetOrder + 1> w{};
    std::vector<double> wg;
    if (np) wg.assign((static_cast<std::size_t>(J) + 1) * np, 0.0);
    auto wgrow = [&](int n) { return wg.data() + static_cast<std::size_t>(n) * np; };

    u.coeff(0) = std::tanh(a.coeff(0));
    w[0] = 1.0 - u.coeff(0) * u.coeff(0);
    if (np) detail::axpy(w[0], a.grad_row(0), u.grad_row(0), np);
    if (np) detail::axpy(-2.0 * u.coeff(0), u.grad_row(0), wgrow(0), np);

    for (int c = 1; c <= J; ++c) {
        double s = 0.0;
        for (int m = 1; m <= c; ++m) s += m * a.coeff(m) * w[c - m];
        u.coeff(c) = s / c;
        if (np) {
            double* g = u.grad_row(c);
            for (int m = 1; m <= c; ++m) {
                detail::axpy(static_cast<double>(m) / c * w[c - m], a.grad_row(m), g, np);
                detail::axpy(static_cast<double>(m) / c * a.coeff(m), wgrow(c - m), g, np);
            }
        }
        if (c < J) {
            double s2 = 0.0;
            for (int i = 0; i <= c; ++i) s2 += u.coeff(i) * u.coeff(c - i);
            w[c] = -s2;
            if (np) {
                double* g = wgrow(c);
                for (int i = 0; i <= c; ++i) detail::axpy(-2.0 * u.coeff(c - i), u.grad_row(i), g, np);
            }
        }
    }
    return u;
}

/// exp via e_c = (1/c) sum m a_m e_{c-m}. No payload support (probe use only).
inline Jet jet_exp(const Jet& a) {
    Jet e(a.order());
    e.coeff(0) = std::exp(a.coeff(0));
    for (int c = 1; c <= a.order(); ++c) {
        double s = 0.0;
        for (int m = 1; m <= c; ++m) s += m * a.coeff(m) * e.coeff(c - m);
        e.coeff(c) = s / c;
    }
    return e;
}

/// sin/cos share the coupled recurrence; probe use only.
inline void jet_sincos(const Jet& a, Jet& s, Jet& c) {
    const int J = a.order();
    s = Jet(J);
    c = Jet(J);
    s.coeff(0) = std::sin(a.coeff(0));
    c.coeff(0) = std::cos(a.coeff(0));
    for (int n = 1; n <= J; ++n) {
        double ss = 0.0, cc = 0.0;
        for (int m = 1; m <= n; ++m) {
            ss += m * a.coeff(m) * c.coeff(n - m);
            cc += m * a.coeff(m) * s.coeff(n - m);
        }
        s.coeff(n) = ss / n;
        c.coeff(n) = -cc / n;
    }
}

inline Jet jet_sin(const Jet& a) {
    Jet s, c;
    jet_sincos(a, s, c);
    return s;
}

inline Jet jet_cos(const Jet& a) {
    Jet s, c;
    jet_sincos(a, s, c);
    return c;
}

inline Jet operator+(const Jet& a, const Jet& b) { return jet_add(a, b); }
inline Jet operator-(const Jet& a, const Jet& b) { return jet_sub(a, b); }
inline Jet operator*(const Jet& a, const Jet& b) { return jet_mul(a, b); }
inline Jet operator*(double c, const Jet& a) { return jet_scale(a, c); }

/// n-th derivative (not the Taylor coefficient): n! * coeff(n).
inline double derivative_of(const Jet& jet, int n) {
    if (n < 0 || n > jet.order()) {
        throw OrderMismatch("derivative order " + std::to_string(n) + " exceeds jet order " +
                            std::to_string(jet.order()));
    }
    static constexpr double factorial[] = {1.0, 1.0, 2.0, 6.0, 24.0};
    return factorial[n] * jet.coeff(n);
}

/// Gradient of the n-th derivative with respect to the parameters.
inline std::vector<double> param_gradient(const Jet& jet, int n) {
    if (n < 0 || n > jet.order()) {
        throw OrderMismatch("gradient order " + std::to_string(n) + " exceeds jet order " +
                            std::to_string(jet.order()));
    }
    if (!jet.has_grads()) throw PayloadMissing("jet carries no parameter-gradient payload");
    static constexpr double factorial[] = {1.0, 1.0, 2.0, 6.0, 24.0};
    std::vector<double> g(jet.grad_row(n), jet.grad_row(n) + jet.nparams());
    for (double& v : g) v *= factorial[n];
    return g;
}

} // namespace ntkkan
