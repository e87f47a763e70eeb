#pragma once

#include <cmath>
#include <memory>
#include <mutex>

#include "ntkkan/pde.hpp"

namespace ntkkan {

// ---------------------------------------------------------------------------
// diffusion1d:  u_t - D u_xx = 0 on [-6,6] x (0,1],
//               u(+-6,t) = 0, u(x,0) = sin(pi x),  D = 0.1
//               exact u = sin(pi x) exp(-pi^2 D t)
// ---------------------------------------------------------------------------
inline PdeProblem make_diffusion(double diffusivity = 0.1) {
    PdeProblem p;
    p.name = "diffusion1d";
    p.domain.dims = {{-6.0, 6.0, false}, {0.0, 1.0, true}};
    p.scaling = ScalingMap(p.domain);
    p.coefficients = {{"D", diffusivity}};

    p.residual_spec.seeds = {{1, 1}, {0, 2}};  // t-pass order 1, x-pass order 2
    p.residual_spec.linear_terms = {{0, 1, 1.0}, {1, 2, -diffusivity}};
    p.source = [](const std::vector<double>&) { return 0.0; };

    auto ic = [](const std::vector<double>& x) { return std::sin(kPi * x[0]); };
    p.conditions.push_back({"u", GroupOp::Value, 1, 0.0, "ic", 1.0, ic});
    p.conditions.push_back({"u", GroupOp::Value, 0, -6.0, "bc_left", 1.0,
                            [](const std::vector<double>&) { return 0.0; }});
    p.conditions.push_back({"u", GroupOp::Value, 0, 6.0, "bc_right", 1.0,
                            [](const std::vector<double>&) { return 0.0; }});

    const double D = diffusivity;
    p.exact = [D](const std::vector<double>& x) {
        return std::sin(kPi * x[0]) * std::exp(-kPi * kPi * D * x[1]);
    };
    p.exact_probe = [D](const std::vector<double>& x, int dim, int order) {
        Jet xx = jet_lift_coord(x[0], 0, SeedDirection{dim, 1.0}, order);
        Jet tt = jet_lift_coord(x[1], 1, SeedDirection{dim, 1.0}, order);
        return jet_sin(jet_scale(xx, kPi)) * jet_exp(jet_scale(tt, -kPi * kPi * D));
    };
    return p;
}

// ---------------------------------------------------------------------------
// helmholtz2d:  u_xx + u_yy + kappa^2 u = f on [-4,4]^2, u = 0 on the boundary
//               f = (kappa^2 - (a1^2+a2^2) pi^2) sin(a1 pi x) sin(a2 pi y)
//               exact u = sin(a1 pi x) sin(a2 pi y)
// ---------------------------------------------------------------------------
inline PdeProblem make_helmholtz(double a1 = 1.0, double a2 = 1.0, double kappa = 1.0) {
    PdeProblem p;
    p.name = "helmholtz2d";
    p.domain.dims = {{-4.0, 4.0, false}, {-4.0, 4.0, false}};
    p.scaling = ScalingMap(p.domain);
    p.coefficients = {{"a1", a1}, {"a2", a2}, {"kappa", kappa}};

    p.residual_spec.seeds = {{0, 2}, {1, 2}};
    p.residual_spec.linear_terms = {{0, 2, 1.0}, {1, 2, 1.0}, {0, 0, kappa * kappa}};
    p.source = [=](const std::vector<double>& x) {
        return (kappa * kappa - (a1 * a1 + a2 * a2) * kPi * kPi) * std::sin(a1 * kPi * x[0]) *
               std::sin(a2 * kPi * x[1]);
    };

    auto zero = [](const std::vector<double>&) { return 0.0; };
    p.conditions.push_back({"u", GroupOp::Value, 0, -4.0, "bc_x0", 1.0, zero});
    p.conditions.push_back({"u", GroupOp::Value, 0, 4.0, "bc_x1", 1.0, zero});
    p.conditions.push_back({"u", GroupOp::Value, 1, -4.0, "bc_y0", 1.0, zero});
    p.conditions.push_back({"u", GroupOp::Value, 1, 4.0, "bc_y1", 1.0, zero});

    p.exact = [=](const std::vector<double>& x) {
        return std::sin(a1 * kPi * x[0]) * std::sin(a2 * kPi * x[1]);
    };
    p.exact_probe = [=](const std::vector<double>& x, int dim, int order) {
        Jet xx = jet_lift_coord(x[0], 0, SeedDirection{dim, 1.0}, order);
        Jet yy = jet_lift_coord(x[1], 1, SeedDirection{dim, 1.0}, order);
        return jet_sin(jet_scale(xx, a1 * kPi)) * jet_sin(jet_scale(yy, a2 * kPi));
    };
    return p;
}

// ---------------------------------------------------------------------------
// allen_cahn1d:  u_t - D u_xx + 5(u^3 - u) = 0 on [-6,6] x (0,1]
//                u(+-6,t) = -1, u(x,0) = (x/6)^2 cos(pi x / 6),  D = 1e-4
// No closed form; the bundled reference integrates the equation on a fine
// space-time grid (fourth-order stencil in x, RK4 in t) and interpolates.
// ---------------------------------------------------------------------------
class AllenCahnReference {
public:
    AllenCahnReference(double diffusivity, double t_end, int nx = 8193, double dt = 5e-4)
        : D_(diffusivity), t_end_(t_end), nx_(nx), dt_(dt) {}

    double eval(double x, double t) const {
        std::call_once(built_, [this] { build(); });
        const double dx = 12.0 / (nx_ - 1);
        const double ss = (x + 6.0) / dx;
        const int i0 = std::clamp(static_cast<int>(ss), 0, nx_ - 2);
        const double fx = ss - i0;
        const double ts = std::clamp(t, 0.0, t_end_) / t_out_;
        const int j0 = std::clamp(static_cast<int>(ts), 0, static_cast<int>(slices_.size()) - 2);
        const double ft = ts - j0;
        auto at = [&](int j, int i) { return slices_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]; };
        const double a = at(j0, i0) * (1 - fx) + at(j0, i0 + 1) * fx;
        const double b = at(j0 + 1, i0) * (1 - fx) + at(j0 + 1, i0 + 1) * fx;
        return a * (1 - ft) + b * ft;
    }

private:
    void build() const {
        const double dx = 12.0 / (nx_ - 1);
        std::vector<double> u(static_cast<std::size_t>(nx_));
        for (int i = 0; i < nx_; ++i) {
            const double x = -6.0 + i * dx;
            u[static_cast<std::size_t>(i)] = (x / 6.0) * (x / 6.0) * std::cos(kPi * x / 6.0);
        }
        u.front() = -1.0;
        u.back() = -1.0;
        const int steps = static_cast<int>(std::round(t_end_ / dt_));
        const int out_every = std::max(1, steps / 200);
        t_out_ = dt_ * out_every;
        slices_.push_back(u);
        std::vector<double> k1(u.size()), k2(u.size()), k3(u.size()), k4(u.size()), tmp(u.size());
        auto rhs = [&](const std::vector<double>& v, std::vector<double>& out) {
            const double c2 = D_ / (dx * dx);
            out.front() = 0.0;
            out.back() = 0.0;
            for (int i = 1; i < nx_ - 1; ++i) {
                double lap;
                if (i >= 2 && i <= nx_ - 3) {
                    lap = (-v[static_cast<std::size_t>(i) - 2] + 16 * v[static_cast<std::size_t>(i) - 1] -
                           30 * v[static_cast<std::size_t>(i)] + 16 * v[static_cast<std::size_t>(i) + 1] -
                           v[static_cast<std::size_t>(i) + 2]) /
                          12.0;
                } else {
                    lap = v[static_cast<std::size_t>(i) - 1] - 2 * v[static_cast<std::size_t>(i)] +
                          v[static_cast<std::size_t>(i) + 1];
                }
                const double ui = v[static_cast<std::size_t>(i)];
                out[static_cast<std::size_t>(i)] = c2 * lap - 5.0 * (ui * ui * ui - ui);
            }
        };
        for (int s = 1; s <= steps; ++s) {
            rhs(u, k1);
            for (std::size_t i = 0; i < u.size(); ++i) tmp[i] = u[i] + 0.5 * dt_ * k1[i];
            rhs(tmp, k2);
            for (std::size_t i = 0; i < u.size(); ++i) tmp[i] = u[i] + 0.5 * dt_ * k2[i];
            rhs(tmp, k3);
            for (std::size_t i = 0; i < u.size(); ++i) tmp[i] = u[i] + dt_ * k3[i];
            rhs(tmp, k4);
            for (std::size_t i = 0; i < u.size(); ++i)
                u[i] += dt_ / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
            u.front() = -1.0;
            u.back() = -1.0;
            if (s % out_every == 0) slices_.push_back(u);
        }
        while (t_out_ * (slices_.size() - 1) < t_end_ - 1e-12) slices_.push_back(u);
    }

    double D_, t_end_;
    int nx_;
    double dt_;
    mutable std::once_flag built_;
    mutable std::vector<std::vector<double>> slices_;
    mutable double t_out_ = 1.0;
};

inline PdeProblem make_allen_cahn(double diffusivity = 1e-4) {
    PdeProblem p;
    p.name = "allen_cahn1d";
    p.domain.dims = {{-6.0, 6.0, false}, {0.0, 1.0, true}};
    p.scaling = ScalingMap(p.domain);
    p.coefficients = {{"D", diffusivity}};

    p.residual_spec.seeds = {{1, 1}, {0, 2}};
    p.residual_spec.linear_terms = {{0, 1, 1.0}, {1, 2, -diffusivity}};
    p.residual_spec.nonlinear = [](double u) { return 5.0 * (u * u * u - u); };
    p.residual_spec.nonlinear_deriv = [](double u) { return 15.0 * u * u - 5.0; };
    p.source = [](const std::vector<double>&) { return 0.0; };

    auto ic = [](const std::vector<double>& x) {
        return (x[0] / 6.0) * (x[0] / 6.0) * std::cos(kPi * x[0] / 6.0);
    };
    auto minus_one = [](const std::vector<double>&) { return -1.0; };
    p.conditions.push_back({"u", GroupOp::Value, 1, 0.0, "ic", 1.0, ic});
    p.conditions.push_back({"u", GroupOp::Value, 0, -6.0, "bc_left", 1.0, minus_one});
    p.conditions.push_back({"u", GroupOp::Value, 0, 6.0, "bc_right", 1.0, minus_one});

    auto ref = std::make_shared<AllenCahnReference>(diffusivity, 1.0);
    p.exact = [ref](const std::vector<double>& x) { return ref->eval(x[0], x[1]); };
    return p;
}

// ---------------------------------------------------------------------------
// beam_vibration:  D_f u_xxxx + c_d u_t + rho_l u_tt = p(x,t)
//                  on (0,l) x (0,T], simply supported, at rest initially,
//                  p = P sin(pi x / l) cos(2 pi f t)
// The sine load excites only the first mode, so the exact field is
// u = q(t) sin(pi x / l) with q solving the damped forced oscillator in
// closed form.
// ---------------------------------------------------------------------------
struct BeamParams {
    double length = 1.0;
    double rho_l = 1.0;
    double flexural = 2.0;  // D_f
    double damping = 3.0;   // c_d
    double amplitude = 0.1; // P
    double freq = 2.7;      // f (Hz)
    double t_end = 10.0;    // T
};

struct BeamModalSolution {
    double A, B, C1, C2, zeta, nu, omega, klam;
    double length;

    explicit BeamModalSolution(const BeamParams& bp) : length(bp.length) {
        omega = 2.0 * kPi * bp.freq;
        klam = bp.flexural * std::pow(kPi / bp.length, 4);
        const double det = (klam - bp.rho_l * omega * omega) * (klam - bp.rho_l * omega * omega) +
                           bp.damping * omega * bp.damping * omega;
        A = bp.amplitude * (klam - bp.rho_l * omega * omega) / det;
        B = bp.amplitude * bp.damping * omega / det;
        zeta = bp.damping / (2.0 * bp.rho_l);
        const double disc = 4.0 * bp.rho_l * klam - bp.damping * bp.damping;
        if (disc <= 0.0) throw ConfigError("beam parameters must be underdamped");
        nu = std::sqrt(disc) / (2.0 * bp.rho_l);
        C1 = -A;
        C2 = -(B * omega + zeta * A) / nu;
    }

    double q(double t) const {
        return A * std::cos(omega * t) + B * std::sin(omega * t) +
               std::exp(-zeta * t) * (C1 * std::cos(nu * t) + C2 * std::sin(nu * t));
    }

    double q_dot(double t) const {
        const double e = std::exp(-zeta * t);
        return -A * omega * std::sin(omega * t) + B * omega * std::cos(omega * t) +
               e * ((-zeta * C1 + nu * C2) * std::cos(nu * t) +
                    (-zeta * C2 - nu * C1) * std::sin(nu * t));
    }

    double eval(double x, double t) const { return q(t) * std::sin(kPi * x / length); }
    double eval_ut(double x, double t) const { return q_dot(t) * std::sin(kPi * x / length); }

    Jet q_jet(const Jet& t) const {
        Jet qc = jet_scale(jet_cos(jet_scale(t, omega)), A) +
                 jet_scale(jet_sin(jet_scale(t, omega)), B);
        Jet env = jet_exp(jet_scale(t, -zeta));
        Jet osc = jet_scale(jet_cos(jet_scale(t, nu)), C1) +
                  jet_scale(jet_sin(jet_scale(t, nu)), C2);
        return qc + env * osc;
    }
};

inline PdeProblem make_beam(const BeamParams& bp = BeamParams{}) {
    PdeProblem p;
    p.name = "beam_vibration";
    p.domain.dims = {{0.0, bp.length, false}, {0.0, bp.t_end, true}};
    p.scaling = ScalingMap(p.domain);
    p.coefficients = {{"D_f", bp.flexural}, {"c_d", bp.damping},   {"rho_l", bp.rho_l},
                      {"P", bp.amplitude},  {"f", bp.freq},        {"l", bp.length},
                      {"T", bp.t_end}};

    p.residual_spec.seeds = {{0, 4}, {1, 2}};  // x-pass order 4, t-pass order 2
    p.residual_spec.linear_terms = {{0, 4, bp.flexural}, {1, 1, bp.damping}, {1, 2, bp.rho_l}};
    const double P = bp.amplitude, l = bp.length, om = 2.0 * kPi * bp.freq;
    p.source = [P, l, om](const std::vector<double>& x) {
        return P * std::sin(kPi * x[0] / l) * std::cos(om * x[1]);
    };

    auto zero = [](const std::vector<double>&) { return 0.0; };
    // initial displacement and velocity share the IC points; the moment and
    // displacement conditions share each boundary's points
    p.conditions.push_back({"u", GroupOp::Value, 1, 0.0, "ic", 2.0, zero});
    p.conditions.push_back({"u_t", GroupOp::Dt, 1, 0.0, "ic", 2.0, zero});
    p.conditions.push_back({"u", GroupOp::Value, 0, 0.0, "bc_left", 1.0, zero});
    p.conditions.push_back({"u_xx", GroupOp::Dxx, 0, 0.0, "bc_left", 1.0, zero});
    p.conditions.push_back({"u", GroupOp::Value, 0, l, "bc_right", 1.0, zero});
    p.conditions.push_back({"u_xx", GroupOp::Dxx, 0, l, "bc_right", 1.0, zero});

    auto modal = std::make_shared<BeamModalSolution>(bp);
    p.exact = [modal](const std::vector<double>& x) { return modal->eval(x[0], x[1]); };
    p.exact_probe = [modal, l](const std::vector<double>& x, int dim, int order) {
        Jet xx = jet_lift_coord(x[0], 0, SeedDirection{dim, 1.0}, order);
        Jet tt = jet_lift_coord(x[1], 1, SeedDirection{dim, 1.0}, order);
        return modal->q_jet(tt) * jet_sin(jet_scale(xx, kPi / l));
    };
    return p;
}

/// Problem registry addressed by the names used in config files.
inline PdeProblem make_problem(const std::string& name) {
    if (name == "diffusion1d") return make_diffusion();
    if (name == "helmholtz2d") return make_helmholtz();
    if (name == "allen_cahn1d") return make_allen_cahn();
    if (name == "beam_vibration") return make_beam();
    throw ConfigError("unknown problem '" + name + "'");
}

} // namespace ntkkan
