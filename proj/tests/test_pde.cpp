#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ntkkan/problems.hpp"
#include "ntkkan/rng.hpp"

using namespace ntkkan;

namespace {

std::vector<double> random_interior(const PdeProblem& p, Rng& rng) {
    std::vector<double> x(static_cast<std::size_t>(p.domain.size()));
    for (int i = 0; i < p.domain.size(); ++i) {
        const auto& d = p.domain.dims[static_cast<std::size_t>(i)];
        const double pad = 1e-3 * (d.hi - d.lo);
        x[static_cast<std::size_t>(i)] = rng.uniform(d.lo + pad, d.hi - pad);
    }
    return x;
}

// probe field u == 0
Jet zero_probe(const std::vector<double>&, int, int order) { return Jet(order); }

// a smooth generic probe for operator-structure checks
Jet wave_probe(const std::vector<double>& x, int dim, int order) {
    Jet xx = jet_lift_coord(x[0], 0, SeedDirection{dim, 1.0}, order);
    Jet tt = jet_lift_coord(x[1], 1, SeedDirection{dim, 1.0}, order);
    return jet_scale(jet_sin(jet_scale(xx, kPi / 6.0)) * jet_cos(tt), 0.8);
}

} // namespace

TEST_CASE("scaling maps endpoints and centers", "[pde]") {
    auto p = make_diffusion();
    CHECK(p.scaling.scale_coord(0, 6.0) == 1.0);
    CHECK(p.scaling.scale_coord(0, -6.0) == -1.0);
    CHECK(p.scaling.scale_coord(0, 0.0) == 0.0);
    CHECK(p.scaling.seed_scale(0) == Catch::Approx(1.0 / 6.0));
    CHECK(p.scaling.chain_factor(0, 1) == Catch::Approx(1.0 / 6.0));

    auto beam = make_beam();
    CHECK(beam.scaling.chain_factor(0, 4) == Catch::Approx(16.0));
}

TEST_CASE("scaling round-trips within 1e-14", "[pde]") {
    auto p = make_helmholtz();
    Rng rng(5);
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<double> x{rng.uniform(-4, 4), rng.uniform(-4, 4)};
        auto xt = p.scaling.scale_point(x);
        auto back = p.scaling.unscale_point(xt);
        REQUIRE(std::abs(back[0] - x[0]) <= 1e-14 * 8);
        REQUIRE(std::abs(back[1] - x[1]) <= 1e-14 * 8);
    }
}

TEST_CASE("points outside the box are rejected", "[pde]") {
    auto p = make_diffusion();
    CHECK_THROWS_AS(p.scaling.scale_point(std::vector<double>{7.0, 0.5}), DomainError);
    CHECK_THROWS_AS(p.scaling.scale_point(std::vector<double>{0.0, -0.5}), DomainError);
}

TEST_CASE("exact solutions annihilate their operators", "[pde]") {
    Rng rng(11);
    auto diff = make_diffusion();
    auto helm = make_helmholtz();
    auto beam = make_beam();
    for (int trial = 0; trial < 1000; ++trial) {
        auto xd = random_interior(diff, rng);
        REQUIRE(std::abs(residual_probe(diff, diff.exact_probe, xd)) <= 1e-8);
        auto xh = random_interior(helm, rng);
        REQUIRE(std::abs(residual_probe(helm, helm.exact_probe, xh)) <= 1e-8);
        auto xb = random_interior(beam, rng);
        REQUIRE(std::abs(residual_probe(beam, beam.exact_probe, xb)) <= 1e-6);
    }
}

TEST_CASE("beam residual of the zero field is minus the load", "[pde]") {
    auto beam = make_beam();
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_interior(beam, rng);
        const double r = residual_probe(beam, zero_probe, x);
        REQUIRE(r == Catch::Approx(-beam.source(x)).margin(1e-14));
    }
}

TEST_CASE("diffusion, helmholtz and beam operators are linear", "[pde]") {
    Rng rng(17);
    const double alpha = 1.7, beta = -0.6;
    for (auto problem : {make_diffusion(), make_beam()}) {
        auto u1 = problem.exact_probe;
        auto u2 = wave_probe;
        ProbeField combo = [&](const std::vector<double>& x, int dim, int order) {
            return jet_scale(u1(x, dim, order), alpha) + jet_scale(u2(x, dim, order), beta);
        };
        for (int trial = 0; trial < 200; ++trial) {
            auto x = random_interior(problem, rng);
            const double h = problem.source(x);
            const double lhs = residual_probe(problem, combo, x) + h;
            const double r1 = residual_probe(problem, u1, x) + h;
            const double r2 = residual_probe(problem, u2, x) + h;
            REQUIRE(std::abs(lhs - (alpha * r1 + beta * r2)) <= 1e-8);
        }
    }
}

TEST_CASE("allen-cahn operator is odd", "[pde]") {
    auto ac = make_allen_cahn();
    Rng rng(19);
    ProbeField neg = [](const std::vector<double>& x, int dim, int order) {
        return jet_scale(wave_probe(x, dim, order), -1.0);
    };
    for (int trial = 0; trial < 200; ++trial) {
        auto x = random_interior(ac, rng);
        const double rp = residual_probe(ac, wave_probe, x);
        const double rn = residual_probe(ac, neg, x);
        REQUIRE(std::abs(rp + rn) <= 1e-8);
    }
}

TEST_CASE("seeding scaled coordinates reproduces physical derivatives", "[pde]") {
    // evaluate the diffusion exact field through the scaled-variable route the
    // network uses and compare each bundle slot against the direct route
    auto p = make_diffusion();
    Rng rng(23);
    ProbeField via_scaled = [&p](const std::vector<double>& x, int dim, int order) {
        auto xt = p.scaling.scale_point(x);
        // lift the scaled coordinates, seeded with the chain factor
        Jet xs = jet_lift(xt[0], dim == 0, p.scaling.seed_scale(0), order);
        Jet ts = jet_lift(xt[1], dim == 1, p.scaling.seed_scale(1), order);
        // unscale inside jet arithmetic (affine), then compose the field
        const auto& dx = p.domain.dims[0];
        const auto& dt = p.domain.dims[1];
        Jet xphys = jet_add(jet_scale(xs, 0.5 * (dx.hi - dx.lo)),
                            jet_constant(0.5 * (dx.hi + dx.lo), order));
        Jet tphys = jet_add(jet_scale(ts, 0.5 * (dt.hi - dt.lo)),
                            jet_constant(0.5 * (dt.hi + dt.lo), order));
        const double D = 0.1;
        return jet_sin(jet_scale(xphys, kPi)) * jet_exp(jet_scale(tphys, -kPi * kPi * D));
    };
    for (int trial = 0; trial < 200; ++trial) {
        auto x = random_interior(p, rng);
        auto direct = probe_bundle(p.residual_spec, p.exact_probe, x);
        auto scaled = probe_bundle(p.residual_spec, via_scaled, x);
        for (std::size_t s = 0; s < p.residual_spec.seeds.size(); ++s)
            for (int c = 0; c <= p.residual_spec.seeds[s].order; ++c)
                REQUIRE(std::abs(direct.derivs[s][static_cast<std::size_t>(c)] -
                                 scaled.derivs[s][static_cast<std::size_t>(c)]) <= 1e-8);
        const double r1 = residual_probe(p, p.exact_probe, x);
        const double r2 = residual_probe(p, via_scaled, x);
        REQUIRE(std::abs(r1 - r2) <= 1e-8);
    }
}

TEST_CASE("sampling is deterministic and respects manifolds", "[pde]") {
    auto p = make_diffusion();
    auto a = sample_training_set(p, 100, 60, Sampler::uniform_random, 42);
    auto b = sample_training_set(p, 100, 60, Sampler::uniform_random, 42);
    REQUIRE(a.residual_points == b.residual_points);
    REQUIRE(a.n_residual() == 100);
    REQUIRE(a.n_condition() == 60);

    for (int q = 0; q < 100; ++q) {
        REQUIRE(a.residual_points(0, q) >= -6.0);
        REQUIRE(a.residual_points(0, q) <= 6.0);
        REQUIRE(a.residual_points(1, q) > 0.0);
        REQUIRE(a.residual_points(1, q) <= 1.0);
    }
    REQUIRE(a.condition_groups.size() == 1);  // all value conditions merge into "u"
    const auto& g = a.condition_groups[0];
    int on_ic = 0, on_bc = 0;
    for (Eigen::Index q = 0; q < g.points.cols(); ++q) {
        if (g.points(1, q) == 0.0) {
            ++on_ic;
            REQUIRE(g.targets[static_cast<std::size_t>(q)] ==
                    Catch::Approx(std::sin(kPi * g.points(0, q))).margin(1e-12));
        } else {
            ++on_bc;
            REQUIRE(std::abs(g.points(0, q)) == 6.0);
            REQUIRE(g.points(1, q) > 0.0);  // corners live in the IC set only
            REQUIRE(g.targets[static_cast<std::size_t>(q)] == 0.0);
        }
    }
    CHECK(on_ic == 20);
    CHECK(on_bc == 40);
}

TEST_CASE("single-point reproducibility for n_r = 1", "[pde]") {
    auto p = make_helmholtz();
    auto a = sample_training_set(p, 1, 4, Sampler::uniform_random, 9);
    auto b = sample_training_set(p, 1, 4, Sampler::uniform_random, 9);
    REQUIRE(a.residual_points(0, 0) == b.residual_points(0, 0));
    REQUIRE(a.residual_points(1, 0) == b.residual_points(1, 0));
}

TEST_CASE("beam condition groups share points and split 400/400", "[pde]") {
    auto beam = make_beam();
    auto set = sample_training_set(beam, 10, 800, Sampler::uniform_random, 3);
    REQUIRE(set.condition_groups.size() == 3);  // u, u_t, u_xx
    const TrainingSet::Group *gu = nullptr, *gut = nullptr, *gux = nullptr;
    for (const auto& g : set.condition_groups) {
        if (g.label == "u") gu = &g;
        if (g.label == "u_t") gut = &g;
        if (g.label == "u_xx") gux = &g;
    }
    REQUIRE(gu != nullptr);
    REQUIRE(gut != nullptr);
    REQUIRE(gux != nullptr);
    CHECK(gut->points.cols() == 400);  // initial-condition share
    CHECK(gux->points.cols() == 400);  // boundary share (both ends)
    CHECK(gu->points.cols() == 800);   // displacement carries both manifolds
    // u_t points coincide with the IC half of the u points
    for (Eigen::Index q = 0; q < gut->points.cols(); ++q) {
        REQUIRE(gut->points(1, q) == 0.0);
        REQUIRE(gut->points(0, q) == gu->points(0, q));
    }
    for (Eigen::Index q = 0; q < gux->points.cols(); ++q) {
        const double x0 = gux->points(0, q);
        REQUIRE((x0 == 0.0 || x0 == 1.0));
    }
}

TEST_CASE("grid sampler produces requested counts", "[pde]") {
    auto p = make_diffusion();
    auto set = sample_training_set(p, 37, 12, Sampler::grid, 1);
    REQUIRE(set.n_residual() == 37);
    REQUIRE(set.n_condition() == 12);
    CHECK_THROWS_AS(sample_training_set(p, 0, 10, Sampler::grid, 1), ConfigError);
}

TEST_CASE("zero predictor has unit relative error", "[pde]") {
    auto p = make_diffusion();
    NetworkSpec spec;
    spec.kind = NetworkKind::cKAN;
    spec.layers = 2;
    spec.width = 4;
    spec.degree = 3;
    spec.input_dim = 2;
    std::vector<double> theta(param_count(spec), 0.0);
    CHECK(exact_error(p, spec, theta, 64, 64) == 1.0);
}

TEST_CASE("exact predictor has zero relative error", "[pde]") {
    auto p = make_helmholtz();
    CHECK(relative_l2_error(p, p.exact, 64, 64) == 0.0);
}

TEST_CASE("pointwise residual gradient matches payload route", "[pde]") {
    auto p = make_allen_cahn();
    NetworkSpec spec;
    spec.kind = NetworkKind::cKAN;
    spec.layers = 2;
    spec.width = 4;
    spec.degree = 3;
    spec.input_dim = 2;
    auto theta = init(spec, 31);
    const std::vector<double> x{1.2, 0.4};
    auto [r, grad] = residual(p, spec, theta, x);

    // central parameter bumps on the residual value
    const double h = 1e-6;
    for (std::size_t q = 0; q < theta.size(); q += 7) {
        auto tp = theta;
        tp[q] += h;
        auto [rp, gp] = residual(p, spec, tp, x);
        tp[q] -= 2 * h;
        auto [rm, gm] = residual(p, spec, tp, x);
        const double fd = (rp - rm) / (2 * h);
        REQUIRE(std::abs(grad[q] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("allen-cahn reference tracks the reaction ODE away from interfaces", "[pde][slow]") {
    auto ac = make_allen_cahn();
    // with D = 1e-4 the solution away from interfaces follows
    // du/dt = -5(u^3 - u), whose closed form from u0 is
    // u(t) = u0 e^{5t} / sqrt(1 - u0^2 + u0^2 e^{10t}}
    auto ode = [](double u0, double t) {
        const double e = std::exp(10.0 * t);
        return u0 * std::exp(5.0 * t) / std::sqrt(1.0 - u0 * u0 + u0 * u0 * e);
    };
    for (double x : {-4.5, -1.8, 1.5, 4.2}) {
        const double u0 = (x / 6.0) * (x / 6.0) * std::cos(kPi * x / 6.0);
        for (double t : {0.1, 0.4, 0.9}) {
            const double ref = ac.exact(std::vector<double>{x, t});
            REQUIRE(std::abs(ref - ode(u0, t)) <= 2e-3);
        }
    }
    // boundary and initial data reproduced
    CHECK(ac.exact(std::vector<double>{-6.0, 0.5}) == Catch::Approx(-1.0).margin(1e-9));
    CHECK(ac.exact(std::vector<double>{2.0, 0.0}) ==
          Catch::Approx((2.0 / 6) * (2.0 / 6) * std::cos(kPi / 3)).margin(1e-9));
}
