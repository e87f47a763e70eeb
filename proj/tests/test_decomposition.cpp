#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ntkkan/decomposition.hpp"

using namespace ntkkan;

namespace {

NetworkSpec tiny_ckan() {
    NetworkSpec s;
    s.kind = NetworkKind::cKAN;
    s.layers = 2;
    s.width = 5;
    s.degree = 3;
    s.input_dim = 2;
    return s;
}

} // namespace

TEST_CASE("equal intervals partition the horizon exactly", "[decomposition]") {
    auto p = make_diffusion();
    auto iv = time_intervals(p, 2);
    REQUIRE(iv.size() == 2);
    CHECK(iv[0].first == 0.0);
    CHECK(iv[0].second == 0.5);
    CHECK(iv[1].first == 0.5);
    CHECK(iv[1].second == 1.0);

    BeamParams bp;
    bp.t_end = 10.0;
    auto beam = make_beam(bp);
    auto iv8 = time_intervals(beam, 8);
    REQUIRE(iv8.size() == 8);
    for (int i = 0; i < 8; ++i) {
        CHECK(iv8[static_cast<std::size_t>(i)].second - iv8[static_cast<std::size_t>(i)].first ==
              Catch::Approx(1.25).margin(1e-12));
        if (i > 0)
            CHECK(iv8[static_cast<std::size_t>(i)].first ==
                  iv8[static_cast<std::size_t>(i) - 1].second);
    }
    CHECK(iv8.back().second == 10.0);

    auto single = time_intervals(p, 1);
    REQUIRE(single.size() == 1);
    CHECK(single[0].first == 0.0);
    CHECK(single[0].second == 1.0);

    CHECK_THROWS_AS(plan(0, tiny_ckan(), 10, 10, 5, OptimizerConfig{}), ConfigError);
    CHECK_THROWS_AS(time_intervals(make_helmholtz(), 2), ConfigError);
}

TEST_CASE("single subdomain reduces to plain training", "[decomposition]") {
    auto p = make_diffusion();
    auto dp = plan(1, tiny_ckan(), 40, 21, 8, OptimizerConfig{});
    dp.per_sub_error = false;
    const std::uint64_t seed = 31;
    auto seq = run_sequence(p, dp, seed, {0, 8});
    REQUIRE(seq.failed_at == -1);
    REQUIRE(seq.subdomains.size() == 1);

    auto set = sample_training_set(p, 40, 21, Sampler::uniform_random, dp.data_seed(seed, 0));
    auto theta0 = init(dp.per_sub_spec, dp.theta_seed(seed, 0));
    auto plain = train(p, dp.per_sub_spec, theta0, set, dp.optimizer, 8, {0, 8}, dp.weights,
                       nullptr, false);
    REQUIRE(seq.subdomains[0].theta == plain.theta);
    REQUIRE(seq.subdomains[0].record.records.back().loss_total ==
            plain.records.back().loss_total);
}

TEST_CASE("interface targets equal the previous network's terminal state", "[decomposition]") {
    auto p = make_diffusion();
    auto dp = plan(2, tiny_ckan(), 30, 18, 6, OptimizerConfig{});
    dp.per_sub_error = false;
    auto seq = run_sequence(p, dp, 7, {0, 6});
    REQUIRE(seq.failed_at == -1);
    REQUIRE(seq.subdomains.size() == 2);

    const auto& first = seq.subdomains[0];
    const auto& second = seq.subdomains[1];
    // find the IC group of subdomain 2 and check its targets reproduce net 1
    for (const auto& g : second.set.condition_groups) {
        if (g.op != GroupOp::Value) continue;
        for (Eigen::Index q = 0; q < g.points.cols(); ++q) {
            if (g.points(1, q) != 0.5) continue;  // interface samples only
            std::vector<double> x{g.points(0, q), 0.5};
            const double u1 = forward(dp.per_sub_spec, first.theta,
                                      first.problem.scaling.scale_point(x));
            REQUIRE(g.targets[static_cast<std::size_t>(q)] == u1);  // exact, by construction
        }
    }
}

TEST_CASE("stitched predictor owns intervals left-closed right-open", "[decomposition]") {
    auto p = make_diffusion();
    auto dp = plan(4, tiny_ckan(), 20, 12, 3, OptimizerConfig{});
    dp.per_sub_error = false;
    auto seq = run_sequence(p, dp, 3, {0, 3});
    REQUIRE(seq.failed_at == -1);
    REQUIRE(seq.stitched != nullptr);
    CHECK(seq.stitched->owner(0.0) == 0);
    CHECK(seq.stitched->owner(0.25) == 1);   // boundary goes right
    CHECK(seq.stitched->owner(0.624) == 2);
    CHECK(seq.stitched->owner(1.0) == 3);    // final interval closed
    const double v = seq.stitched->value(std::vector<double>{0.3, 0.25});
    CHECK(std::isfinite(v));
}

TEST_CASE("sequence is deterministic in the seed", "[decomposition]") {
    auto p = make_diffusion();
    auto dp = plan(2, tiny_ckan(), 25, 15, 5, OptimizerConfig{});
    dp.per_sub_error = false;
    auto a = run_sequence(p, dp, 11, {0, 5});
    auto b = run_sequence(p, dp, 11, {0, 5});
    REQUIRE(a.subdomains.size() == b.subdomains.size());
    for (std::size_t i = 0; i < a.subdomains.size(); ++i)
        REQUIRE(a.subdomains[i].theta == b.subdomains[i].theta);
}

TEST_CASE("beam sequence hands off displacement and velocity", "[decomposition]") {
    BeamParams bp;
    bp.t_end = 2.0;
    auto beam = make_beam(bp);
    auto dp = plan(2, tiny_ckan(), 25, 16, 4, OptimizerConfig{});
    dp.per_sub_error = false;
    auto seq = run_sequence(beam, dp, 5, {0, 4});
    REQUIRE(seq.failed_at == -1);
    const auto& second = seq.subdomains[1];
    const auto& first = seq.subdomains[0];
    bool found_velocity_group = false;
    for (const auto& g : second.set.condition_groups) {
        if (g.op != GroupOp::Dt) continue;
        found_velocity_group = true;
        for (Eigen::Index q = 0; q < g.points.cols(); ++q) {
            REQUIRE(g.points(1, q) == 1.0);  // interface time
            std::vector<double> x{g.points(0, q), 1.0};
            Jet j = forward_jet(dp.per_sub_spec, first.theta,
                                first.problem.scaling.scale_point(x),
                                SeedDirection{1, first.problem.scaling.seed_scale(1)}, 1);
            REQUIRE(g.targets[static_cast<std::size_t>(q)] == derivative_of(j, 1));
        }
    }
    REQUIRE(found_velocity_group);
}
