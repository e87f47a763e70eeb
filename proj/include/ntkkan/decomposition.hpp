#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ntkkan/pde.hpp"
#include "ntkkan/problems.hpp"
#include "ntkkan/training.hpp"

namespace ntkkan {

/// Temporal decomposition: S equal subdomains of [t0, T], one network each,
/// trained in sequence with the predicted terminal state handed to the next
/// subdomain as its initial condition.
struct DecompositionPlan {
    int subdomains = 1;
    NetworkSpec per_sub_spec;
    int n_residual = 100;
    int n_condition = 50;
    long epochs = 0;
    OptimizerConfig optimizer;
    LossSpec weights;
    Sampler sampler = Sampler::uniform_random;
    int error_grid = 128;
    bool per_sub_error = true;

    std::uint64_t theta_seed(std::uint64_t seed, int sub) const {
        return seed + 7919ull * static_cast<std::uint64_t>(sub);
    }
    std::uint64_t data_seed(std::uint64_t seed, int sub) const {
        return seed + 7919ull * static_cast<std::uint64_t>(sub) + 104729ull;
    }
};

inline DecompositionPlan plan(int subdomains, const NetworkSpec& per_sub_spec, int n_residual,
                              int n_condition, long epochs, const OptimizerConfig& optimizer) {
    if (subdomains < 1) throw ConfigError("subdomain count must be >= 1");
    per_sub_spec.validate();
    DecompositionPlan p;
    p.subdomains = subdomains;
    p.per_sub_spec = per_sub_spec;
    p.n_residual = n_residual;
    p.n_condition = n_condition;
    p.epochs = epochs;
    p.optimizer = optimizer;
    return p;
}

/// Equal-length time intervals partitioning [t0, T] exactly: interval i is
/// [t0 + i h, t0 + (i+1) h] with the last endpoint pinned to T.
inline std::vector<std::pair<double, double>> time_intervals(const PdeProblem& problem, int s) {
    const int td = problem.time_dim();
    if (td < 0) throw ConfigError("temporal decomposition needs a time dimension");
    const auto& dim = problem.domain.dims[static_cast<std::size_t>(td)];
    std::vector<std::pair<double, double>> out;
    const double h = (dim.hi - dim.lo) / s;
    for (int i = 0; i < s; ++i) {
        const double a = dim.lo + i * h;
        const double b = (i == s - 1) ? dim.hi : dim.lo + (i + 1) * h;
        out.emplace_back(a, b);
    }
    return out;
}

struct SubdomainResult {
    PdeProblem problem;  // the restricted problem that was trained
    TrainingSet set;
    std::vector<double> theta;
    TrainResult record;
};

/// Stitched solution: queries dispatch to the owning subdomain,
/// left-closed/right-open with the final interval closed.
class StitchedSolution {
public:
    StitchedSolution(std::vector<std::pair<double, double>> intervals, NetworkSpec spec,
                     std::vector<std::vector<double>> thetas,
                     std::vector<ScalingMap> scalings, int time_dim)
        : intervals_(std::move(intervals)), spec_(std::move(spec)), thetas_(std::move(thetas)),
          scalings_(std::move(scalings)), time_dim_(time_dim) {}

    int owner(double t) const {
        const double t0 = intervals_.front().first;
        const double len = intervals_.front().second - intervals_.front().first;
        int idx = static_cast<int>(std::floor((t - t0) / len));
        return std::clamp(idx, 0, static_cast<int>(intervals_.size()) - 1);
    }

    double value(const std::vector<double>& x) const {
        const int i = owner(x[static_cast<std::size_t>(time_dim_)]);
        return forward(spec_, thetas_[static_cast<std::size_t>(i)],
                       scalings_[static_cast<std::size_t>(i)].scale_point(clamped(x, i)));
    }

    double time_derivative(const std::vector<double>& x) const {
        const int i = owner(x[static_cast<std::size_t>(time_dim_)]);
        const auto& sc = scalings_[static_cast<std::size_t>(i)];
        Jet j = forward_jet(spec_, thetas_[static_cast<std::size_t>(i)],
                            sc.scale_point(clamped(x, i)),
                            SeedDirection{time_dim_, sc.seed_scale(time_dim_)}, 1);
        return derivative_of(j, 1);
    }

    const std::vector<std::pair<double, double>>& intervals() const { return intervals_; }

private:
    std::vector<double> clamped(std::vector<double> x, int i) const {
        auto& t = x[static_cast<std::size_t>(time_dim_)];
        t = std::clamp(t, intervals_[static_cast<std::size_t>(i)].first,
                       intervals_[static_cast<std::size_t>(i)].second);
        return x;
    }

    std::vector<std::pair<double, double>> intervals_;
    NetworkSpec spec_;
    std::vector<std::vector<double>> thetas_;
    std::vector<ScalingMap> scalings_;
    int time_dim_;
};

struct SequenceResult {
    std::vector<SubdomainResult> subdomains;
    int failed_at = -1;  // index of the subdomain that aborted, -1 if none
    std::string failure;
    std::shared_ptr<StitchedSolution> stitched;  // over the completed prefix
    long line_search_failures = 0;
};

/// Restrict a problem to one time interval, replacing initial conditions with
/// targets queried from the previous subdomain's network (after the first).
/// Boundary conditions are re-imposed unchanged.
inline PdeProblem restrict_to_interval(const PdeProblem& base, double t_lo, double t_hi,
                                       const std::function<double(const std::vector<double>&)>& ic_value,
                                       const std::function<double(const std::vector<double>&)>& ic_velocity) {
    PdeProblem sub = base;
    const int td = base.time_dim();
    sub.domain.dims[static_cast<std::size_t>(td)].lo = t_lo;
    sub.domain.dims[static_cast<std::size_t>(td)].hi = t_hi;
    sub.scaling = ScalingMap(sub.domain);
    for (auto& c : sub.conditions) {
        if (c.pin_dim == td) {
            c.pin_value = t_lo;
            if (ic_value && c.op == GroupOp::Value) c.target = ic_value;
            if (ic_velocity && c.op == GroupOp::Dt) c.target = ic_velocity;
        }
    }
    return sub;
}

/// Per-subdomain snapshot hook factory (sub index, restricted problem, set).
using SubdomainHookFactory =
    std::function<SnapshotHook(int, const PdeProblem&, const TrainingSet&)>;

/// Train the subdomain chain. A failed subdomain aborts the downstream ones;
/// partial results are preserved in the returned structure.
inline SequenceResult run_sequence(const PdeProblem& base, const DecompositionPlan& plan,
                                   std::uint64_t seed, std::vector<long> snapshot_taus = {},
                                   const SubdomainHookFactory& hook_factory = nullptr) {
    SequenceResult result;
    const auto intervals = time_intervals(base, plan.subdomains);
    const int td = base.time_dim();
    if (snapshot_taus.empty()) snapshot_taus = geometric_schedule(plan.epochs);

    std::vector<std::vector<double>> thetas;
    std::vector<ScalingMap> scalings;
    std::function<double(const std::vector<double>&)> ic_value, ic_velocity;
    const bool beam_like = [&] {
        for (const auto& c : base.conditions)
            if (c.op == GroupOp::Dt) return true;
        return false;
    }();

    for (int i = 0; i < plan.subdomains; ++i) {
        const auto [t_lo, t_hi] = intervals[static_cast<std::size_t>(i)];
        PdeProblem sub = restrict_to_interval(base, t_lo, t_hi, i == 0 ? nullptr : ic_value,
                                              i == 0 ? nullptr : ic_velocity);
        SubdomainResult sr{sub, {}, {}, {}};
        try {
            sr.set = sample_training_set(sub, plan.n_residual, plan.n_condition, plan.sampler,
                                         plan.data_seed(seed, i));
            auto theta0 = init(plan.per_sub_spec, plan.theta_seed(seed, i));
            SnapshotHook hook = hook_factory ? hook_factory(i, sub, sr.set) : SnapshotHook{};
            sr.record = train(sub, plan.per_sub_spec, std::move(theta0), sr.set, plan.optimizer,
                              plan.epochs, snapshot_taus, plan.weights, hook, plan.per_sub_error,
                              plan.error_grid);
            sr.theta = sr.record.theta;
            result.line_search_failures += sr.record.line_search_failures;
        } catch (const std::exception& e) {
            result.failed_at = i;
            result.failure = e.what();
            result.subdomains.push_back(std::move(sr));
            break;
        }
        thetas.push_back(sr.theta);
        scalings.push_back(sub.scaling);
        result.subdomains.push_back(std::move(sr));

        // hand the terminal state to the next subdomain
        const NetworkSpec spec = plan.per_sub_spec;
        const ScalingMap sc = scalings.back();
        const std::vector<double> theta_i = thetas.back();
        ic_value = [spec, sc, theta_i, t_hi, td](const std::vector<double>& x) {
            std::vector<double> q = x;
            q[static_cast<std::size_t>(td)] = t_hi;
            return forward(spec, theta_i, sc.scale_point(q));
        };
        if (beam_like) {
            ic_velocity = [spec, sc, theta_i, t_hi, td](const std::vector<double>& x) {
                std::vector<double> q = x;
                q[static_cast<std::size_t>(td)] = t_hi;
                Jet j = forward_jet(spec, theta_i, sc.scale_point(q),
                                    SeedDirection{td, sc.seed_scale(td)}, 1);
                return derivative_of(j, 1);
            };
        }
    }

    if (!thetas.empty()) {
        std::vector<std::pair<double, double>> done(intervals.begin(),
                                                    intervals.begin() +
                                                        static_cast<long>(thetas.size()));
        result.stitched = std::make_shared<StitchedSolution>(done, plan.per_sub_spec, thetas,
                                                             scalings, td);
    }
    return result;
}

/// Relative L2 error of the stitched solution on the base problem's grid.
inline double stitched_error(const PdeProblem& base, const SequenceResult& seq, int nx = 256,
                             int ny = 256) {
    if (!seq.stitched || seq.failed_at >= 0)
        throw NoReferenceSolution("sequence incomplete; stitched error unavailable");
    return relative_l2_error(
        base, [&](const std::vector<double>& x) { return seq.stitched->value(x); }, nx, ny);
}

} // namespace ntkkan
