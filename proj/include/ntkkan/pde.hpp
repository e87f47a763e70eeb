#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ntkkan/engine.hpp"
#include "ntkkan/errors.hpp"
#include "ntkkan/jet.hpp"
#include "ntkkan/linalg.hpp"
#include "ntkkan/rng.hpp"

namespace ntkkan {

inline constexpr double kPi = 3.14159265358979323846;

struct DomainBox {
    struct Dim {
        double lo = 0.0;
        double hi = 1.0;
        bool is_time = false;
    };
    std::vector<Dim> dims;

    int size() const { return static_cast<int>(dims.size()); }

    bool contains(std::span<const double> x, double tol = 1e-12) const {
        for (int i = 0; i < size(); ++i) {
            const auto& d = dims[static_cast<std::size_t>(i)];
            const double band = tol * std::max(1.0, std::abs(d.hi - d.lo));
            if (x[static_cast<std::size_t>(i)] < d.lo - band ||
                x[static_cast<std::size_t>(i)] > d.hi + band)
                return false;
        }
        return true;
    }
};

/// Per-dimension affine map onto [-1,1]^d with the chain-rule factors the
/// Chebyshev basis needs: d^n u/dx^n = (2/(b-a))^n d^n u/dxt^n.
class ScalingMap {
public:
    ScalingMap() = default;
    explicit ScalingMap(const DomainBox& box) : box_(box) {
        for (const auto& d : box.dims) {
            if (!(d.lo < d.hi)) throw ConfigError("domain interval must have lo < hi");
            factors_.push_back(2.0 / (d.hi - d.lo));
        }
    }

    const DomainBox& box() const { return box_; }

    double seed_scale(int dim) const { return factors_[static_cast<std::size_t>(dim)]; }

    double chain_factor(int dim, int order) const {
        return std::pow(factors_[static_cast<std::size_t>(dim)], order);
    }

    double scale_coord(int dim, double x) const {
        const auto& d = box_.dims[static_cast<std::size_t>(dim)];
        return 2.0 * (x - d.lo) / (d.hi - d.lo) - 1.0;
    }

    double unscale_coord(int dim, double xt) const {
        const auto& d = box_.dims[static_cast<std::size_t>(dim)];
        return d.lo + (xt + 1.0) * 0.5 * (d.hi - d.lo);
    }

    std::vector<double> scale_point(std::span<const double> x) const {
        if (!box_.contains(x)) throw DomainError("point outside domain box");
        std::vector<double> out(x.size());
        for (int i = 0; i < box_.size(); ++i)
            out[static_cast<std::size_t>(i)] =
                std::clamp(scale_coord(i, x[static_cast<std::size_t>(i)]), -1.0, 1.0);
        return out;
    }

    std::vector<double> unscale_point(std::span<const double> xt) const {
        std::vector<double> out(xt.size());
        for (int i = 0; i < box_.size(); ++i)
            out[static_cast<std::size_t>(i)] = unscale_coord(i, xt[static_cast<std::size_t>(i)]);
        return out;
    }

    /// Scale a batch (d x M) of physical points.
    Matrix scale_batch(const Matrix& xs) const {
        Matrix out(xs.rows(), xs.cols());
        for (Eigen::Index p = 0; p < xs.cols(); ++p)
            for (int i = 0; i < box_.size(); ++i)
                out(i, p) = std::clamp(scale_coord(i, xs(i, p)), -1.0, 1.0);
        return out;
    }

private:
    DomainBox box_;
    std::vector<double> factors_;
};

enum class GroupOp { Value, Dt, Dxx, Residual };

inline std::string to_string(GroupOp op) {
    switch (op) {
        case GroupOp::Value: return "u";
        case GroupOp::Dt: return "u_t";
        case GroupOp::Dxx: return "u_xx";
        case GroupOp::Residual: return "r";
    }
    return "?";
}

/// One differentiation pass required by a residual operator.
struct SeedReq {
    int dim = 0;
    int order = 0;
};

/// Physical-space derivative bundle: derivs[s][c] is the c-th derivative of
/// the field along the s-th seed pass (shared order-0 column is the value).
struct DerivBundle {
    static constexpr int kMaxSeeds = 2;
    std::array<std::array<double, kMaxJetOrder + 1>, kMaxSeeds> derivs{};
    double u() const { return derivs[0][0]; }
};

/// Residual N[u] - h as a linear combination of bundle slots plus an optional
/// pointwise nonlinearity in u.
struct PdeResidual {
    std::vector<SeedReq> seeds;
    struct Term {
        int seed_idx;
        int order;
        double coeff;
    };
    std::vector<Term> linear_terms;
    std::function<double(double)> nonlinear;        // added to N[u]; may be empty
    std::function<double(double)> nonlinear_deriv;  // d nonlinear / du

    double apply(const DerivBundle& b) const {
        double r = 0.0;
        for (const auto& t : linear_terms)
            r += t.coeff * b.derivs[static_cast<std::size_t>(t.seed_idx)]
                              [static_cast<std::size_t>(t.order)];
        if (nonlinear) r += nonlinear(b.u());
        return r;
    }

    /// dr/d(bundle slot); the nonlinear part channels through seed 0, order 0.
    void linearize(const DerivBundle& b, double w[DerivBundle::kMaxSeeds][kMaxJetOrder + 1]) const {
        for (int s = 0; s < DerivBundle::kMaxSeeds; ++s)
            for (int c = 0; c <= kMaxJetOrder; ++c) w[s][c] = 0.0;
        for (const auto& t : linear_terms) w[t.seed_idx][t.order] += t.coeff;
        if (nonlinear_deriv) w[0][0] += nonlinear_deriv(b.u());
    }
};

/// A scalar field evaluated in jet arithmetic on physical coordinates; used
/// by probe-based residual checks and reference solutions.
using ProbeField = std::function<Jet(const std::vector<double>& x, int seed_dim, int order)>;

/// One condition manifold: a pinned coordinate plane, its target, the group
/// label and operator it feeds, and a share key so several condition groups
/// can reuse the same sampled points (beam IC carries both u and u_t).
struct ConditionSpec {
    std::string label = "u";
    GroupOp op = GroupOp::Value;
    int pin_dim = 0;
    double pin_value = 0.0;
    std::string share_key;
    double share_weight = 1.0;
    std::function<double(const std::vector<double>&)> target;
};

struct PdeProblem {
    std::string name;
    DomainBox domain;
    ScalingMap scaling;
    PdeResidual residual_spec;
    std::vector<ConditionSpec> conditions;
    std::function<double(const std::vector<double>&)> source;  // h(x)
    std::function<double(const std::vector<double>&)> exact;   // may be null
    ProbeField exact_probe;                                    // may be null
    // physical coefficients, kept for reports
    std::vector<std::pair<std::string, double>> coefficients;

    bool has_exact() const { return static_cast<bool>(exact); }

    int time_dim() const {
        for (int i = 0; i < domain.size(); ++i)
            if (domain.dims[static_cast<std::size_t>(i)].is_time) return i;
        return -1;
    }
};

/// Tagged training data: interior residual points plus condition groups
/// merged by label.
struct TrainingSet {
    Matrix residual_points;              // d x N_r, physical coordinates
    std::vector<double> residual_targets;  // h(x_i^r)
    struct Group {
        std::string label;
        GroupOp op;
        Matrix points;  // d x N
        std::vector<double> targets;
    };
    std::vector<Group> condition_groups;

    int n_residual() const { return static_cast<int>(residual_points.cols()); }
    int n_condition() const {
        int n = 0;
        for (const auto& g : condition_groups) n += static_cast<int>(g.points.cols());
        return n;
    }
};

enum class Sampler { uniform_random, grid };

inline Sampler sampler_from(const std::string& s) {
    if (s == "uniform_random" || s == "uniform") return Sampler::uniform_random;
    if (s == "grid") return Sampler::grid;
    throw ConfigError("unknown sampler '" + s + "'");
}

namespace detail {

/// Draw one coordinate for a manifold sample. Time coordinates on condition
/// manifolds avoid the initial instant so that corners live in the IC set.
inline double draw_coord(const DomainBox::Dim& d, bool open_low, Rng& rng) {
    return open_low ? rng.uniform_open_low(d.lo, d.hi) : rng.uniform(d.lo, d.hi);
}

} // namespace detail

/// Deterministic sampling of residual and condition points.
inline TrainingSet sample_training_set(const PdeProblem& problem, int n_residual, int n_condition,
                                       Sampler sampler, std::uint64_t seed) {
    if (n_residual < 1 || n_condition < 1) throw ConfigError("sample counts must be >= 1");
    const int d = problem.domain.size();
    const int tdim = problem.time_dim();
    Rng rng(seed);
    TrainingSet set;

    // interior residual points
    set.residual_points = Matrix(d, n_residual);
    if (sampler == Sampler::uniform_random) {
        for (int p = 0; p < n_residual; ++p)
            for (int i = 0; i < d; ++i) {
                const auto& dim = problem.domain.dims[static_cast<std::size_t>(i)];
                set.residual_points(i, p) =
                    detail::draw_coord(dim, i == tdim, rng);
            }
    } else {
        const int per_axis = static_cast<int>(std::ceil(std::pow(n_residual, 1.0 / d)));
        int p = 0;
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        while (p < n_residual) {
            for (int i = 0; i < d; ++i) {
                const auto& dim = problem.domain.dims[static_cast<std::size_t>(i)];
                const double f = (idx[static_cast<std::size_t>(i)] + 1.0) / (per_axis + 1.0);
                set.residual_points(i, p) = dim.lo + f * (dim.hi - dim.lo);
            }
            ++p;
            for (int i = 0; i < d; ++i) {
                if (++idx[static_cast<std::size_t>(i)] < per_axis) break;
                idx[static_cast<std::size_t>(i)] = 0;
            }
        }
    }
    set.residual_targets.resize(static_cast<std::size_t>(n_residual));
    std::vector<double> xbuf(static_cast<std::size_t>(d));
    for (int p = 0; p < n_residual; ++p) {
        for (int i = 0; i < d; ++i) xbuf[static_cast<std::size_t>(i)] = set.residual_points(i, p);
        set.residual_targets[static_cast<std::size_t>(p)] = problem.source ? problem.source(xbuf) : 0.0;
    }

    // split condition points across share keys by weight
    std::vector<std::string> keys;
    std::vector<double> weights;
    for (const auto& c : problem.conditions) {
        bool seen = false;
        for (const auto& k : keys) seen = seen || (k == c.share_key);
        if (!seen) {
            keys.push_back(c.share_key);
            weights.push_back(c.share_weight);
        }
    }
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::vector<int> counts(keys.size(), 0);
    int assigned = 0;
    for (std::size_t k = 0; k < keys.size(); ++k) {
        counts[k] = std::max(1, static_cast<int>(std::floor(n_condition * weights[k] / wsum)));
        assigned += counts[k];
    }
    for (std::size_t k = 0; assigned < n_condition; k = (k + 1) % keys.size()) {
        ++counts[k];
        ++assigned;
    }
    while (assigned > n_condition) {
        for (std::size_t k = 0; k < keys.size() && assigned > n_condition; ++k)
            if (counts[k] > 1) {
                --counts[k];
                --assigned;
            }
    }

    // sample each key once, then instantiate every group that shares it
    std::vector<Matrix> key_points(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
        const ConditionSpec* proto = nullptr;
        for (const auto& c : problem.conditions)
            if (c.share_key == keys[k]) {
                proto = &c;
                break;
            }
        Matrix pts(d, counts[k]);
        if (sampler == Sampler::uniform_random) {
            for (int p = 0; p < counts[k]; ++p)
                for (int i = 0; i < d; ++i) {
                    if (i == proto->pin_dim) {
                        pts(i, p) = proto->pin_value;
                    } else {
                        const auto& dim = problem.domain.dims[static_cast<std::size_t>(i)];
                        const bool open_low = (i == tdim) && proto->pin_dim != tdim;
                        pts(i, p) = detail::draw_coord(dim, open_low, rng);
                    }
                }
        } else {
            for (int p = 0; p < counts[k]; ++p) {
                const double f = (p + 1.0) / (counts[k] + 1.0);
                for (int i = 0; i < d; ++i) {
                    if (i == proto->pin_dim) {
                        pts(i, p) = proto->pin_value;
                    } else {
                        const auto& dim = problem.domain.dims[static_cast<std::size_t>(i)];
                        pts(i, p) = dim.lo + f * (dim.hi - dim.lo);
                    }
                }
            }
        }
        key_points[k] = std::move(pts);
    }

    for (const auto& c : problem.conditions) {
        std::size_t k = 0;
        while (keys[k] != c.share_key) ++k;
        TrainingSet::Group g;
        g.label = c.label;
        g.op = c.op;
        g.points = key_points[k];
        g.targets.resize(static_cast<std::size_t>(g.points.cols()));
        for (Eigen::Index p = 0; p < g.points.cols(); ++p) {
            for (int i = 0; i < d; ++i) xbuf[static_cast<std::size_t>(i)] = g.points(i, p);
            g.targets[static_cast<std::size_t>(p)] = c.target ? c.target(xbuf) : 0.0;
        }
        // merge into an existing group with the same label and operator
        bool merged = false;
        for (auto& existing : set.condition_groups) {
            if (existing.label == g.label && existing.op == g.op) {
                Matrix joined(d, existing.points.cols() + g.points.cols());
                joined << existing.points, g.points;
                existing.points = std::move(joined);
                existing.targets.insert(existing.targets.end(), g.targets.begin(), g.targets.end());
                merged = true;
                break;
            }
        }
        if (!merged) set.condition_groups.push_back(std::move(g));
    }
    return set;
}

/// Derivative bundle of an analytic probe field at a physical point.
inline DerivBundle probe_bundle(const PdeResidual& rspec, const ProbeField& field,
                                const std::vector<double>& x) {
    DerivBundle b;
    for (std::size_t s = 0; s < rspec.seeds.size(); ++s) {
        const auto& req = rspec.seeds[s];
        Jet j = field(x, req.dim, req.order);
        for (int c = 0; c <= req.order; ++c) b.derivs[s][static_cast<std::size_t>(c)] = derivative_of(j, c);
    }
    return b;
}

/// Residual of an analytic probe field: N[field](x) - h(x).
inline double residual_probe(const PdeProblem& problem, const ProbeField& field,
                             const std::vector<double>& x) {
    const DerivBundle b = probe_bundle(problem.residual_spec, field, x);
    const double h = problem.source ? problem.source(x) : 0.0;
    return problem.residual_spec.apply(b) - h;
}

/// Derivative bundle of the network field at a physical point (scaling and
/// chain factors applied through the seed).
inline DerivBundle network_bundle(const PdeProblem& problem, const NetworkSpec& spec,
                                  std::span<const double> theta, const std::vector<double>& x) {
    DerivBundle b;
    const auto xs = problem.scaling.scale_point(x);
    for (std::size_t s = 0; s < problem.residual_spec.seeds.size(); ++s) {
        const auto& req = problem.residual_spec.seeds[s];
        const SeedDirection seed{req.dim, problem.scaling.seed_scale(req.dim)};
        Jet j = forward_jet(spec, theta, xs, seed, req.order, false);
        for (int c = 0; c <= req.order; ++c) b.derivs[s][static_cast<std::size_t>(c)] = derivative_of(j, c);
    }
    return b;
}

/// Pointwise residual and its parameter gradient for a network field.
inline std::pair<double, std::vector<double>> residual(const PdeProblem& problem,
                                                       const NetworkSpec& spec,
                                                       std::span<const double> theta,
                                                       const std::vector<double>& x) {
    const auto xs = problem.scaling.scale_point(x);
    const auto& rs = problem.residual_spec;
    DerivBundle b;
    std::vector<Jet> jets;
    for (std::size_t s = 0; s < rs.seeds.size(); ++s) {
        const auto& req = rs.seeds[s];
        const SeedDirection seed{req.dim, problem.scaling.seed_scale(req.dim)};
        jets.push_back(forward_jet(spec, theta, xs, seed, req.order, true));
        for (int c = 0; c <= req.order; ++c)
            b.derivs[s][static_cast<std::size_t>(c)] = derivative_of(jets.back(), c);
    }
    const double h = problem.source ? problem.source(x) : 0.0;
    const double r = rs.apply(b) - h;
    double w[DerivBundle::kMaxSeeds][kMaxJetOrder + 1];
    rs.linearize(b, w);
    std::vector<double> grad(theta.size(), 0.0);
    for (std::size_t s = 0; s < rs.seeds.size(); ++s) {
        for (int c = 0; c <= rs.seeds[s].order; ++c) {
            if (w[s][c] == 0.0) continue;
            auto g = param_gradient(jets[s], c);
            for (std::size_t q = 0; q < grad.size(); ++q) grad[q] += w[s][c] * g[q];
        }
    }
    return {r, std::move(grad)};
}

/// Relative L2 error of an arbitrary predictor against the problem's exact or
/// reference solution on a fixed evaluation grid.
inline double relative_l2_error(const PdeProblem& problem,
                                const std::function<double(const std::vector<double>&)>& predict,
                                int nx = 256, int ny = 256) {
    if (!problem.has_exact()) throw NoReferenceSolution(problem.name + " has no reference solution");
    const int d = problem.domain.size();
    if (d != 2) throw ConfigError("evaluation grid is defined for 2-d domains");
    double num = 0.0, den = 0.0;
    std::vector<double> x(2);
    for (int i = 0; i < nx; ++i) {
        const auto& d0 = problem.domain.dims[0];
        x[0] = d0.lo + (d0.hi - d0.lo) * i / (nx - 1.0);
        for (int j = 0; j < ny; ++j) {
            const auto& d1 = problem.domain.dims[1];
            x[1] = d1.lo + (d1.hi - d1.lo) * j / (ny - 1.0);
            const double ue = problem.exact(x);
            const double up = predict(x);
            num += (up - ue) * (up - ue);
            den += ue * ue;
        }
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

/// Relative L2 error of a network on the fixed grid (batched evaluation).
inline double exact_error(const PdeProblem& problem, const NetworkSpec& spec,
                          std::span<const double> theta, int nx = 256, int ny = 256) {
    if (!problem.has_exact()) throw NoReferenceSolution(problem.name + " has no reference solution");
    const int d = problem.domain.size();
    if (d != 2) throw ConfigError("evaluation grid is defined for 2-d domains");
    Matrix pts(2, static_cast<Eigen::Index>(nx) * ny);
    std::vector<double> exact_vals(static_cast<std::size_t>(nx) * ny);
    std::vector<double> x(2);
    Eigen::Index p = 0;
    for (int i = 0; i < nx; ++i) {
        const auto& d0 = problem.domain.dims[0];
        x[0] = d0.lo + (d0.hi - d0.lo) * i / (nx - 1.0);
        for (int j = 0; j < ny; ++j) {
            const auto& d1 = problem.domain.dims[1];
            x[1] = d1.lo + (d1.hi - d1.lo) * j / (ny - 1.0);
            pts(0, p) = x[0];
            pts(1, p) = x[1];
            exact_vals[static_cast<std::size_t>(p)] = problem.exact(x);
            ++p;
        }
    }
    const Matrix scaled = problem.scaling.scale_batch(pts);
    const Vector u = forward_many(spec, theta, scaled);
    double num = 0.0, den = 0.0;
    for (Eigen::Index q = 0; q < u.size(); ++q) {
        const double diff = u[q] - exact_vals[static_cast<std::size_t>(q)];
        num += diff * diff;
        den += exact_vals[static_cast<std::size_t>(q)] * exact_vals[static_cast<std::size_t>(q)];
    }
    if (den == 0.0) return std::sqrt(num);
    return std::sqrt(num / den);
}

} // namespace ntkkan
