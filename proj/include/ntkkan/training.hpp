#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ntkkan/engine.hpp"
#include "ntkkan/linalg.hpp"
#include "ntkkan/pde.hpp"

namespace ntkkan {

/// Loss weights: residual, data, and per-label overrides for problems with
/// several condition groups (beam: u, u_t, u_xx, r). All sums are plain
/// half-sum-of-squares, no 1/N averaging.
struct LossSpec {
    double weight_data = 1.0;
    double weight_residual = 1.0;
    std::map<std::string, double> group_weights;

    double condition_weight(const std::string& label) const {
        const auto it = group_weights.find(label);
        return weight_data * (it == group_weights.end() ? 1.0 : it->second);
    }
    double residual_weight() const {
        const auto it = group_weights.find("r");
        return weight_residual * (it == group_weights.end() ? 1.0 : it->second);
    }
    void validate() const {
        if (weight_data <= 0 || weight_residual <= 0) throw ConfigError("loss weights must be > 0");
        for (const auto& [k, v] : group_weights)
            if (v <= 0) throw ConfigError("loss weight for '" + k + "' must be > 0");
    }
};

struct LossBreakdown {
    double total = 0.0;
    double data = 0.0;
    double residual = 0.0;
};

namespace detail {

inline constexpr double kFactorial[] = {1.0, 1.0, 2.0, 6.0, 24.0};

inline int op_order(GroupOp op) {
    switch (op) {
        case GroupOp::Value: return 0;
        case GroupOp::Dt: return 1;
        case GroupOp::Dxx: return 2;
        case GroupOp::Residual: return 0;
    }
    return 0;
}

/// Seed direction for a condition operator (Dt differentiates the time axis,
/// Dxx the first space axis).
inline SeedDirection op_seed(const PdeProblem& problem, GroupOp op) {
    if (op == GroupOp::Dt) {
        const int td = problem.time_dim();
        if (td < 0) throw ConfigError("Dt condition on a steady problem");
        return {td, problem.scaling.seed_scale(td)};
    }
    if (op == GroupOp::Dxx) return {0, problem.scaling.seed_scale(0)};
    return {-1, 0.0};
}

} // namespace detail

/// Physics-informed loss with persistent evaluator state: scaled points are
/// computed once and the jet tapes are reused across epochs.
class PinnLoss {
public:
    PinnLoss(const PdeProblem& problem, const NetworkSpec& spec, const TrainingSet& set,
             const LossSpec& weights)
        : problem_(problem), spec_(spec), set_(set), weights_(weights) {
        weights_.validate();
        const auto& rs = problem_.residual_spec;
        if (set_.n_residual() > 0) {
            residual_scaled_ = problem_.scaling.scale_batch(set_.residual_points);
            res_weights_.resize(rs.seeds.size());
        }
        for (const auto& g : set_.condition_groups)
            group_scaled_.push_back(problem_.scaling.scale_batch(g.points));
    }

    LossBreakdown operator()(std::span<const double> theta, std::span<double> grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        LossBreakdown out;
        const auto& rs = problem_.residual_spec;

        if (set_.n_residual() > 0) {
            const int M = set_.n_residual();
            if (res_evals_.empty())
                for (std::size_t s = 0; s < rs.seeds.size(); ++s)
                    res_evals_.emplace_back(spec_, theta);
            for (std::size_t s = 0; s < rs.seeds.size(); ++s) {
                res_evals_[s].rebind(theta);
                res_evals_[s].forward(
                    residual_scaled_,
                    SeedDirection{rs.seeds[s].dim, problem_.scaling.seed_scale(rs.seeds[s].dim)},
                    rs.seeds[s].order);
            }
            r_.resize(static_cast<std::size_t>(M));
            for (std::size_t s = 0; s < rs.seeds.size(); ++s) {
                auto& w = res_weights_[s];
                if (w.rows() != rs.seeds[s].order + 1 || w.cols() != M)
                    w.resize(rs.seeds[s].order + 1, M);
            }
            DerivBundle b;
            double w[DerivBundle::kMaxSeeds][kMaxJetOrder + 1];
            for (int p = 0; p < M; ++p) {
                for (std::size_t s = 0; s < rs.seeds.size(); ++s)
                    for (int c = 0; c <= rs.seeds[s].order; ++c)
                        b.derivs[s][static_cast<std::size_t>(c)] =
                            detail::kFactorial[c] * res_evals_[s].out_at(c, p);
                r_[static_cast<std::size_t>(p)] =
                    rs.apply(b) - set_.residual_targets[static_cast<std::size_t>(p)];
                rs.linearize(b, w);
                for (std::size_t s = 0; s < rs.seeds.size(); ++s)
                    for (int c = 0; c <= rs.seeds[s].order; ++c)
                        res_weights_[s](c, p) = w[s][c] * detail::kFactorial[c];
            }
            const double wr = weights_.residual_weight();
            double lr_sum = 0.0;
            for (double v : r_) lr_sum += v * v;
            out.residual = 0.5 * wr * lr_sum;
            for (std::size_t s = 0; s < rs.seeds.size(); ++s) {
                for (int p = 0; p < M; ++p)
                    for (int c = 0; c <= rs.seeds[s].order; ++c)
                        res_weights_[s](c, p) *= wr * r_[static_cast<std::size_t>(p)];
                res_evals_[s].backward_accumulate(res_weights_[s], grad);
            }
        }

        for (std::size_t gi = 0; gi < set_.condition_groups.size(); ++gi) {
            const auto& g = set_.condition_groups[gi];
            if (g.points.cols() == 0) continue;
            const int M = static_cast<int>(g.points.cols());
            const int ord = detail::op_order(g.op);
            if (group_evals_.size() <= gi)
                while (group_evals_.size() <= gi) group_evals_.emplace_back(spec_, theta);
            auto& ev = group_evals_[gi];
            ev.rebind(theta);
            ev.forward(group_scaled_[gi], detail::op_seed(problem_, g.op), ord);
            const double wg = weights_.condition_weight(g.label);
            if (static_cast<int>(seed_.rows()) != ord + 1 || static_cast<int>(seed_.cols()) != M)
                seed_.resize(ord + 1, M);
            seed_.setZero();
            double sum = 0.0;
            for (int p = 0; p < M; ++p) {
                const double v = detail::kFactorial[ord] * ev.out_at(ord, p);
                const double diff = v - g.targets[static_cast<std::size_t>(p)];
                sum += diff * diff;
                seed_(ord, p) = wg * diff * detail::kFactorial[ord];
            }
            out.data += 0.5 * wg * sum;
            ev.backward_accumulate(seed_, grad);
        }

        out.total = out.data + out.residual;
        return out;
    }

private:
    const PdeProblem& problem_;
    NetworkSpec spec_;
    const TrainingSet& set_;
    LossSpec weights_;
    Matrix residual_scaled_;
    std::vector<Matrix> group_scaled_;
    std::vector<Evaluator> res_evals_;
    std::vector<Evaluator> group_evals_;
    std::vector<Matrix> res_weights_;
    std::vector<double> r_;
    Matrix seed_;
};

/// One-shot convenience wrapper around PinnLoss. grad is overwritten.
inline LossBreakdown loss_and_grad(const PdeProblem& problem, const NetworkSpec& spec,
                                   std::span<const double> theta, const TrainingSet& set,
                                   const LossSpec& weights, std::span<double> grad) {
    PinnLoss loss(problem, spec, set, weights);
    return loss(theta, grad);
}

/// Plain supervised half-sum-of-squares task on network-space inputs.
struct SupervisedSet {
    Matrix xs;               // d x N, already in [-1,1]^d
    std::vector<double> ys;  // targets
};

class SupervisedLoss {
public:
    SupervisedLoss(const NetworkSpec& spec, const SupervisedSet& set) : set_(set) {
        ev_.emplace(spec, std::vector<double>(param_count(spec), 0.0));
        owned_zero_.assign(param_count(spec), 0.0);
        ev_->rebind(owned_zero_);
    }

    LossBreakdown operator()(std::span<const double> theta, std::span<double> grad) {
        std::fill(grad.begin(), grad.end(), 0.0);
        ev_->rebind(theta);
        ev_->forward(set_.xs, SeedDirection{-1, 0.0}, 0);
        const int M = static_cast<int>(set_.xs.cols());
        if (seed_.cols() != M) seed_.resize(1, M);
        double sum = 0.0;
        for (int p = 0; p < M; ++p) {
            const double diff = ev_->out_at(0, p) - set_.ys[static_cast<std::size_t>(p)];
            sum += diff * diff;
            seed_(0, p) = diff;
        }
        ev_->backward_accumulate(seed_, grad);
        LossBreakdown out;
        out.data = 0.5 * sum;
        out.total = out.data;
        return out;
    }

private:
    const SupervisedSet& set_;
    std::optional<Evaluator> ev_;
    std::vector<double> owned_zero_;
    Matrix seed_;
};

inline LossBreakdown supervised_loss_and_grad(const NetworkSpec& spec,
                                              std::span<const double> theta,
                                              const SupervisedSet& set, std::span<double> grad) {
    SupervisedLoss loss(spec, set);
    return loss(theta, grad);
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    void validate() const {
        if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1))
            throw ConfigError("adam betas must lie in (0,1)");
    }
};

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

/// Bias-corrected Adam update.
inline void adam_step(AdamState& state, std::span<double> theta, std::span<const double> g,
                      const AdamConfig& cfg) {
    cfg.validate();
    if (state.m.empty()) {
        state.m.assign(theta.size(), 0.0);
        state.v.assign(theta.size(), 0.0);
    }
    ++state.step;
    const double b1t = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double b2t = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1 - cfg.beta1) * g[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1 - cfg.beta2) * g[i] * g[i];
        const double mhat = state.m[i] / b1t;
        const double vhat = state.v[i] / b2t;
        theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

struct LbfgsConfig {
    int memory = 10;
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_line_search = 30;
    void validate() const {
        if (!(c1 > 0 && c1 < c2 && c2 < 1)) throw ConfigError("need 0 < c1 < c2 < 1");
        if (memory < 1) throw ConfigError("lbfgs memory must be >= 1");
    }
};

/// Objective evaluated at theta; fills grad and returns the loss.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

/// L-BFGS with a strong Wolfe line search (bracket + zoom). Accepted steps
/// are certified against both Wolfe inequalities; when the search fails the
/// step falls back to a short steepest-descent move and the failure is
/// counted.
class Lbfgs {
public:
    Lbfgs(LbfgsConfig cfg, std::size_t n) : cfg_(cfg), n_(n) { cfg_.validate(); }

    struct StepInfo {
        double loss = 0.0;
        double alpha = 0.0;
        bool wolfe_ok = false;
        bool line_search_failed = false;
    };

    long failures() const { return failures_; }

    /// One iteration: direction from the two-loop recursion, then line search.
    /// theta/grad/loss are updated in place to the new point.
    StepInfo step(const Objective& f, std::vector<double>& theta, std::vector<double>& grad,
                  double& loss) {
        StepInfo info;
        std::vector<double> dir = two_loop(grad);
        double dg0 = dot(dir, grad);
        if (dg0 >= 0.0) {  // not a descent direction: reset to steepest descent
            history_.clear();
            for (std::size_t i = 0; i < n_; ++i) dir[i] = -grad[i];
            dg0 = dot(dir, grad);
        }
        if (dg0 == 0.0) {  // at a stationary point
            info.loss = loss;
            info.wolfe_ok = true;
            return info;
        }

        const double f0 = loss;
        std::vector<double> theta0 = theta;
        std::vector<double> gnew(n_);
        double alpha = first_alpha_;
        double alpha_prev = 0.0, f_prev = f0;
        double f_alpha = f0;
        bool found = false;
        double alpha_found = 0.0;

        auto eval_at = [&](double a) {
            for (std::size_t i = 0; i < n_; ++i) theta[i] = theta0[i] + a * dir[i];
            return f(theta, gnew);
        };

        int it = 0;
        for (; it < cfg_.max_line_search; ++it) {
            f_alpha = eval_at(alpha);
            const double dg = dot(dir, gnew);
            if (f_alpha > f0 + cfg_.c1 * alpha * dg0 || (it > 0 && f_alpha >= f_prev)) {
                found = zoom(eval_at, f0, dg0, alpha_prev, f_prev, alpha, f_alpha, dir, gnew,
                             alpha_found, it);
                break;
            }
            if (std::abs(dg) <= -cfg_.c2 * dg0) {
                found = true;
                alpha_found = alpha;
                break;
            }
            if (dg >= 0.0) {
                found = zoom(eval_at, f0, dg0, alpha, f_alpha, alpha_prev, f_prev, dir, gnew,
                             alpha_found, it);
                break;
            }
            alpha_prev = alpha;
            f_prev = f_alpha;
            alpha *= 2.0;
        }

        if (found) {
            f_alpha = eval_at(alpha_found);
            const double dg = dot(dir, gnew);
            // certify the strong Wolfe conditions on the accepted step
            const double slop = 1e-10 * (std::abs(f0) + 1.0);
            info.wolfe_ok = (f_alpha <= f0 + cfg_.c1 * alpha_found * dg0 + slop) &&
                            (std::abs(dg) <= -cfg_.c2 * dg0 + slop);
            info.alpha = alpha_found;
            push_history(theta0, theta, grad, gnew);
            grad = gnew;
            loss = f_alpha;
            first_alpha_ = 1.0;
        } else {
            // fall back to a conservative gradient step
            info.line_search_failed = true;
            ++failures_;
            history_.clear();
            double a = fallback_alpha_;
            double fl = f0;
            for (int k = 0; k < 40; ++k) {
                for (std::size_t i = 0; i < n_; ++i) theta[i] = theta0[i] - a * grad[i];
                fl = f(theta, gnew);
                if (fl < f0) break;
                a *= 0.25;
            }
            if (fl >= f0) {  // no progress at all: stay put
                theta = theta0;
                fl = f0;
                f(theta, gnew);
            }
            info.alpha = a;
            grad = gnew;
            loss = fl;
        }
        info.loss = loss;
        return info;
    }

private:
    static double dot(const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }

    std::vector<double> two_loop(const std::vector<double>& grad) {
        std::vector<double> q = grad;
        std::vector<double> alpha(history_.size());
        for (std::size_t i = history_.size(); i-- > 0;) {
            const auto& [s, y, rho] = history_[i];
            alpha[i] = rho * dot(s, q);
            for (std::size_t j = 0; j < n_; ++j) q[j] -= alpha[i] * y[j];
        }
        if (!history_.empty()) {
            const auto& [s, y, rho] = history_.back();
            const double gamma = dot(s, y) / dot(y, y);
            for (double& v : q) v *= gamma;
        }
        for (std::size_t i = 0; i < history_.size(); ++i) {
            const auto& [s, y, rho] = history_[i];
            const double beta = rho * dot(y, q);
            for (std::size_t j = 0; j < n_; ++j) q[j] += (alpha[i] - beta) * s[j];
        }
        for (double& v : q) v = -v;
        return q;
    }

    void push_history(const std::vector<double>& theta0, const std::vector<double>& theta1,
                      const std::vector<double>& g0, const std::vector<double>& g1) {
        std::vector<double> s(n_), y(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            s[i] = theta1[i] - theta0[i];
            y[i] = g1[i] - g0[i];
        }
        const double sy = dot(s, y);
        const double norms = std::sqrt(dot(s, s)) * std::sqrt(dot(y, y));
        if (sy <= 1e-12 * std::max(norms, 1e-300)) return;  // curvature too weak to store
        history_.emplace_back(std::move(s), std::move(y), 1.0 / sy);
        if (static_cast<int>(history_.size()) > cfg_.memory) history_.erase(history_.begin());
    }

    template <typename EvalFn>
    bool zoom(EvalFn&& eval_at, double f0, double dg0, double alo, double flo, double ahi,
              double fhi, const std::vector<double>& dir, std::vector<double>& gnew,
              double& alpha_out, int& it) {
        for (; it < cfg_.max_line_search; ++it) {
            const double a = 0.5 * (alo + ahi);
            const double fa = eval_at(a);
            const double dg = dot_dir(dir, gnew);
            if (fa > f0 + cfg_.c1 * a * dg0 || fa >= flo) {
                ahi = a;
                fhi = fa;
            } else {
                if (std::abs(dg) <= -cfg_.c2 * dg0) {
                    alpha_out = a;
                    return true;
                }
                if (dg * (ahi - alo) >= 0.0) {
                    ahi = alo;
                    fhi = flo;
                }
                alo = a;
                flo = fa;
            }
            if (std::abs(ahi - alo) < 1e-14 * std::max(1.0, std::abs(alo))) break;
        }
        return false;
    }

    static double dot_dir(const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }

    LbfgsConfig cfg_;
    std::size_t n_;
    std::vector<std::tuple<std::vector<double>, std::vector<double>, double>> history_;
    long failures_ = 0;
    double first_alpha_ = 1.0;
    double fallback_alpha_ = 1e-3;
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

enum class OptimizerKind { adam, lbfgs, hybrid };

inline OptimizerKind optimizer_kind_from(const std::string& s) {
    if (s == "adam" || s == "ADAM") return OptimizerKind::adam;
    if (s == "lbfgs" || s == "LBFGS") return OptimizerKind::lbfgs;
    if (s == "hybrid" || s == "adam+lbfgs") return OptimizerKind::hybrid;
    throw ConfigError("unknown optimizer '" + s + "'");
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    AdamConfig adam;
    LbfgsConfig lbfgs;
    long adam_epochs = 0;   // hybrid phase split
    long lbfgs_epochs = 0;
};

struct TrainRecordRow {
    long tau = 0;
    double loss_total = 0.0;
    double loss_data = 0.0;
    double loss_residual = 0.0;
    double rel_l2 = std::nan("");
    double theta_drift = 0.0;
};

struct TrainResult {
    std::vector<TrainRecordRow> records;
    std::vector<double> theta;
    long line_search_failures = 0;
};

/// tau in {0, 10, 100, ...} plus the final epoch.
inline std::vector<long> geometric_schedule(long epochs) {
    std::vector<long> taus{0};
    for (long t = 10; t < epochs; t *= 10) taus.push_back(t);
    if (epochs > 0) taus.push_back(epochs);
    return taus;
}

/// Per-snapshot callback: (tau, theta, current loss).
using SnapshotHook =
    std::function<void(long, std::span<const double>, const LossBreakdown&)>;

struct LossObjective {
    std::function<LossBreakdown(std::span<const double>, std::span<double>)> fn;
    LossBreakdown last;
    double operator()(std::span<const double> theta, std::span<double> grad) {
        last = fn(theta, grad);
        return last.total;
    }
};

/// Deterministic full-batch training with snapshots at the given taus.
/// `error_fn` (optional) supplies the relative L2 metric per snapshot.
inline TrainResult train_loop(
    const std::function<LossBreakdown(std::span<const double>, std::span<double>)>& loss_fn,
    std::vector<double> theta, const OptimizerConfig& opt, long epochs,
    std::vector<long> snapshot_taus, const std::function<double(std::span<const double>)>& error_fn,
    const SnapshotHook& hook = nullptr) {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (opt.kind == OptimizerKind::hybrid && opt.adam_epochs + opt.lbfgs_epochs != epochs)
        throw ConfigError("hybrid phases must sum to the epoch count");

    const std::vector<double> theta0 = theta;
    std::vector<double> grad(theta.size(), 0.0);
    std::sort(snapshot_taus.begin(), snapshot_taus.end());
    snapshot_taus.erase(std::unique(snapshot_taus.begin(), snapshot_taus.end()),
                        snapshot_taus.end());

    TrainResult result;
    LossBreakdown current = loss_fn(theta, grad);
    auto record_snapshot = [&](long tau) {
        if (!std::isfinite(current.total))
            throw NonFiniteLoss("loss is not finite at tau=" + std::to_string(tau));
        TrainRecordRow row;
        row.tau = tau;
        row.loss_total = current.total;
        row.loss_data = current.data;
        row.loss_residual = current.residual;
        double drift = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double d = theta[i] - theta0[i];
            drift += d * d;
        }
        row.theta_drift = std::sqrt(drift);
        if (error_fn) row.rel_l2 = error_fn(theta);
        result.records.push_back(row);
        if (hook) hook(tau, theta, current);
    };

    std::size_t next_snap = 0;
    if (next_snap < snapshot_taus.size() && snapshot_taus[next_snap] == 0) {
        record_snapshot(0);
        ++next_snap;
    }

    AdamState adam_state;
    Lbfgs lbfgs(opt.lbfgs, theta.size());
    Objective obj = [&](std::span<const double> th, std::span<double> g) {
        current = loss_fn(th, g);
        return current.total;
    };

    const long adam_until = opt.kind == OptimizerKind::adam
                                ? epochs
                                : (opt.kind == OptimizerKind::hybrid ? opt.adam_epochs : 0);
    double lbfgs_loss = current.total;
    bool lbfgs_primed = false;
    for (long tau = 1; tau <= epochs; ++tau) {
        if (tau <= adam_until) {
            adam_step(adam_state, theta, grad, opt.adam);
            current = loss_fn(theta, grad);
        } else {
            if (!lbfgs_primed) {
                current = loss_fn(theta, grad);
                lbfgs_loss = current.total;
                lbfgs_primed = true;
            }
            std::vector<double> theta_v = theta;
            std::vector<double> grad_v = grad;
            lbfgs.step(obj, theta_v, grad_v, lbfgs_loss);
            theta = std::move(theta_v);
            grad = std::move(grad_v);
        }
        if (!std::isfinite(current.total))
            throw NonFiniteLoss("loss diverged at tau=" + std::to_string(tau));
        if (next_snap < snapshot_taus.size() && snapshot_taus[next_snap] == tau) {
            record_snapshot(tau);
            ++next_snap;
        }
    }
    result.line_search_failures = lbfgs.failures();
    result.theta = std::move(theta);
    return result;
}

/// Physics-informed training on a sampled set.
inline TrainResult train(const PdeProblem& problem, const NetworkSpec& spec,
                         std::vector<double> theta0, const TrainingSet& set,
                         const OptimizerConfig& opt, long epochs,
                         std::vector<long> snapshot_taus, const LossSpec& weights = {},
                         const SnapshotHook& hook = nullptr, bool with_error = true,
                         int error_grid = 128) {
    auto pinn = std::make_shared<PinnLoss>(problem, spec, set, weights);
    auto loss_fn = [pinn](std::span<const double> th, std::span<double> g) {
        return (*pinn)(th, g);
    };
    std::function<double(std::span<const double>)> err;
    if (with_error && problem.has_exact())
        err = [&](std::span<const double> th) {
            return exact_error(problem, spec, th, error_grid, error_grid);
        };
    return train_loop(loss_fn, std::move(theta0), opt, epochs, std::move(snapshot_taus), err, hook);
}

/// Supervised training (NTK validation tasks).
inline TrainResult train_supervised(const NetworkSpec& spec, std::vector<double> theta0,
                                    const SupervisedSet& set, const OptimizerConfig& opt,
                                    long epochs, std::vector<long> snapshot_taus,
                                    const SnapshotHook& hook = nullptr) {
    auto loss = std::make_shared<SupervisedLoss>(spec, set);
    auto loss_fn = [loss](std::span<const double> th, std::span<double> g) {
        return (*loss)(th, g);
    };
    return train_loop(loss_fn, std::move(theta0), opt, epochs, std::move(snapshot_taus), nullptr,
                      hook);
}

// ---------------------------------------------------------------------------
// Linearized (frozen-kernel) dynamics
// ---------------------------------------------------------------------------

/// Solve d psi/d tau = -K (psi - targets) with K frozen, by eigendecomposition:
/// psi(tau) = targets + V exp(-Lambda tau) V^T (psi0 - targets).
inline std::vector<Vector> integrate_linearized(const Matrix& kernel, const Vector& psi0,
                                                const Vector& targets,
                                                const std::vector<double>& tau_grid) {
    if (kernel.rows() != kernel.cols() || kernel.rows() != psi0.size() ||
        psi0.size() != targets.size())
        throw ConfigError("linearized dynamics dimensions disagree");
    if (max_asymmetry(kernel) > 1e-10 * std::max(1.0, kernel.cwiseAbs().maxCoeff()))
        throw NonSymmetric("kernel must be symmetric");
    SymmetricEigenSolver es(kernel);
    const Vector c0 = es.vectors().transpose() * (psi0 - targets);
    std::vector<Vector> out;
    out.reserve(tau_grid.size());
    for (double tau : tau_grid) {
        Vector decayed(c0.size());
        for (Eigen::Index i = 0; i < c0.size(); ++i)
            decayed[i] = std::exp(-es.values()[i] * tau) * c0[i];
        out.push_back(targets + es.vectors() * decayed);
    }
    return out;
}

} // namespace ntkkan
