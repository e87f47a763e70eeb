#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ntkkan/basis.hpp"
#include "ntkkan/engine.hpp"
#include "ntkkan/linalg.hpp"
#include "ntkkan/pde.hpp"
#include "ntkkan/rng.hpp"
#include "ntkkan/training.hpp"

namespace ntkkan {

// ---------------------------------------------------------------------------
// Jacobians and block Gram matrices
// ---------------------------------------------------------------------------

/// Rows d(op u)(x_p)/d theta for one operator over a batch of physical points.
inline Matrix op_jacobian(const PdeProblem& problem, const NetworkSpec& spec,
                          std::span<const double> theta, GroupOp op, const Matrix& phys_points) {
    const int M = static_cast<int>(phys_points.cols());
    const std::size_t P = param_count(spec);
    Matrix rows = Matrix::Zero(M, static_cast<Eigen::Index>(P));
    if (M == 0) return rows;
    const Matrix scaled = problem.scaling.scale_batch(phys_points);

    if (op == GroupOp::Residual) {
        const auto& rs = problem.residual_spec;
        std::vector<Evaluator> evals;
        for (const auto& req : rs.seeds) {
            evals.emplace_back(spec, theta);
            evals.back().forward(scaled, SeedDirection{req.dim, problem.scaling.seed_scale(req.dim)},
                                 req.order);
        }
        // per-point linearization weights
        DerivBundle b;
        for (std::size_t s = 0; s < rs.seeds.size(); ++s) {
            Matrix seed = Matrix::Zero(rs.seeds[s].order + 1, M);
            for (int p = 0; p < M; ++p) {
                for (std::size_t s2 = 0; s2 < rs.seeds.size(); ++s2)
                    for (int c = 0; c <= rs.seeds[s2].order; ++c)
                        b.derivs[s2][static_cast<std::size_t>(c)] =
                            detail::kFactorial[c] * evals[s2].out_at(c, p);
                double w[DerivBundle::kMaxSeeds][kMaxJetOrder + 1];
                rs.linearize(b, w);
                for (int c = 0; c <= rs.seeds[s].order; ++c)
                    seed(c, p) = w[s][c] * detail::kFactorial[c];
            }
            evals[s].backward_rows(seed, rows.data(), P);
        }
        // Eigen stores rows col-major; backward_rows wrote row-major. Fix up.
        return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            rows.data(), M, static_cast<Eigen::Index>(P));
    }

    const int ord = detail::op_order(op);
    Evaluator ev(spec, theta);
    ev.forward(scaled, detail::op_seed(problem, op), ord);
    Matrix seed = Matrix::Zero(ord + 1, M);
    for (int p = 0; p < M; ++p) seed(ord, p) = detail::kFactorial[ord];
    ev.backward_rows(seed, rows.data(), P);
    return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        rows.data(), M, static_cast<Eigen::Index>(P));
}

/// Value-operator Jacobian for supervised tasks on network-space inputs.
inline Matrix value_jacobian(const NetworkSpec& spec, std::span<const double> theta,
                             const Matrix& xs) {
    const int M = static_cast<int>(xs.cols());
    const std::size_t P = param_count(spec);
    Matrix rows = Matrix::Zero(M, static_cast<Eigen::Index>(P));
    Evaluator ev(spec, theta);
    ev.forward(xs, SeedDirection{-1, 0.0}, 0);
    Matrix seed = Matrix::Ones(1, M);
    ev.backward_rows(seed, rows.data(), P);
    return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        rows.data(), M, static_cast<Eigen::Index>(P));
}

/// Exact Gram J J^T with the upper triangle mirrored onto the lower.
inline Matrix gram(const Matrix& jacobian) {
    const int n = static_cast<int>(jacobian.rows());
    Matrix k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = jacobian.row(i).dot(jacobian.row(j));
            k(i, j) = v;
            k(j, i) = v;
        }
    return k;
}

/// Tagged sample group for NTK assembly.
struct TaggedPoints {
    std::string label;
    GroupOp op;
    Matrix points;  // d x M physical
};

/// Labeled symmetric block Gram matrix over tagged groups.
struct NtkBlocks {
    std::vector<std::string> labels;
    std::vector<int> sizes;
    Matrix full;

    int offset(int g) const {
        int o = 0;
        for (int i = 0; i < g; ++i) o += sizes[static_cast<std::size_t>(i)];
        return o;
    }
    int dim() const { return static_cast<int>(full.rows()); }
    Matrix block(int gi, int gj) const {
        return full.block(offset(gi), offset(gj), sizes[static_cast<std::size_t>(gi)],
                          sizes[static_cast<std::size_t>(gj)]);
    }
    int group_index(const std::string& label) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return static_cast<int>(i);
        throw ConfigError("no NTK group '" + label + "'");
    }
};

/// Empirical NTK over tagged groups: stacked Jacobians, exact Gram.
inline NtkBlocks empirical_ntk(const PdeProblem& problem, const NetworkSpec& spec,
                               std::span<const double> theta,
                               const std::vector<TaggedPoints>& groups) {
    NtkBlocks out;
    int total = 0;
    for (const auto& g : groups) {
        out.labels.push_back(g.label);
        out.sizes.push_back(static_cast<int>(g.points.cols()));
        total += static_cast<int>(g.points.cols());
    }
    const std::size_t P = param_count(spec);
    Matrix jac(total, static_cast<Eigen::Index>(P));
    int row = 0;
    for (const auto& g : groups) {
        jac.middleRows(row, g.points.cols()) = op_jacobian(problem, spec, theta, g.op, g.points);
        row += static_cast<int>(g.points.cols());
    }
    out.full = gram(jac);
    return out;
}

/// Groups from a training set (condition groups in order, then residual),
/// subsampled deterministically to at most `max_per_group` points.
inline std::vector<TaggedPoints> ntk_groups_from(const TrainingSet& set, int max_per_group,
                                                 std::uint64_t subsample_seed) {
    std::vector<TaggedPoints> groups;
    auto take = [&](const std::string& label, GroupOp op, const Matrix& pts) {
        const int n = static_cast<int>(pts.cols());
        if (n <= max_per_group) {
            groups.push_back({label, op, pts});
            return;
        }
        Rng rng(subsample_seed ^ std::hash<std::string>{}(label));
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.uniform() * (i + 1));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        Matrix sel(pts.rows(), max_per_group);
        std::sort(idx.begin(), idx.begin() + max_per_group);
        for (int c = 0; c < max_per_group; ++c) sel.col(c) = pts.col(idx[static_cast<std::size_t>(c)]);
        groups.push_back({label, op, sel});
    };
    for (const auto& g : set.condition_groups) take(g.label, g.op, g.points);
    take("r", GroupOp::Residual, set.residual_points);
    return groups;
}

// ---------------------------------------------------------------------------
// Spectrum and entropy
// ---------------------------------------------------------------------------

/// Shannon entropy of the normalized absolute eigenvalue distribution,
/// natural log, 0 log 0 := 0.
inline double spectral_entropy(std::span<const double> eigenvalues) {
    double sum = 0.0;
    for (double l : eigenvalues) sum += std::abs(l);
    if (sum == 0.0) return 0.0;
    double h = 0.0;
    for (double l : eigenvalues) {
        const double p = std::abs(l) / sum;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

struct SpectrumReport {
    std::vector<double> eigenvalues;  // descending
    double entropy = 0.0;
    double trace = 0.0;
    double cond_proxy = std::nan("");  // lambda_max / smallest positive lambda
    long tau = 0;
    std::string block_label;
};

inline SpectrumReport spectrum(const Matrix& k, double sym_tol = 1e-10) {
    SymmetricEigenSolver es(k, sym_tol);
    SpectrumReport rep;
    rep.eigenvalues.assign(es.values().data(), es.values().data() + es.values().size());
    std::reverse(rep.eigenvalues.begin(), rep.eigenvalues.end());
    rep.entropy = spectral_entropy(rep.eigenvalues);
    rep.trace = k.trace();
    const double lmax = rep.eigenvalues.empty() ? 0.0 : rep.eigenvalues.front();
    double lmin_pos = std::nan("");
    for (auto it = rep.eigenvalues.rbegin(); it != rep.eigenvalues.rend(); ++it)
        if (*it > 0.0) {
            lmin_pos = *it;
            break;
        }
    if (lmax > 0.0 && lmin_pos > 0.0) rep.cond_proxy = lmax / lmin_pos;
    const double upper = std::log(static_cast<double>(std::max<std::size_t>(1, rep.eigenvalues.size())));
    if (rep.entropy < -1e-12 || rep.entropy > upper + 1e-9)
        throw NoConvergence("spectral entropy outside [0, ln n]");
    return rep;
}

/// Analytic kernel of the single-expansion model: K_ij = sum_n T_n(x_i) T_n(x_j).
inline Matrix cheb_expansion_kernel(int degree, std::span<const double> xs) {
    const int n = static_cast<int>(xs.size());
    Matrix t(n, degree + 1);
    for (int i = 0; i < n; ++i) {
        auto v = cheb_eval_all(degree, xs[i]);
        for (int m = 0; m <= degree; ++m) t(i, m) = v[static_cast<std::size_t>(m)];
    }
    Matrix k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = t.row(i).dot(t.row(j));
            k(i, j) = v;
            k(j, i) = v;
        }
    return k;
}

// ---------------------------------------------------------------------------
// Expected NTK of the one-hidden-layer cKAN (Monte Carlo over the bivariate
// normal pre-activation pair)
// ---------------------------------------------------------------------------

/// Variance/covariance of the hidden pre-activation pair for inputs x, x'.
struct GaussianPairStats {
    double var_x = 0.0;
    double var_xp = 0.0;
    double cov = 0.0;

    void validate() const {
        if (cov * cov > var_x * var_xp * (1.0 + 1e-12))
            throw ConfigError("covariance violates Cauchy-Schwarz");
    }
};

inline GaussianPairStats gaussian_pair_stats(int degree, std::span<const double> x,
                                             std::span<const double> xp) {
    GaussianPairStats st;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto tx = cheb_eval_all(degree, std::tanh(x[i]));
        const auto txp = cheb_eval_all(degree, std::tanh(xp[i]));
        for (int n = 0; n <= degree; ++n) {
            st.var_x += tx[static_cast<std::size_t>(n)] * tx[static_cast<std::size_t>(n)];
            st.var_xp += txp[static_cast<std::size_t>(n)] * txp[static_cast<std::size_t>(n)];
            st.cov += tx[static_cast<std::size_t>(n)] * txp[static_cast<std::size_t>(n)];
        }
    }
    st.validate();
    return st;
}

struct ExpectedNtk {
    double value = 0.0;      // N * (sum C_n + T * D)
    double stderr_ = 0.0;    // Monte Carlo standard error of `value`
    double c_sum = 0.0;      // sum_n C_n estimate
    double d_term = 0.0;     // D estimate
    double feature_inner = 0.0;  // sum_i sum_n T_n(xt_i) T_n(xt'_i)
};

/// Monte Carlo estimate of Theorem 1's closed form for the expected NTK of a
/// one-hidden-layer cKAN with standard-normal coefficients. Inputs are
/// canonically ordered first so the estimate is exactly symmetric in (x, x').
inline ExpectedNtk expected_ntk_mc(int width, int degree, std::span<const double> x_in,
                                   std::span<const double> xp_in, long mc_samples,
                                   std::uint64_t seed) {
    if (mc_samples < 100) throw ConfigError("mc_samples must be >= 100");
    std::vector<double> x(x_in.begin(), x_in.end());
    std::vector<double> xp(xp_in.begin(), xp_in.end());
    if (std::lexicographical_compare(xp.begin(), xp.end(), x.begin(), x.end())) std::swap(x, xp);

    const auto st = gaussian_pair_stats(degree, x, xp);
    const double sigma = std::sqrt(st.var_x);
    const double sigmap = std::sqrt(st.var_xp);
    const double feature_inner = st.cov;

    // degenerate degree 0: T_0 = 1, C_0 = 1, D = 0 (T_0' = 0)
    ExpectedNtk out;
    out.feature_inner = feature_inner;
    if (degree == 0) {
        out.c_sum = 1.0;
        out.d_term = 0.0;
        out.value = static_cast<double>(width);
        out.stderr_ = 0.0;
        return out;
    }

    const double cond_slope = st.cov / st.var_x;
    const double cond_var = std::max(0.0, st.var_xp - st.cov * st.cov / st.var_x);
    const double cond_sd = std::sqrt(cond_var);

    Rng rng(seed);
    const int K = degree + 1;
    std::vector<double> t(static_cast<std::size_t>(K)), tp(static_cast<std::size_t>(K));
    std::vector<double> td(static_cast<std::size_t>(K)), tdp(static_cast<std::size_t>(K));
    double sum = 0.0, sumsq = 0.0, csum = 0.0, dsum = 0.0;
    for (long s = 0; s < mc_samples; ++s) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double h = sigma * z1;
        const double hp = cond_slope * sigma * z1 + cond_sd * z2;
        const double th = std::tanh(h), thp = std::tanh(hp);
        cheb_eval_all(degree, th, t.data());
        cheb_eval_all(degree, thp, tp.data());
        cheb_deriv_all(degree, th, td.data());
        cheb_deriv_all(degree, thp, tdp.data());
        double c_i = 0.0, d_i = 0.0;
        for (int n = 0; n <= degree; ++n) {
            c_i += t[static_cast<std::size_t>(n)] * tp[static_cast<std::size_t>(n)];
            d_i += td[static_cast<std::size_t>(n)] * tdp[static_cast<std::size_t>(n)];
        }
        d_i *= (1.0 - th * th) * (1.0 - thp * thp);
        const double integrand = c_i + feature_inner * d_i;
        sum += integrand;
        sumsq += integrand * integrand;
        csum += c_i;
        dsum += d_i;
    }
    const double mean = sum / mc_samples;
    const double var = std::max(0.0, sumsq / mc_samples - mean * mean);
    out.c_sum = csum / mc_samples;
    out.d_term = dsum / mc_samples;
    out.value = width * mean;
    out.stderr_ = width * std::sqrt(var / mc_samples);
    return out;
}

/// Ensemble average of the empirical NTK entry <grad f(x), grad f(x')> over
/// fresh standard-normal initializations of the one-hidden-layer cKAN.
struct EnsembleNtk {
    double mean = 0.0;
    double stderr_ = 0.0;
};

inline EnsembleNtk ensemble_ntk(int width, int degree, std::span<const double> x,
                                std::span<const double> xp, int n_init, std::uint64_t seed) {
    NetworkSpec spec;
    spec.kind = NetworkKind::cKAN;
    spec.layers = 1;  // the one-hidden-layer architecture of the closed form
    spec.width = width;
    spec.degree = degree;
    spec.input_dim = static_cast<int>(x.size());
    spec.init_mode = InitMode::standard_normal;
    Matrix pts(spec.input_dim, 2);
    for (int i = 0; i < spec.input_dim; ++i) {
        pts(i, 0) = x[static_cast<std::size_t>(i)];
        pts(i, 1) = xp[static_cast<std::size_t>(i)];
    }
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < n_init; ++r) {
        auto theta = init(spec, seed + static_cast<std::uint64_t>(r));
        const Matrix jac = value_jacobian(spec, theta, pts);
        const double k = jac.row(0).dot(jac.row(1));
        sum += k;
        sumsq += k * k;
    }
    EnsembleNtk out;
    out.mean = sum / n_init;
    const double var = std::max(0.0, sumsq / n_init - out.mean * out.mean);
    out.stderr_ = std::sqrt(var / n_init);
    return out;
}

// ---------------------------------------------------------------------------
// Drift (Theorem 2)
// ---------------------------------------------------------------------------

struct DriftReport {
    struct Row {
        long tau = 0;
        double kernel_drift = 0.0;  // ||K(tau) - K(0)||_F
        double theta_drift = 0.0;   // ||theta(tau) - theta(0)||_2
        double bound = 0.0;         // C * theta_drift
        double margin = 0.0;        // bound - kernel_drift
    };
    double b1 = 0.0;  // max per-point gradient norm over the path
    double b2 = 0.0;  // max finite-difference Hessian action along the path
    double c = 0.0;   // 2 b1 b2
    std::vector<Row> rows;
};

/// Empirical Theorem-2 constants from snapshots of the Jacobian, kernel and
/// parameters along a training path.
inline DriftReport drift_report(const std::vector<long>& taus, const std::vector<Matrix>& kernels,
                                const std::vector<Matrix>& jacobians,
                                const std::vector<std::vector<double>>& thetas) {
    const std::size_t s = taus.size();
    if (kernels.size() != s || jacobians.size() != s || thetas.size() != s || s == 0)
        throw MismatchedSnapshots("drift snapshots disagree in length");
    for (std::size_t i = 1; i < s; ++i) {
        if (kernels[i].rows() != kernels[0].rows() || jacobians[i].rows() != jacobians[0].rows() ||
            thetas[i].size() != thetas[0].size())
            throw MismatchedSnapshots("drift snapshots disagree in shape");
    }
    DriftReport rep;
    for (const auto& j : jacobians)
        for (Eigen::Index r = 0; r < j.rows(); ++r) rep.b1 = std::max(rep.b1, j.row(r).norm());
    for (std::size_t i = 1; i < s; ++i) {
        double dtheta = 0.0;
        for (std::size_t q = 0; q < thetas[i].size(); ++q) {
            const double d = thetas[i][q] - thetas[i - 1][q];
            dtheta += d * d;
        }
        dtheta = std::sqrt(dtheta);
        if (dtheta == 0.0) continue;
        for (Eigen::Index r = 0; r < jacobians[i].rows(); ++r) {
            const double dj = (jacobians[i].row(r) - jacobians[i - 1].row(r)).norm();
            rep.b2 = std::max(rep.b2, dj / dtheta);
        }
    }
    rep.c = 2.0 * rep.b1 * rep.b2;
    for (std::size_t i = 0; i < s; ++i) {
        DriftReport::Row row;
        row.tau = taus[i];
        row.kernel_drift = (kernels[i] - kernels[0]).norm();
        double dtheta = 0.0;
        for (std::size_t q = 0; q < thetas[i].size(); ++q) {
            const double d = thetas[i][q] - thetas[0][q];
            dtheta += d * d;
        }
        row.theta_drift = std::sqrt(dtheta);
        row.bound = rep.c * row.theta_drift;
        row.margin = row.bound - row.kernel_drift;
        rep.rows.push_back(row);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Width sweep (Theorem 2 corollary)
// ---------------------------------------------------------------------------

struct WidthSweepRow {
    int width = 0;
    double rel_drift = 0.0;  // ||K(final)-K(0)||_F / ||K(0)||_F
};

struct WidthSweepResult {
    std::vector<WidthSweepRow> rows;
    double spearman_rho = 0.0;
};

inline double spearman_rho(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    auto ranks = [n](std::span<const double> v) {
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) { return v[static_cast<std::size_t>(i)] < v[static_cast<std::size_t>(j)]; });
        std::vector<double> r(n);
        for (std::size_t k = 0; k < n; ++k) r[static_cast<std::size_t>(idx[k])] = static_cast<double>(k);
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = ra[i] - rb[i];
        d2 += d * d;
    }
    return 1.0 - 6.0 * d2 / (static_cast<double>(n) * (n * n - 1.0));
}

/// Supervised task used by the drift experiments: y = sin(pi x) on [-1,1].
inline SupervisedSet drift_task(int n_points, std::uint64_t seed) {
    Rng rng(seed);
    SupervisedSet set;
    set.xs = Matrix(1, n_points);
    set.ys.resize(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double x = rng.uniform(-1.0, 1.0);
        set.xs(0, i) = x;
        set.ys[static_cast<std::size_t>(i)] = std::sin(kPi * x);
    }
    return set;
}

/// Final relative kernel drift of a one-hidden-layer cKAN trained on the
/// fixed task with a fixed budget, per width.
inline WidthSweepResult width_sweep_drift(const std::vector<int>& widths, int degree,
                                          int n_points, long epochs, double lr,
                                          std::uint64_t seed) {
    WidthSweepResult out;
    const SupervisedSet task = drift_task(n_points, seed);
    for (int w : widths) {
        NetworkSpec spec;
        spec.kind = NetworkKind::cKAN;
        spec.layers = 1;
        spec.width = w;
        spec.degree = degree;
        spec.input_dim = 1;
        spec.init_mode = InitMode::standard_normal;
        auto theta0 = init(spec, seed + static_cast<std::uint64_t>(w));
        const Matrix k0 = gram(value_jacobian(spec, theta0, task.xs));
        OptimizerConfig opt;
        opt.kind = OptimizerKind::adam;
        opt.adam.lr = lr;
        auto res = train_supervised(spec, theta0, task, opt, epochs, {0, epochs});
        const Matrix k1 = gram(value_jacobian(spec, res.theta, task.xs));
        WidthSweepRow row;
        row.width = w;
        row.rel_drift = (k1 - k0).norm() / std::max(1e-300, k0.norm());
        out.rows.push_back(row);
    }
    std::vector<double> ws, ds;
    for (const auto& r : out.rows) {
        ws.push_back(static_cast<double>(r.width));
        ds.push_back(r.rel_drift);
    }
    out.spearman_rho = widths.size() > 1 ? spearman_rho(ws, ds) : 0.0;
    return out;
}

} // namespace ntkkan
