#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

#include "ntkkan/basis.hpp"
#include "ntkkan/jet.hpp"
#include "ntkkan/linalg.hpp"
#include "ntkkan/network.hpp"

namespace ntkkan {

inline std::atomic<int>& engine_threads_slot() {
    static std::atomic<int> t{1};
    return t;
}
inline void set_threads(int t) { engine_threads_slot().store(t < 1 ? 1 : t); }
inline int get_threads() { return engine_threads_slot().load(); }

/// Run fn(begin, end) over [0, n) split into contiguous chunks. Chunks are
/// disjoint, so writes to per-index outputs stay deterministic.
template <typename Fn>
void parallel_chunks(std::size_t n, Fn&& fn) {
    const int t = get_threads();
    if (t <= 1 || n < 256) {
        fn(static_cast<std::size_t>(0), n);
        return;
    }
    const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(t), n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    const std::size_t chunk = (n + nt - 1) / nt;
    for (std::size_t w = 0; w < nt; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

namespace detail {

inline constexpr int kMaxDegree = 15;

// ---------------------------------------------------------------------------
// Scalar jet kernels (B-spline path and the standalone helpers)
// ---------------------------------------------------------------------------

/// tanh of a truncated series via w = 1 - u^2; w is filled through order J-1
/// (slot J unused) and kept for the adjoint sweep.
inline void tanh_jet_entry(const double* a, int J, double* u, double* w) {
    u[0] = std::tanh(a[0]);
    w[0] = 1.0 - u[0] * u[0];
    for (int c = 1; c <= J; ++c) {
        double s = 0.0;
        for (int m = 1; m <= c; ++m) s += m * a[m] * w[c - m];
        u[c] = s / c;
        if (c < J) {
            double s2 = 0.0;
            for (int i = 0; i <= c; ++i) s2 += u[i] * u[c - i];
            w[c] = -s2;
        }
    }
}

/// silu jets s = z * logistic(z), with the logistic series kept for the adjoint.
struct SiluTape {
    double sig[kMaxJetOrder + 1];
    double v[kMaxJetOrder + 1];  // sigma - sigma^2 series, through J-1
};

inline void silu_jet_entry(const double* z, int J, double* s, SiluTape& tape) {
    double* sg = tape.sig;
    double* v = tape.v;
    sg[0] = 1.0 / (1.0 + std::exp(-z[0]));
    v[0] = sg[0] * (1.0 - sg[0]);
    for (int c = 1; c <= J; ++c) {
        double acc = 0.0;
        for (int m = 1; m <= c; ++m) acc += m * z[m] * v[c - m];
        sg[c] = acc / c;
        if (c < J) {
            double s2 = 0.0;
            for (int i = 0; i <= c; ++i) s2 += sg[i] * sg[c - i];
            v[c] = sg[c] - s2;
        }
    }
    for (int c = 0; c <= J; ++c) {
        double acc = 0.0;
        for (int m = 0; m <= c; ++m) acc += z[m] * sg[c - m];
        s[c] = acc;
    }
}

inline void silu_jet_adjoint_entry(const double* z, int J, const SiluTape& tape,
                                   const double* sbar, double* zbar) {
    const double* sg = tape.sig;
    const double* v = tape.v;
    double sgbar[kMaxJetOrder + 1] = {0, 0, 0, 0, 0};
    double vbar[kMaxJetOrder + 1] = {0, 0, 0, 0, 0};
    for (int m = 0; m <= J; ++m) {
        double az = 0.0, as = 0.0;
        for (int c = m; c <= J; ++c) {
            az += sbar[c] * sg[c - m];
            as += sbar[c] * z[c - m];
        }
        zbar[m] += az;
        sgbar[m] += as;
    }
    for (int c = J; c >= 1; --c) {
        for (int m = 1; m <= c; ++m) {
            const double f = static_cast<double>(m) / c * sgbar[c];
            zbar[m] += f * v[c - m];
            vbar[c - m] += f * z[m];
        }
        sgbar[c - 1] += vbar[c - 1];
        for (int j = 0; j <= c - 1; ++j) sgbar[j] -= 2.0 * sg[c - 1 - j] * vbar[c - 1];
    }
    zbar[0] += v[0] * sgbar[0];
}

/// B-spline jets via de Boor on the truncated series.
struct BsplineScratch {
    double tri[kMaxDegree + 1][kMaxDegree + 1][kMaxJetOrder + 1];
    int span = 0;
};

inline int bspline_find_span(const BsplineBasis& bs, double x) {
    const auto& t = bs.knots;
    const int nk = static_cast<int>(t.size());
    int span = bs.order;
    for (int i = 0; i < nk - 1; ++i) {
        if (t[i] <= x && (x < t[i + 1] || (t[i + 1] >= t.back() && x <= t[i + 1]))) {
            if (t[i] < t[i + 1]) {
                span = i;
                break;
            }
        }
    }
    return span;
}

inline void bspline_jet_entry(const BsplineBasis& bs, const double* z, int J, double* out,
                              int row_stride, BsplineScratch& scr) {
    const int p = bs.order;
    const auto& t = bs.knots;
    const double x = std::clamp(z[0], t.front(), t.back());
    const int span = bspline_find_span(bs, x);
    scr.span = span;
    for (int j = 0; j <= p; ++j)
        for (int c = 0; c <= J; ++c) scr.tri[0][j][c] = 0.0;
    scr.tri[0][p][0] = 1.0;  // window index j maps to basis index span - p + j
    for (int d = 1; d <= p; ++d) {
        for (int j = p - d; j <= p; ++j) {
            const int i = span - p + j;
            double* dst = scr.tri[d][j];
            for (int c = 0; c <= J; ++c) dst[c] = 0.0;
            const double den1 = t[i + d] - t[i];
            if (den1 > 0.0 && j >= p - d + 1) {
                const double* b = scr.tri[d - 1][j];
                const double a0 = (x - t[i]) / den1;
                for (int c = 0; c <= J; ++c) {
                    double s = a0 * b[c];
                    for (int m = 1; m <= c; ++m) s += z[m] / den1 * b[c - m];
                    dst[c] += s;
                }
            }
            const double den2 =
                (i + d + 1 < static_cast<int>(t.size())) ? t[i + d + 1] - t[i + 1] : 0.0;
            if (den2 > 0.0 && j + 1 <= p) {
                const double* b = scr.tri[d - 1][j + 1];
                const double a0 = (t[i + d + 1] - x) / den2;
                for (int c = 0; c <= J; ++c) {
                    double s = a0 * b[c];
                    for (int m = 1; m <= c; ++m) s -= z[m] / den2 * b[c - m];
                    dst[c] += s;
                }
            }
        }
    }
    const int nb = bs.count();
    for (int i = 0; i < nb; ++i)
        for (int c = 0; c <= J; ++c) out[static_cast<std::size_t>(i) * row_stride + c] = 0.0;
    for (int j = 0; j <= p; ++j) {
        const int i = span - p + j;
        if (i < 0 || i >= nb) continue;
        for (int c = 0; c <= J; ++c)
            out[static_cast<std::size_t>(i) * row_stride + c] = scr.tri[p][j][c];
    }
}

/// Adjoint of bspline_jet_entry; replays the stored triangle.
inline void bspline_jet_adjoint_entry(const BsplineBasis& bs, const double* z, int J,
                                      const BsplineScratch& scr, const double* outbar,
                                      int row_stride, double* zbar) {
    const int p = bs.order;
    if (p == 0) return;  // piecewise constant: no z sensitivity
    const auto& t = bs.knots;
    const int span = scr.span;
    const double x = std::clamp(z[0], t.front(), t.back());
    double bar[kMaxDegree + 1][kMaxDegree + 1][kMaxJetOrder + 1] = {};
    const int nb = bs.count();
    for (int j = 0; j <= p; ++j) {
        const int i = span - p + j;
        if (i < 0 || i >= nb) continue;
        for (int c = 0; c <= J; ++c)
            bar[p][j][c] = outbar[static_cast<std::size_t>(i) * row_stride + c];
    }
    for (int d = p; d >= 1; --d) {
        for (int j = p - d; j <= p; ++j) {
            const int i = span - p + j;
            const double* gb = bar[d][j];
            const double den1 = t[i + d] - t[i];
            if (den1 > 0.0 && j >= p - d + 1) {
                const double* b = scr.tri[d - 1][j];
                const double a0 = (x - t[i]) / den1;
                for (int m = 0; m <= J; ++m) {
                    double abar_m = 0.0, bbar_m = 0.0;
                    for (int c = m; c <= J; ++c) {
                        abar_m += gb[c] * b[c - m];
                        bbar_m += gb[c] * ((c - m == 0) ? a0 : z[c - m] / den1);
                    }
                    zbar[m] += abar_m / den1;
                    bar[d - 1][j][m] += bbar_m;
                }
            }
            const double den2 =
                (i + d + 1 < static_cast<int>(t.size())) ? t[i + d + 1] - t[i + 1] : 0.0;
            if (den2 > 0.0 && j + 1 <= p) {
                const double* b = scr.tri[d - 1][j + 1];
                const double a0 = (t[i + d + 1] - x) / den2;
                for (int m = 0; m <= J; ++m) {
                    double abar_m = 0.0, bbar_m = 0.0;
                    for (int c = m; c <= J; ++c) {
                        abar_m += gb[c] * b[c - m];
                        bbar_m += gb[c] * ((c - m == 0) ? a0 : -z[c - m] / den2);
                    }
                    zbar[m] -= abar_m / den2;
                    bar[d - 1][j + 1][m] += bbar_m;
                }
            }
        }
    }
}

/// Resize a coefficient-plane stack without initializing or copying.
inline void ensure_planes(std::vector<Matrix>& v, int count, Eigen::Index rows,
                          Eigen::Index cols) {
    if (static_cast<int>(v.size()) != count) v.resize(static_cast<std::size_t>(count));
    for (auto& m : v)
        if (m.rows() != rows || m.cols() != cols) m.resize(rows, cols);
}

} // namespace detail

/// Batched jet evaluator over one network. Planes are stored points-by-rows
/// so the jet recurrences run as vectorized whole-column array expressions;
/// the per-point loops survive only on the B-spline path, whose knot spans
/// are data dependent. Buffers persist across calls, so a training loop
/// allocates only on its first step.
class Evaluator {
public:
    using RowMajorMap =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    Evaluator(const NetworkSpec& spec, std::span<const double> theta)
        : spec_(spec), layout_(spec) {
        spec_.validate();
        if (spec_.degree > detail::kMaxDegree) throw ConfigError("degree exceeds engine cap of 15");
        if (spec_.kind == NetworkKind::bKAN) {
            if (spec_.bspline_grid + spec_.degree + 1 > detail::kMaxDegree + 2)
                throw ConfigError("bKAN grid+degree exceeds engine feature cap");
            bspline_ = BsplineBasis::uniform(spec_.bspline_grid, spec_.degree);
        }
        tape_.resize(static_cast<std::size_t>(spec_.num_maps()));
        rebind(theta);
    }

    /// Point the evaluator at a new coefficient vector of the same layout.
    void rebind(std::span<const double> theta) {
        if (theta.size() != layout_.total()) throw ConfigError("theta size does not match layout");
        theta_ = theta;
        if (spec_.kind == NetworkKind::bKAN) build_effective_weights();
    }

    const NetworkSpec& spec() const { return spec_; }
    const ParameterLayout& layout() const { return layout_; }

    /// xs: d x M points already scaled into [-1,1]^d. Seeds Taylor slot 1 of
    /// the chosen coordinate with seed.scale.
    void forward(const Matrix& xs, const SeedDirection& seed, int order) {
        Jet::check_order(order);
        J_ = order;
        M_ = static_cast<int>(xs.cols());
        if (xs.rows() != spec_.input_dim) throw ConfigError("input dimension mismatch");
        const int L = spec_.num_maps();

        detail::ensure_planes(input_, J_ + 1, M_, xs.rows());
        input_[0] = xs.transpose();
        if (spec_.kind == NetworkKind::ChebExpansion) {
            for (int p = 0; p < M_; ++p) input_[0](p, 0) = cheb_clamp(input_[0](p, 0));
        }
        for (int c = 1; c <= J_; ++c) input_[static_cast<std::size_t>(c)].setZero();
        if (J_ >= 1 && seed.coordinate_index >= 0 && seed.coordinate_index < spec_.input_dim)
            input_[1].col(seed.coordinate_index).setConstant(seed.scale);

        for (int l = 0; l < L; ++l) {
            const std::vector<Matrix>& in =
                (l == 0) ? input_ : tape_[static_cast<std::size_t>(l) - 1].O;
            auto& tp = tape_[static_cast<std::size_t>(l)];
            if (spec_.kind == NetworkKind::MLP) {
                forward_mlp_layer(l, in, tp, l == L - 1);
            } else {
                forward_kan_layer(l, in, tp);
            }
        }
    }

    int batch() const { return M_; }
    int order() const { return J_; }

    /// Output plane of Taylor coefficient c: an M x 1 column of values.
    const Matrix& out(int c) const { return tape_.back().O[static_cast<std::size_t>(c)]; }
    double out_at(int c, int p) const { return out(c)(p, 0); }

    /// grad += sum_p sum_c seed(c,p) * d out_c(p) / d theta.
    void backward_accumulate(const Matrix& seed, std::span<double> grad) {
        run_backward(seed, grad.data(), nullptr, 0);
    }

    /// rows[p*stride + q] += d(sum_c seed(c,p) out_c(p)) / d theta_q.
    void backward_rows(const Matrix& seed, double* rows, std::size_t stride) {
        run_backward(seed, nullptr, rows, stride);
    }

    /// Pre-activation/squash trace of a single already-run forward (M = 1).
    ActivationTrace trace() const {
        ActivationTrace tr;
        const int L = spec_.num_maps();
        for (int l = 1; l < L; ++l) {
            const auto& src = tape_[static_cast<std::size_t>(l) - 1].O[0];
            std::vector<double> h(static_cast<std::size_t>(src.cols()));
            std::vector<double> z(static_cast<std::size_t>(src.cols()));
            for (Eigen::Index i = 0; i < src.cols(); ++i) {
                h[static_cast<std::size_t>(i)] = src(0, i);
                z[static_cast<std::size_t>(i)] = std::tanh(src(0, i));
            }
            tr.pre.push_back(std::move(h));
            tr.squashed.push_back(std::move(z));
        }
        return tr;
    }

private:
    struct LayerTape {
        std::vector<Matrix> Z;     // tanh of inputs (KAN) / of pre-activations (MLP), M x n
        std::vector<Matrix> W;     // 1 - Z^2 series for the tanh adjoint
        std::vector<Matrix> B;     // KAN features, M x (n_in * fpi)
        std::vector<Matrix> H;     // MLP pre-activations
        std::vector<Matrix> O;     // layer outputs, M x n_out
        std::vector<Matrix> Abar;  // adjoint of the layer outputs
        std::vector<Matrix> Bbar;  // adjoint of the features / pre-activations
        std::vector<Matrix> Wbar;  // tanh-adjoint scratch
        Matrix dw;                 // weight-gradient scratch
    };

    void build_effective_weights() {
        const int nb = bspline_.count();
        const int fpi = 1 + nb;
        weff_.resize(static_cast<std::size_t>(spec_.num_maps()));
        for (int l = 0; l < spec_.num_maps(); ++l) {
            const auto& li = layout_.layers()[static_cast<std::size_t>(l)];
            Matrix& w = weff_[static_cast<std::size_t>(l)];
            w.resize(li.n_out, static_cast<Eigen::Index>(li.n_in) * fpi);
            for (int o = 0; o < li.n_out; ++o)
                for (int i = 0; i < li.n_in; ++i) {
                    const std::size_t base = layout_.index(l, o, i, 0);
                    const double wb = theta_[base + 0];
                    const double ws = theta_[base + 1];
                    w(o, static_cast<Eigen::Index>(i) * fpi) = wb;
                    for (int m = 0; m < nb; ++m)
                        w(o, static_cast<Eigen::Index>(i) * fpi + 1 + m) = ws * theta_[base + 2 + m];
                }
        }
    }

    RowMajorMap weight_map(int l) const {
        const auto& li = layout_.layers()[static_cast<std::size_t>(l)];
        const int fpi = spec_.features_per_input();
        return RowMajorMap(theta_.data() + li.offset, li.n_out,
                           static_cast<Eigen::Index>(li.n_in) * fpi);
    }

    RowMajorMap mlp_weight_map(int l) const {
        const auto& li = layout_.layers()[static_cast<std::size_t>(l)];
        return RowMajorMap(theta_.data() + li.offset, li.n_out, li.n_in);
    }

    /// Plane-wise tanh jets: Z, W filled from in.
    void tanh_planes(const std::vector<Matrix>& in, LayerTape& tp, Eigen::Index n) {
        const int J = J_;
        detail::ensure_planes(tp.Z, J + 1, M_, n);
        detail::ensure_planes(tp.W, J + 1, M_, n);
        tp.Z[0].array() = in[0].array().tanh();
        tp.W[0].array() = 1.0 - tp.Z[0].array().square();
        for (int c = 1; c <= J; ++c) {
            auto zc = tp.Z[static_cast<std::size_t>(c)].array();
            zc = in[1].array() * tp.W[static_cast<std::size_t>(c) - 1].array();
            for (int m = 2; m <= c; ++m)
                zc += m * in[static_cast<std::size_t>(m)].array() *
                      tp.W[static_cast<std::size_t>(c - m)].array();
            zc /= static_cast<double>(c);
            if (c < J) {
                auto& wc = tp.W[static_cast<std::size_t>(c)];
                wc.array() = tp.Z[0].array() * tp.Z[static_cast<std::size_t>(c)].array();
                for (int i = 1; i <= c; ++i)
                    wc.array() += tp.Z[static_cast<std::size_t>(i)].array() *
                                  tp.Z[static_cast<std::size_t>(c - i)].array();
                wc.array() = -wc.array();
            }
        }
    }

    /// Plane-wise adjoint of tanh_planes. zbar (in tp.Bbar-like planes) is
    /// consumed; the input adjoint is accumulated into abar (resized here).
    void tanh_planes_adjoint(const std::vector<Matrix>& in, LayerTape& tp,
                             std::vector<Matrix>& zbar, std::vector<Matrix>& abar,
                             Eigen::Index n) {
        const int J = J_;
        detail::ensure_planes(abar, J + 1, M_, n);
        detail::ensure_planes(tp.Wbar, J + 1, M_, n);
        for (int c = 0; c <= J; ++c) {
            abar[static_cast<std::size_t>(c)].setZero();
            tp.Wbar[static_cast<std::size_t>(c)].setZero();
        }
        for (int c = J; c >= 1; --c) {
            for (int m = 1; m <= c; ++m) {
                const double f = static_cast<double>(m) / c;
                abar[static_cast<std::size_t>(m)].array() +=
                    f * tp.W[static_cast<std::size_t>(c - m)].array() *
                    zbar[static_cast<std::size_t>(c)].array();
                tp.Wbar[static_cast<std::size_t>(c - m)].array() +=
                    f * in[static_cast<std::size_t>(m)].array() *
                    zbar[static_cast<std::size_t>(c)].array();
            }
            for (int j = 0; j <= c - 1; ++j)
                zbar[static_cast<std::size_t>(j)].array() -=
                    2.0 * tp.Z[static_cast<std::size_t>(c - 1 - j)].array() *
                    tp.Wbar[static_cast<std::size_t>(c) - 1].array();
        }
        abar[0].array() += tp.W[0].array() * zbar[0].array();
    }

    void forward_kan_layer(int l, const std::vector<Matrix>& in, LayerTape& tp) {
        const auto& li = layout_.layers()[static_cast<std::size_t>(l)];
        const int n_in = li.n_in;
        const int fpi = spec_.features_per_input();
        const int J = J_;
        const bool squash = spec_.kind != NetworkKind::ChebExpansion;

        if (squash) {
            tanh_planes(in, tp, n_in);
        } else {
            detail::ensure_planes(tp.Z, J + 1, M_, n_in);
            for (int c = 0; c <= J; ++c) tp.Z[static_cast<std::size_t>(c)] = in[static_cast<std::size_t>(c)];
        }

        detail::ensure_planes(tp.B, J + 1, M_, static_cast<Eigen::Index>(n_in) * fpi);
        if (spec_.kind == NetworkKind::bKAN) {
            forward_bspline_features(tp, n_in, fpi);
        } else {
            const int k = spec_.degree;
            for (int i = 0; i < n_in; ++i) {
                const Eigen::Index base = static_cast<Eigen::Index>(i) * fpi;
                tp.B[0].col(base).setOnes();
                for (int c = 1; c <= J; ++c) tp.B[static_cast<std::size_t>(c)].col(base).setZero();
                if (k >= 1)
                    for (int c = 0; c <= J; ++c)
                        tp.B[static_cast<std::size_t>(c)].col(base + 1) =
                            tp.Z[static_cast<std::size_t>(c)].col(i);
                for (int n = 2; n <= k; ++n)
                    for (int c = 0; c <= J; ++c) {
                        auto dst = tp.B[static_cast<std::size_t>(c)].col(base + n).array();
                        dst = tp.Z[0].col(i).array() *
                              tp.B[static_cast<std::size_t>(c)].col(base + n - 1).array();
                        for (int m = 1; m <= c; ++m)
                            dst += tp.Z[static_cast<std::size_t>(m)].col(i).array() *
                                   tp.B[static_cast<std::size_t>(c - m)].col(base + n - 1).array();
                        dst = 2.0 * dst - tp.B[static_cast<std::size_t>(c)].col(base + n - 2).array();
                    }
            }
        }

        detail::ensure_planes(tp.O, J + 1, M_, li.n_out);
        if (spec_.kind == NetworkKind::bKAN) {
            for (int c = 0; c <= J; ++c)
                tp.O[static_cast<std::size_t>(c)].noalias() =
                    tp.B[static_cast<std::size_t>(c)] * weff_[static_cast<std::size_t>(l)].transpose();
        } else {
            const auto w = weight_map(l);
            for (int c = 0; c <= J; ++c)
                tp.O[static_cast<std::size_t>(c)].noalias() =
                    tp.B[static_cast<std::size_t>(c)] * w.transpose();
        }
    }

    void forward_bspline_features(LayerTape& tp, int n_in, int fpi) {
        const int J = J_;
        const int nb = bspline_.count();
        parallel_chunks(static_cast<std::size_t>(M_), [&](std::size_t pb, std::size_t pe) {
            double zj[kMaxJetOrder + 1];
            double feat[(detail::kMaxDegree + 2) * (kMaxJetOrder + 1)];
            detail::BsplineScratch scratch;
            detail::SiluTape stape;
            for (std::size_t p = pb; p < pe; ++p)
                for (int i = 0; i < n_in; ++i) {
                    for (int c = 0; c <= J; ++c)
                        zj[c] = tp.Z[static_cast<std::size_t>(c)](static_cast<Eigen::Index>(p), i);
                    detail::silu_jet_entry(zj, J, feat, stape);
                    detail::bspline_jet_entry(bspline_, zj, J, feat + (kMaxJetOrder + 1),
                                              kMaxJetOrder + 1, scratch);
                    for (int f = 0; f < 1 + nb; ++f)
                        for (int c = 0; c <= J; ++c)
                            tp.B[static_cast<std::size_t>(c)](static_cast<Eigen::Index>(p),
                                                              static_cast<Eigen::Index>(i) * fpi + f) =
                                feat[static_cast<std::size_t>(f) * (kMaxJetOrder + 1) + c];
                }
        });
    }

    void forward_mlp_layer(int l, const std::vector<Matrix>& in, LayerTape& tp, bool is_head) {
        const auto& li = layout_.layers()[static_cast<std::size_t>(l)];
        const int J = J_;
        const auto w = mlp_weight_map(l);
        detail::ensure_planes(tp.H, J + 1, M_, li.n_out);
        for (int c = 0; c <= J; ++c) {
            tp.H[static_cast<std::size_t>(c)].noalias() = in[static_cast<std::size_t>(c)] * w.transpose();
            if (c == 0 && li.has_bias) {
                Eigen::Map<const Vector> b(theta_.data() + layout_.mlp_bias_index(l, 0), li.n_out);
                tp.H[0].rowwise() += b.transpose();
            }
        }
        detail::ensure_planes(tp.O, J + 1, M_, li.n_out);
        if (is_head) {
            for (int c = 0; c <= J; ++c) tp.O[static_cast<std::size_t>(c)] = tp.H[static_cast<std::size_t>(c)];
            return;
        }
        tanh_planes(tp.H, tp, li.n_out);
        for (int c = 0; c <= J; ++c) tp.O[static_cast<std::size_t>(c)] = tp.Z[static_cast<std::size_t>(c)];
    }

    // Shared backward. Exactly one of grad (summed) or rows (per point) is set.
    void run_backward(const Matrix& seed, double* grad, double* rows, std::size_t stride) {
        const int J = J_;
        if (seed.rows() != J + 1 || seed.cols() != M_)
            throw ConfigError("adjoint seed must be (order+1) x batch");
        const int L = spec_.num_maps();
        auto& top = tape_.back();
        detail::ensure_planes(top.Abar, J + 1, M_, 1);
        for (int c = 0; c <= J; ++c)
            top.Abar[static_cast<std::size_t>(c)].col(0) = seed.row(c).transpose();
        for (int l = L - 1; l >= 0; --l) {
            auto& tp = tape_[static_cast<std::size_t>(l)];
            const std::vector<Matrix>& in =
                (l == 0) ? input_ : tape_[static_cast<std::size_t>(l) - 1].O;
            std::vector<Matrix>* abar_in =
                (l == 0) ? nullptr : &tape_[static_cast<std::size_t>(l) - 1].Abar;
            if (spec_.kind == NetworkKind::MLP) {
                backward_mlp_layer(l, in, tp, abar_in, l == L - 1, grad, rows, stride);
            } else {
                backward_kan_layer(l, in, tp, abar_in, grad, rows, stride);
            }
        }
    }

    void backward_kan_layer(int l, const std::vector<Matrix>& in, LayerTape& tp,
                            std::vector<Matrix>* abar_in, double* grad, double* rows,
                            std::size_t stride) {
        const auto& li = layout_.layers()[static_cast<std::size_t>(l)];
        const int n_in = li.n_in;
        const int fpi = spec_.features_per_input();
        const int J = J_;
        const bool is_bspline = spec_.kind == NetworkKind::bKAN;
        const Eigen::Index F = static_cast<Eigen::Index>(n_in) * fpi;
        const std::vector<Matrix>& obar = tp.Abar;

        if (grad) {
            if (tp.dw.rows() != li.n_out || tp.dw.cols() != F) tp.dw.resize(li.n_out, F);
            tp.dw.setZero();
            for (int c = 0; c <= J; ++c)
                tp.dw.noalias() += obar[static_cast<std::size_t>(c)].transpose() *
                                   tp.B[static_cast<std::size_t>(c)];
            scatter_kan_weight_grad(l, tp.dw, grad);
        }
        if (rows) {
            parallel_chunks(static_cast<std::size_t>(M_), [&](std::size_t pb, std::size_t pe) {
                Matrix dw(li.n_out, F);
                for (std::size_t p = pb; p < pe; ++p) {
                    dw.setZero();
                    for (int c = 0; c <= J; ++c)
                        dw.noalias() +=
                            obar[static_cast<std::size_t>(c)].row(static_cast<Eigen::Index>(p)).transpose() *
                            tp.B[static_cast<std::size_t>(c)].row(static_cast<Eigen::Index>(p));
                    scatter_kan_weight_grad(l, dw, rows + p * stride);
                }
            });
        }

        if (!abar_in) return;  // first layer: inputs carry no parameters
        detail::ensure_planes(tp.Bbar, J + 1, M_, F);
        if (is_bspline) {
            for (int c = 0; c <= J; ++c)
                tp.Bbar[static_cast<std::size_t>(c)].noalias() =
                    obar[static_cast<std::size_t>(c)] * weff_[static_cast<std::size_t>(l)];
        } else {
            const auto w = weight_map(l);
            for (int c = 0; c <= J; ++c)
                tp.Bbar[static_cast<std::size_t>(c)].noalias() =
                    obar[static_cast<std::size_t>(c)] * w;
        }

        // feature adjoints -> z adjoints (zbar accumulates into scratch planes)
        detail::ensure_planes(scratch_zbar_, J + 1, M_, n_in);
        for (int c = 0; c <= J; ++c) scratch_zbar_[static_cast<std::size_t>(c)].setZero();
        if (is_bspline) {
            backward_bspline_features(tp, n_in, fpi);
        } else {
            const int k = spec_.degree;
            for (int i = 0; i < n_in; ++i) {
                const Eigen::Index base = static_cast<Eigen::Index>(i) * fpi;
                for (int n = k; n >= 2; --n) {
                    for (int m = 0; m <= J; ++m) {
                        auto zb = scratch_zbar_[static_cast<std::size_t>(m)].col(i).array();
                        auto b1 = tp.Bbar[static_cast<std::size_t>(m)].col(base + n - 1).array();
                        for (int c = m; c <= J; ++c) {
                            const auto bn =
                                tp.Bbar[static_cast<std::size_t>(c)].col(base + n).array();
                            zb += 2.0 * bn *
                                  tp.B[static_cast<std::size_t>(c - m)].col(base + n - 1).array();
                            b1 += 2.0 * bn * tp.Z[static_cast<std::size_t>(c - m)].col(i).array();
                        }
                        tp.Bbar[static_cast<std::size_t>(m)].col(base + n - 2).array() -=
                            tp.Bbar[static_cast<std::size_t>(m)].col(base + n).array();
                    }
                }
                if (k >= 1)
                    for (int m = 0; m <= J; ++m)
                        scratch_zbar_[static_cast<std::size_t>(m)].col(i).array() +=
                            tp.Bbar[static_cast<std::size_t>(m)].col(base + 1).array();
            }
        }

        const bool squash = spec_.kind != NetworkKind::ChebExpansion;
        if (squash) {
            tanh_planes_adjoint(in, tp, scratch_zbar_, *abar_in, n_in);
        } else {
            detail::ensure_planes(*abar_in, J + 1, M_, n_in);
            for (int c = 0; c <= J; ++c)
                (*abar_in)[static_cast<std::size_t>(c)] = scratch_zbar_[static_cast<std::size_t>(c)];
        }
    }

    void backward_bspline_features(LayerTape& tp, int n_in, int fpi) {
        const int J = J_;
        const int nb = bspline_.count();
        parallel_chunks(static_cast<std::size_t>(M_), [&](std::size_t pb, std::size_t pe) {
            double zj[kMaxJetOrder + 1], zbar[kMaxJetOrder + 1];
            double sbar[kMaxJetOrder + 1], sval[kMaxJetOrder + 1];
            double tj[(detail::kMaxDegree + 2) * (kMaxJetOrder + 1)];
            double tb[(detail::kMaxDegree + 2) * (kMaxJetOrder + 1)];
            detail::BsplineScratch scratch;
            detail::SiluTape stape;
            for (std::size_t p = pb; p < pe; ++p)
                for (int i = 0; i < n_in; ++i) {
                    for (int c = 0; c <= J; ++c) {
                        zj[c] = tp.Z[static_cast<std::size_t>(c)](static_cast<Eigen::Index>(p), i);
                        zbar[c] = 0.0;
                        sbar[c] = tp.Bbar[static_cast<std::size_t>(c)](
                            static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i) * fpi);
                    }
                    detail::silu_jet_entry(zj, J, sval, stape);
                    detail::silu_jet_adjoint_entry(zj, J, stape, sbar, zbar);
                    detail::bspline_jet_entry(bspline_, zj, J, tj, kMaxJetOrder + 1, scratch);
                    for (int f = 0; f < nb; ++f)
                        for (int c = 0; c <= J; ++c)
                            tb[static_cast<std::size_t>(f) * (kMaxJetOrder + 1) + c] =
                                tp.Bbar[static_cast<std::size_t>(c)](
                                    static_cast<Eigen::Index>(p),
                                    static_cast<Eigen::Index>(i) * fpi + 1 + f);
                    detail::bspline_jet_adjoint_entry(bspline_, zj, J, scratch, tb,
                                                      kMaxJetOrder + 1, zbar);
                    for (int c = 0; c <= J; ++c)
                        scratch_zbar_[static_cast<std::size_t>(c)](static_cast<Eigen::Index>(p), i) =
                            zbar[c];
                }
        });
    }

    void scatter_kan_weight_grad(int l, const Matrix& dw, double* dst) const {
        const auto& li = layout_.layers()[static_cast<std::size_t>(l)];
        const int fpi = spec_.features_per_input();
        if (spec_.kind == NetworkKind::bKAN) {
            const int nb = bspline_.count();
            for (int o = 0; o < li.n_out; ++o)
                for (int i = 0; i < li.n_in; ++i) {
                    const std::size_t base = layout_.index(l, o, i, 0);
                    const double ws = theta_[base + 1];
                    dst[base + 0] += dw(o, static_cast<Eigen::Index>(i) * fpi);
                    double dws = 0.0;
                    for (int m = 0; m < nb; ++m) {
                        const double g = dw(o, static_cast<Eigen::Index>(i) * fpi + 1 + m);
                        dws += theta_[base + 2 + m] * g;
                        dst[base + 2 + m] += ws * g;
                    }
                    dst[base + 1] += dws;
                }
        } else {
            for (int o = 0; o < li.n_out; ++o)
                for (Eigen::Index q = 0; q < dw.cols(); ++q)
                    dst[li.offset + static_cast<std::size_t>(o) * dw.cols() +
                        static_cast<std::size_t>(q)] += dw(o, q);
        }
    }

    void backward_mlp_layer(int l, const std::vector<Matrix>& in, LayerTape& tp,
                            std::vector<Matrix>* abar_in, bool is_head, double* grad, double* rows,
                            std::size_t stride) {
        const auto& li = layout_.layers()[static_cast<std::size_t>(l)];
        const int J = J_;
        detail::ensure_planes(tp.Bbar, J + 1, M_, li.n_out);
        if (is_head) {
            for (int c = 0; c <= J; ++c)
                tp.Bbar[static_cast<std::size_t>(c)] = tp.Abar[static_cast<std::size_t>(c)];
        } else {
            // copy the output adjoint; the tanh adjoint consumes it
            detail::ensure_planes(scratch_zbar_, J + 1, M_, li.n_out);
            for (int c = 0; c <= J; ++c)
                scratch_zbar_[static_cast<std::size_t>(c)] = tp.Abar[static_cast<std::size_t>(c)];
            tanh_planes_adjoint(tp.H, tp, scratch_zbar_, tp.Bbar, li.n_out);
        }
        const std::vector<Matrix>& hbar = tp.Bbar;
        if (grad) {
            if (tp.dw.rows() != li.n_out || tp.dw.cols() != li.n_in)
                tp.dw.resize(li.n_out, li.n_in);
            tp.dw.setZero();
            for (int c = 0; c <= J; ++c)
                tp.dw.noalias() += hbar[static_cast<std::size_t>(c)].transpose() *
                                   in[static_cast<std::size_t>(c)];
            for (int o = 0; o < li.n_out; ++o)
                for (int i = 0; i < li.n_in; ++i)
                    grad[layout_.mlp_weight_index(l, o, i)] += tp.dw(o, i);
            if (li.has_bias) {
                const Vector db = hbar[0].colwise().sum().transpose();
                for (int o = 0; o < li.n_out; ++o) grad[layout_.mlp_bias_index(l, o)] += db[o];
            }
        }
        if (rows) {
            parallel_chunks(static_cast<std::size_t>(M_), [&](std::size_t pb, std::size_t pe) {
                for (std::size_t p = pb; p < pe; ++p) {
                    double* dst = rows + p * stride;
                    for (int c = 0; c <= J; ++c)
                        for (int o = 0; o < li.n_out; ++o) {
                            const double h =
                                hbar[static_cast<std::size_t>(c)](static_cast<Eigen::Index>(p), o);
                            for (int i = 0; i < li.n_in; ++i)
                                dst[layout_.mlp_weight_index(l, o, i)] +=
                                    h * in[static_cast<std::size_t>(c)](static_cast<Eigen::Index>(p), i);
                        }
                    if (li.has_bias)
                        for (int o = 0; o < li.n_out; ++o)
                            dst[layout_.mlp_bias_index(l, o)] +=
                                hbar[0](static_cast<Eigen::Index>(p), o);
                }
            });
        }
        if (abar_in) {
            const auto w = mlp_weight_map(l);
            detail::ensure_planes(*abar_in, J + 1, M_, li.n_in);
            for (int c = 0; c <= J; ++c)
                (*abar_in)[static_cast<std::size_t>(c)].noalias() =
                    hbar[static_cast<std::size_t>(c)] * w;
        }
    }

    NetworkSpec spec_;
    ParameterLayout layout_;
    std::span<const double> theta_;
    BsplineBasis bspline_;
    std::vector<Matrix> weff_;
    std::vector<Matrix> input_;
    std::vector<Matrix> scratch_zbar_;
    std::vector<LayerTape> tape_;
    int J_ = 0;
    int M_ = 0;
};

/// Plain forward values for a batch of scaled points (d x M), no seeding.
inline Vector forward_many(const NetworkSpec& spec, std::span<const double> theta,
                           const Matrix& xs_scaled) {
    Evaluator ev(spec, theta);
    ev.forward(xs_scaled, SeedDirection{-1, 0.0}, 0);
    return ev.out(0).col(0);
}

/// Scalar forward; shares the order-0 jet path bit for bit.
inline double forward(const NetworkSpec& spec, std::span<const double> theta,
                      std::span<const double> x_scaled) {
    Matrix xs(spec.input_dim, 1);
    for (int i = 0; i < spec.input_dim; ++i) xs(i, 0) = x_scaled[static_cast<std::size_t>(i)];
    return forward_many(spec, theta, xs)[0];
}

/// Seeded jet of the network output at one scaled point, optionally carrying
/// the parameter gradient of every Taylor coefficient.
inline Jet forward_jet(const NetworkSpec& spec, std::span<const double> theta,
                       std::span<const double> x_scaled, const SeedDirection& seed, int order,
                       bool with_param_grads = false) {
    Evaluator ev(spec, theta);
    Matrix xs(spec.input_dim, 1);
    for (int i = 0; i < spec.input_dim; ++i) xs(i, 0) = x_scaled[static_cast<std::size_t>(i)];
    ev.forward(xs, seed, order);
    Jet j = with_param_grads ? Jet(order, ParameterLayout(spec).total()) : Jet(order);
    for (int c = 0; c <= order; ++c) j.coeff(c) = ev.out_at(c, 0);
    if (with_param_grads) {
        Matrix s = Matrix::Zero(order + 1, 1);
        for (int c = 0; c <= order; ++c) {
            s.setZero();
            s(c, 0) = 1.0;
            ev.backward_rows(s, j.grad_row(c), j.nparams());
        }
    }
    return j;
}

/// Forward one point recording hidden pre-activations and squashed values.
inline ActivationTrace forward_trace(const NetworkSpec& spec, std::span<const double> theta,
                                     std::span<const double> x_scaled) {
    Evaluator ev(spec, theta);
    Matrix xs(spec.input_dim, 1);
    for (int i = 0; i < spec.input_dim; ++i) xs(i, 0) = x_scaled[static_cast<std::size_t>(i)];
    ev.forward(xs, SeedDirection{-1, 0.0}, 0);
    return ev.trace();
}

} // namespace ntkkan
