#include "clc/heads.hpp"

#include "clc/rng.hpp"

namespace clc {

namespace {

template <typename Real>
BasicMatrix<Real> uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    std::vector<Real> v(rows * cols);
    for (auto& x : v) x = static_cast<Real>(rng.uniform(-bound, bound));
    return BasicMatrix<Real>(rows, cols, std::move(v));
}

template <typename Real>
BasicVector<Real> uniform_vector(std::size_t n, double bound, Rng& rng) {
    std::vector<Real> v(n);
    for (auto& x : v) x = static_cast<Real>(rng.uniform(-bound, bound));
    return BasicVector<Real>(std::move(v));
}

template <typename Real>
BasicVector<Real> filled(std::size_t n, Real value) {
    return BasicVector<Real>(std::vector<Real>(n, value));
}

template <typename Real>
void add_outer(BasicMatrix<Real>& m, std::span<const Real> left, std::span<const Real> right) {
    for (std::size_t i = 0; i < left.size(); ++i) {
        for (std::size_t j = 0; j < right.size(); ++j) m(i, j) += left[i] * right[j];
    }
}

template <typename Real>
void add_into(BasicVector<Real>& dst, const BasicVector<Real>& src) {
    for (std::size_t i = 0; i < dst.dim(); ++i) dst[i] += src[i];
}

template <typename Real>
void add_into(BasicMatrix<Real>& dst, const BasicMatrix<Real>& src) {
    auto d = dst.values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

} // namespace

template <typename Real>
void BasicHeadParams<Real>::validate() const {
    const std::size_t k = input_dim();
    const std::size_t h = hidden_dim();
    const std::size_t d = output_dim();
    if (k == 0 || h == 0 || d == 0) {
        throw Error(ErrorKind::ShapeMismatch, "head dimensions must be positive");
    }
    if (b1.dim() != h || ln_gamma.dim() != h || ln_beta.dim() != h || w2.cols() != h || b2.dim() != d) {
        throw Error(ErrorKind::ShapeMismatch, "head parameter shapes disagree with k=" + std::to_string(k) +
                                                  " h=" + std::to_string(h) + " d=" + std::to_string(d));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "dropout_rate must lie in [0, 1), got " + std::to_string(dropout_rate));
    }
}

template <typename Real>
BasicHeadParams<Real> BasicHeadParams<Real>::zeros(std::size_t k, std::size_t h, std::size_t d) {
    BasicHeadParams p;
    p.w1 = BasicMatrix<Real>(h, k);
    p.b1 = BasicVector<Real>(h);
    p.ln_gamma = filled<Real>(h, Real(1));
    p.ln_beta = BasicVector<Real>(h);
    p.w2 = BasicMatrix<Real>(d, h);
    p.b2 = BasicVector<Real>(d);
    p.dropout_rate = 0.0;
    return p;
}

template <typename Real>
BasicHeadParams<Real> BasicHeadParams<Real>::random(std::size_t k, std::size_t h, std::size_t d, std::uint64_t seed,
                                                    double dropout_rate) {
    Rng rng(seed);
    BasicHeadParams p;
    p.w1 = uniform_matrix<Real>(h, k, 1.0 / std::sqrt(double(k)), rng);
    p.b1 = uniform_vector<Real>(h, 0.1, rng);
    p.ln_gamma = filled<Real>(h, Real(1));
    p.ln_beta = BasicVector<Real>(h);
    p.w2 = uniform_matrix<Real>(d, h, 1.0 / std::sqrt(double(h)), rng);
    p.b2 = uniform_vector<Real>(d, 0.1, rng);
    p.dropout_rate = dropout_rate;
    p.rng_seed = seed;
    p.validate();
    return p;
}

template <typename Real>
BasicHeadParamGrads<Real> BasicHeadParamGrads<Real>::zeros_like(const BasicHeadParams<Real>& p) {
    return BasicHeadParamGrads{BasicMatrix<Real>(p.w1.rows(), p.w1.cols()), BasicVector<Real>(p.b1.dim()),
                               BasicVector<Real>(p.ln_gamma.dim()),         BasicVector<Real>(p.ln_beta.dim()),
                               BasicMatrix<Real>(p.w2.rows(), p.w2.cols()), BasicVector<Real>(p.b2.dim())};
}

template <typename Real>
void BasicHeadParamGrads<Real>::accumulate(const BasicHeadParamGrads& other) {
    add_into(w1, other.w1);
    add_into(b1, other.b1);
    add_into(ln_gamma, other.ln_gamma);
    add_into(ln_beta, other.ln_beta);
    add_into(w2, other.w2);
    add_into(b2, other.b2);
}

template <typename Real>
BasicHeadForward<Real> head_forward(const BasicHeadParams<Real>& params, const BasicMatrix<Real>& frames,
                                    HeadMode mode, std::uint64_t dropout_stream) {
    params.validate();
    if (frames.rows() == 0 || frames.cols() != params.input_dim()) {
        throw Error(ErrorKind::ShapeMismatch, "frames " + std::to_string(frames.rows()) + "x" +
                                                  std::to_string(frames.cols()) + " do not fit a head with k=" +
                                                  std::to_string(params.input_dim()));
    }
    const std::size_t h = params.hidden_dim();

    BasicHeadForwardTrace<Real> t;
    t.frame_count = frames.rows();
    t.input_dim = frames.cols();
    t.mode = mode;
    t.pooled = mean_pool_rows(frames);

    t.pre_activation = matvec(params.w1, t.pooled.values());
    for (std::size_t i = 0; i < h; ++i) t.pre_activation[i] += params.b1[i];

    t.post_relu = BasicVector<Real>(h);
    for (std::size_t i = 0; i < h; ++i) t.post_relu[i] = std::max(Real(0), t.pre_activation[i]);

    Real mean = 0;
    for (std::size_t i = 0; i < h; ++i) mean += t.post_relu[i];
    mean /= static_cast<Real>(h);
    Real var = 0;
    for (std::size_t i = 0; i < h; ++i) {
        const Real c = t.post_relu[i] - mean;
        var += c * c;
    }
    var /= static_cast<Real>(h);
    t.ln_mean = mean;
    t.ln_variance = var;
    const Real inv_std = Real(1) / std::sqrt(var + Real(kLayerNormEpsilon));

    t.normalized = BasicVector<Real>(h);
    for (std::size_t i = 0; i < h; ++i) t.normalized[i] = (t.post_relu[i] - mean) * inv_std;

    t.dropout_output = BasicVector<Real>(h);
    if (mode == HeadMode::train && params.dropout_rate > 0.0) {
        Rng rng(params.rng_seed, dropout_stream);
        const Real scale = Real(1) / static_cast<Real>(1.0 - params.dropout_rate);
        t.dropout_mask.resize(h);
        for (std::size_t i = 0; i < h; ++i) {
            t.dropout_mask[i] = rng.bernoulli(params.dropout_rate) ? 0 : 1;
            const Real y = params.ln_gamma[i] * t.normalized[i] + params.ln_beta[i];
            t.dropout_output[i] = t.dropout_mask[i] ? y * scale : Real(0);
        }
    } else {
        for (std::size_t i = 0; i < h; ++i) {
            t.dropout_output[i] = params.ln_gamma[i] * t.normalized[i] + params.ln_beta[i];
        }
    }

    t.output = matvec(params.w2, t.dropout_output.values());
    for (std::size_t i = 0; i < params.output_dim(); ++i) t.output[i] += params.b2[i];

    BasicVector<Real> out = t.output;
    return {std::move(out), std::move(t)};
}

template <typename Real>
BasicHeadBackward<Real> head_backward(const BasicHeadParams<Real>& params, const BasicHeadForwardTrace<Real>& trace,
                                      const BasicVector<Real>& grad_output) {
    const std::size_t k = params.input_dim();
    const std::size_t h = params.hidden_dim();
    const std::size_t d = params.output_dim();
    if (trace.input_dim != k || trace.pooled.dim() != k || trace.post_relu.dim() != h ||
        trace.output.dim() != d || trace.frame_count == 0 ||
        (!trace.dropout_mask.empty() && trace.dropout_mask.size() != h)) {
        throw Error(ErrorKind::TraceMismatch, "trace was not produced by a head of this shape");
    }
    if (grad_output.dim() != d) {
        throw Error(ErrorKind::ShapeMismatch, "grad_output has dim " + std::to_string(grad_output.dim()) +
                                                  ", head output dim is " + std::to_string(d));
    }

    auto grads = BasicHeadParamGrads<Real>::zeros_like(params);

    // Output projection.
    add_outer<Real>(grads.w2, grad_output.values(), trace.dropout_output.values());
    grads.b2 = grad_output;
    BasicVector<Real> g = matvec_transposed(params.w2, grad_output.values());

    // Dropout: the mask is fixed by the trace.
    if (!trace.dropout_mask.empty()) {
        const Real scale = Real(1) / static_cast<Real>(1.0 - params.dropout_rate);
        for (std::size_t i = 0; i < h; ++i) g[i] = trace.dropout_mask[i] ? g[i] * scale : Real(0);
    }

    // LayerNorm affine.
    BasicVector<Real> g_norm(h);
    for (std::size_t i = 0; i < h; ++i) {
        grads.ln_gamma[i] = g[i] * trace.normalized[i];
        grads.ln_beta[i] = g[i];
        g_norm[i] = g[i] * params.ln_gamma[i];
    }

    // LayerNorm normalization: dx = (g - mean(g) - xhat * mean(g * xhat)) / std
    Real mean_g = 0;
    Real mean_gx = 0;
    for (std::size_t i = 0; i < h; ++i) {
        mean_g += g_norm[i];
        mean_gx += g_norm[i] * trace.normalized[i];
    }
    mean_g /= static_cast<Real>(h);
    mean_gx /= static_cast<Real>(h);
    const Real inv_std = Real(1) / std::sqrt(trace.ln_variance + Real(kLayerNormEpsilon));

    BasicVector<Real> g_pre(h);
    for (std::size_t i = 0; i < h; ++i) {
        const Real g_relu = (g_norm[i] - mean_g - trace.normalized[i] * mean_gx) * inv_std;
        g_pre[i] = trace.pre_activation[i] > Real(0) ? g_relu : Real(0);
    }

    add_outer<Real>(grads.w1, g_pre.values(), trace.pooled.values());
    grads.b1 = g_pre;
    const BasicVector<Real> g_pooled = matvec_transposed(params.w1, g_pre.values());

    BasicMatrix<Real> g_frames(trace.frame_count, k);
    const Real inv_t = Real(1) / static_cast<Real>(trace.frame_count);
    for (std::size_t r = 0; r < trace.frame_count; ++r) {
        for (std::size_t c = 0; c < k; ++c) g_frames(r, c) = g_pooled[c] * inv_t;
    }
    return {std::move(grads), std::move(g_frames)};
}

template <typename Real>
BasicHeadSet<Real> BasicHeadSet<Real>::random(std::size_t k, std::size_t h, std::size_t d, std::uint64_t seed,
                                              double dropout_rate) {
    return BasicHeadSet{BasicHeadParams<Real>::random(k, h, d, seed * 3 + 0, dropout_rate),
                        BasicHeadParams<Real>::random(k, h, d, seed * 3 + 1, dropout_rate),
                        BasicHeadParams<Real>::random(k, h, d, seed * 3 + 2, dropout_rate)};
}

#define CLC_INSTANTIATE_HEADS(Real)                                                                                    \
    template struct BasicHeadParams<Real>;                                                                             \
    template struct BasicHeadParamGrads<Real>;                                                                         \
    template struct BasicHeadSet<Real>;                                                                                \
    template BasicHeadForward<Real> head_forward(const BasicHeadParams<Real>&, const BasicMatrix<Real>&, HeadMode,     \
                                                 std::uint64_t);                                                       \
    template BasicHeadBackward<Real> head_backward(const BasicHeadParams<Real>&, const BasicHeadForwardTrace<Real>&,   \
                                                   const BasicVector<Real>&);

CLC_INSTANTIATE_HEADS(float)
CLC_INSTANTIATE_HEADS(double)

} // namespace clc
