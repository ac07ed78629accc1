#include "clc/losses.hpp"

#include <algorithm>
#include <cmath>

namespace clc {

void LossConfig::validate() const {
    const double weights[] = {alpha, beta, gamma, kappa, lambda, delta};
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) {
            throw Error(ErrorKind::InvalidConfig, "loss weights must be finite and non-negative");
        }
    }
    if (!std::isfinite(tau) || !(tau > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "tau must be positive, got " + std::to_string(tau));
    }
}

namespace {

template <typename Real>
struct NormalizedRows {
    BasicMatrix<Real> unit;
    std::vector<Real> norms;
};

template <typename Real>
NormalizedRows<Real> normalize_rows(const BasicMatrix<Real>& m, const char* what) {
    NormalizedRows<Real> out{BasicMatrix<Real>(m.rows(), m.cols()), std::vector<Real>(m.rows())};
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const Real n = norm(m.row(r));
        if (!(n > Real(kDefaultNormEpsilon))) {
            throw Error(ErrorKind::ZeroNorm, std::string(what) + " row " + std::to_string(r) + " has zero norm");
        }
        out.norms[r] = n;
        auto src = m.row(r);
        auto dst = out.unit.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) dst[c] = src[c] / n;
    }
    return out;
}

// Pull a gradient taken w.r.t. x/|x| back to x:  (g - xhat (xhat . g)) / |x|
template <typename Real>
void backprop_normalization(std::span<Real> grad, std::span<const Real> unit, Real norm_value) {
    const Real proj = dot(unit, grad);
    for (std::size_t c = 0; c < grad.size(); ++c) grad[c] = (grad[c] - unit[c] * proj) / norm_value;
}

template <typename Real>
void backprop_normalization(BasicMatrix<Real>& grads, const NormalizedRows<Real>& rows) {
    for (std::size_t r = 0; r < grads.rows(); ++r) {
        backprop_normalization<Real>(grads.row(r), rows.unit.row(r), rows.norms[r]);
    }
}

template <typename Real>
void require_unit(std::span<const Real> v, const char* what) {
    const double n = static_cast<double>(norm(v));
    if (std::abs(n - 1.0) > kNormalizedTolerance) {
        throw Error(ErrorKind::NotNormalized, std::string(what) + " has norm " + std::to_string(n));
    }
}

struct PfTermSpec {
    double weight;
    const char* name;
};

template <typename Real>
void check_pf_batch(const BasicPfBatch<Real>& batch, const LossConfig& cfg) {
    cfg.validate();
    const std::size_t n = batch.size();
    if (n < 2) {
        throw Error(ErrorKind::BatchTooSmall, "contrastive terms need N >= 2, got " + std::to_string(n));
    }
    const std::size_t d = batch.current.cols();
    auto check = [&](const BasicMatrix<Real>& m, double weight, const char* name) {
        if (weight == 0.0 && m.size() == 0) return;
        if (m.rows() != n || m.cols() != d) {
            throw Error(ErrorKind::ShapeMismatch, std::string(name) + " is " + std::to_string(m.rows()) + "x" +
                                                      std::to_string(m.cols()) + ", current is " +
                                                      std::to_string(n) + "x" + std::to_string(d));
        }
    };
    check(batch.past, cfg.beta, "past");
    check(batch.future, cfg.alpha, "future");
}

template <typename Real>
BasicMatrix<Real> zeros_like(const BasicMatrix<Real>& m) {
    return BasicMatrix<Real>(m.rows(), m.cols());
}

// Per-term result in normalized coordinates: the sum of row losses, and the
// gradient contributions to the anchors and to the other side.
template <typename Real>
struct TermPartial {
    Real row_loss_sum = 0;
    BasicMatrix<Real> grad_anchor;
    BasicMatrix<Real> grad_other;
};

// Accumulates coef/tau-scaled outer contributions of one similarity entry.
// Shared by the dense and chunked paths so both add in the same order.
template <typename Real>
inline void accumulate_pair(std::span<Real> g_anchor, std::span<Real> g_other, std::span<const Real> anchor,
                            std::span<const Real> other, Real scaled) {
    for (std::size_t c = 0; c < anchor.size(); ++c) {
        g_anchor[c] += scaled * other[c];
        g_other[c] += scaled * anchor[c];
    }
}

template <typename Real>
TermPartial<Real> dense_term(const BasicMatrix<Real>& anchors, const BasicMatrix<Real>& others, Real tau,
                             Real row_weight, std::size_t& peak) {
    const std::size_t n = anchors.rows();
    TermPartial<Real> out{0, zeros_like(anchors), zeros_like(others)};

    BasicMatrix<Real> sims(n, n);
    peak = std::max(peak, sims.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) sims(i, k) = dot(anchors.row(i), others.row(k)) / tau;
    }

    std::vector<Real> lse(n);
    for (std::size_t i = 0; i < n; ++i) {
        lse[i] = log_sum_exp(sims.row(i));
        out.row_loss_sum += lse[i] - sims(i, i);
    }
    if (row_weight == Real(0)) return out;

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const Real p = std::exp(sims(i, k) - lse[i]);
            const Real coef = row_weight * (p - (i == k ? Real(1) : Real(0)));
            accumulate_pair<Real>(out.grad_anchor.row(i), out.grad_other.row(k), anchors.row(i), others.row(k),
                                  coef / tau);
        }
    }
    return out;
}

template <typename Real>
TermPartial<Real> chunked_term(const BasicMatrix<Real>& anchors, const BasicMatrix<Real>& others, Real tau,
                               Real row_weight, std::size_t chunk, std::size_t& peak) {
    const std::size_t n = anchors.rows();
    const std::size_t d = anchors.cols();
    const std::size_t block = std::max<std::size_t>(1, std::min(n, d));
    TermPartial<Real> out{0, zeros_like(anchors), zeros_like(others)};

    std::vector<Real> tile;
    auto fill_tile = [&](std::size_t i0, std::size_t rows, std::size_t k0, std::size_t cols) {
        tile.resize(rows * cols);
        peak = std::max(peak, tile.size());
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                tile[r * cols + c] = dot(anchors.row(i0 + r), others.row(k0 + c)) / tau;
            }
        }
    };

    // Pass 1: streaming log-sum-exp per row.
    std::vector<Real> row_max(n);
    std::vector<Real> row_sum(n);
    std::vector<Real> diag(n);
    for (std::size_t i0 = 0; i0 < n; i0 += block) {
        const std::size_t rows = std::min(block, n - i0);
        for (std::size_t k0 = 0; k0 < n; k0 += chunk) {
            const std::size_t cols = std::min(chunk, n - k0);
            fill_tile(i0, rows, k0, cols);
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t i = i0 + r;
                const Real* s = tile.data() + r * cols;
                Real m = s[0];
                for (std::size_t c = 1; c < cols; ++c) m = std::max(m, s[c]);
                if (k0 == 0) {
                    Real acc = 0;
                    for (std::size_t c = 0; c < cols; ++c) acc += std::exp(s[c] - m);
                    row_max[i] = m;
                    row_sum[i] = acc;
                } else {
                    const Real merged = std::max(row_max[i], m);
                    Real acc = 0;
                    for (std::size_t c = 0; c < cols; ++c) acc += std::exp(s[c] - merged);
                    row_sum[i] = row_sum[i] * std::exp(row_max[i] - merged) + acc;
                    row_max[i] = merged;
                }
                if (i >= k0 && i < k0 + cols) diag[i] = s[i - k0];
            }
        }
    }
    std::vector<Real> lse(n);
    for (std::size_t i = 0; i < n; ++i) {
        lse[i] = row_max[i] + std::log(row_sum[i]);
        out.row_loss_sum += lse[i] - diag[i];
    }
    if (row_weight == Real(0)) return out;

    // Pass 2: gradients, tile by tile.
    for (std::size_t i0 = 0; i0 < n; i0 += block) {
        const std::size_t rows = std::min(block, n - i0);
        for (std::size_t k0 = 0; k0 < n; k0 += chunk) {
            const std::size_t cols = std::min(chunk, n - k0);
            fill_tile(i0, rows, k0, cols);
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t i = i0 + r;
                for (std::size_t c = 0; c < cols; ++c) {
                    const std::size_t k = k0 + c;
                    const Real p = std::exp(tile[r * cols + c] - lse[i]);
                    const Real coef = row_weight * (p - (i == k ? Real(1) : Real(0)));
                    accumulate_pair<Real>(out.grad_anchor.row(i), out.grad_other.row(k), anchors.row(i),
                                          others.row(k), coef / tau);
                }
            }
        }
    }
    return out;
}

template <typename Real, typename TermFn>
BasicPfResult<Real> pf_loss_impl(const BasicPfBatch<Real>& batch, const LossConfig& cfg, TermFn term) {
    check_pf_batch(batch, cfg);
    const std::size_t n = batch.size();
    const Real tau = static_cast<Real>(cfg.tau);
    const Real inv_n = Real(1) / static_cast<Real>(n);

    BasicPfResult<Real> result;
    result.grads.current = zeros_like(batch.current);
    result.grads.past = zeros_like(batch.past);
    result.grads.future = zeros_like(batch.future);

    const auto current = normalize_rows(batch.current, "current");
    BasicMatrix<Real> grad_current_unit = zeros_like(batch.current);

    auto run = [&](const BasicMatrix<Real>& other_raw, double weight, const char* name, Real& mean_out,
                   BasicMatrix<Real>& grad_other_out) -> Real {
        if (other_raw.size() == 0) return 0;
        const auto other = normalize_rows(other_raw, name);
        const Real row_weight = static_cast<Real>(weight) * inv_n;
        TermPartial<Real> part = term(current.unit, other.unit, tau, row_weight, result.peak_similarity_workspace);
        mean_out = part.row_loss_sum * inv_n;
        auto g = grad_current_unit.values();
        auto pg = part.grad_anchor.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += pg[i];
        backprop_normalization(part.grad_other, other);
        grad_other_out = std::move(part.grad_other);
        return part.row_loss_sum;
    };

    const Real future_sum = run(batch.future, cfg.alpha, "future", result.future_mean, result.grads.future);
    const Real past_sum = run(batch.past, cfg.beta, "past", result.past_mean, result.grads.past);
    result.loss = (static_cast<Real>(cfg.alpha) * future_sum + static_cast<Real>(cfg.beta) * past_sum) * inv_n;

    backprop_normalization(grad_current_unit, current);
    result.grads.current = std::move(grad_current_unit);
    return result;
}

} // namespace

template <typename Real>
Real info_nce_row(const BasicVector<Real>& anchor, const BasicMatrix<Real>& candidates, std::size_t positive_index,
                  Real tau) {
    if (!(tau > Real(0))) {
        throw Error(ErrorKind::InvalidConfig, "tau must be positive");
    }
    if (candidates.rows() == 0) {
        throw Error(ErrorKind::EmptyInput, "info_nce_row needs at least one candidate");
    }
    if (positive_index >= candidates.rows()) {
        throw Error(ErrorKind::ShapeMismatch, "positive index " + std::to_string(positive_index) + " out of range");
    }
    if (anchor.dim() != candidates.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "anchor and candidates differ in dimension");
    }
    require_unit(anchor.values(), "anchor");
    std::vector<Real> sims(candidates.rows());
    for (std::size_t k = 0; k < candidates.rows(); ++k) {
        require_unit(candidates.row(k), "candidate");
        sims[k] = dot(anchor.values(), candidates.row(k)) / tau;
    }
    return log_sum_exp(sims) - sims[positive_index];
}

template <typename Real>
BasicMatrix<Real> pairwise_info_nce(const BasicMatrix<Real>& current, const BasicMatrix<Real>& other, Real tau) {
    if (current.cols() != other.cols()) {
        throw Error(ErrorKind::ShapeMismatch, "pairwise_info_nce dimension mismatch");
    }
    const auto a = normalize_rows(current, "current");
    const auto b = normalize_rows(other, "other");
    BasicMatrix<Real> out(current.rows(), other.rows());
    std::vector<Real> sims(other.rows());
    for (std::size_t i = 0; i < current.rows(); ++i) {
        for (std::size_t k = 0; k < other.rows(); ++k) sims[k] = dot(a.unit.row(i), b.unit.row(k)) / tau;
        const Real lse = log_sum_exp(sims);
        for (std::size_t j = 0; j < other.rows(); ++j) out(i, j) = lse - sims[j];
    }
    return out;
}

template <typename Real>
BasicPfResult<Real> pf_loss(const BasicPfBatch<Real>& batch, const LossConfig& cfg) {
    return pf_loss_impl(batch, cfg,
                        [](const BasicMatrix<Real>& a, const BasicMatrix<Real>& o, Real tau, Real w,
                           std::size_t& peak) { return dense_term(a, o, tau, w, peak); });
}

template <typename Real>
BasicPfResult<Real> pf_loss_chunked(const BasicPfBatch<Real>& batch, const LossConfig& cfg, std::size_t chunk_size) {
    if (chunk_size < 1 || chunk_size > batch.size()) {
        throw Error(ErrorKind::BadChunkSize, "chunk size " + std::to_string(chunk_size) + " outside [1, " +
                                                 std::to_string(batch.size()) + "]");
    }
    return pf_loss_impl(batch, cfg,
                        [chunk_size](const BasicMatrix<Real>& a, const BasicMatrix<Real>& o, Real tau, Real w,
                                     std::size_t& peak) { return chunked_term(a, o, tau, w, chunk_size, peak); });
}

template <typename Real>
BasicNBestResult<Real> nbest_loss(const BasicNBestBatch<Real>& batch, const LossConfig& cfg) {
    cfg.validate();
    const std::size_t n = batch.size();
    const std::size_t d = batch.current.cols();
    if (batch.hypotheses.size() != n || batch.labels.size() != n) {
        throw Error(ErrorKind::ShapeMismatch, "n-best batch needs one hypothesis set and one label per sample");
    }

    BasicNBestResult<Real> result;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& hyps = batch.hypotheses[i];
        if (hyps.rows() == 0) {
            throw Error(ErrorKind::EmptyNBest, "sample " + std::to_string(i) + " has no hypotheses");
        }
        if (hyps.cols() != d) {
            throw Error(ErrorKind::ShapeMismatch, "sample " + std::to_string(i) + " hypotheses have dim " +
                                                      std::to_string(hyps.cols()) + ", expected " +
                                                      std::to_string(d));
        }
        if (batch.labels[i] == NBestLabel::rephrase) {
            if (hyps.rows() < 2) {
                throw Error(ErrorKind::NoAlternativeHypothesis,
                            "rephrase sample " + std::to_string(i) + " has a single hypothesis");
            }
            ++result.rephrase_count;
        } else {
            ++result.success_count;
        }
    }

    const Real tau = static_cast<Real>(cfg.tau);
    const Real neg_weight =
        result.rephrase_count ? static_cast<Real>(cfg.gamma) / static_cast<Real>(result.rephrase_count) : Real(0);
    const Real pos_weight =
        result.success_count ? static_cast<Real>(cfg.kappa) / static_cast<Real>(result.success_count) : Real(0);

    const auto current = normalize_rows(batch.current, "current");
    result.grads.current = zeros_like(batch.current);
    result.grads.hypotheses.reserve(n);

    Real neg_sum = 0;
    Real pos_sum = 0;
    std::vector<Real> sims;
    std::vector<Real> dl_ds;
    for (std::size_t i = 0; i < n; ++i) {
        const auto hyps = normalize_rows(batch.hypotheses[i], "hypotheses");
        const std::size_t k_count = hyps.unit.rows();
        const auto anchor = current.unit.row(i);

        sims.assign(k_count, Real(0));
        for (std::size_t k = 0; k < k_count; ++k) sims[k] = dot(anchor, hyps.unit.row(k)) / tau;
        const Real lse = log_sum_exp(sims);

        dl_ds.assign(k_count, Real(0));
        for (std::size_t k = 0; k < k_count; ++k) dl_ds[k] = std::exp(sims[k] - lse);

        Real sample_loss;
        Real weight;
        if (batch.labels[i] == NBestLabel::rephrase) {
            const std::span<const Real> alternatives(sims.data() + 1, k_count - 1);
            if (cfg.smooth_negative) {
                const Real alt_lse = log_sum_exp(alternatives);
                sample_loss = lse - alt_lse;
                for (std::size_t k = 1; k < k_count; ++k) dl_ds[k] -= std::exp(sims[k] - alt_lse);
            } else {
                // Lowest index wins a tie.
                std::size_t best = 1;
                for (std::size_t k = 2; k < k_count; ++k) {
                    if (sims[k] > sims[best]) best = k;
                }
                sample_loss = lse - sims[best];
                dl_ds[best] -= Real(1);
            }
            neg_sum += sample_loss;
            weight = neg_weight;
        } else {
            sample_loss = lse - sims[0];
            dl_ds[0] -= Real(1);
            pos_sum += sample_loss;
            weight = pos_weight;
        }

        BasicMatrix<Real> g_hyps(k_count, d);
        auto g_anchor = result.grads.current.row(i);
        for (std::size_t k = 0; k < k_count; ++k) {
            const Real scaled = weight * dl_ds[k] / tau;
            accumulate_pair<Real>(g_anchor, g_hyps.row(k), anchor, hyps.unit.row(k), scaled);
        }
        backprop_normalization(g_hyps, hyps);
        result.grads.hypotheses.push_back(std::move(g_hyps));
    }
    backprop_normalization(result.grads.current, current);

    result.negative_mean = result.rephrase_count ? neg_sum / static_cast<Real>(result.rephrase_count) : Real(0);
    result.positive_mean = result.success_count ? pos_sum / static_cast<Real>(result.success_count) : Real(0);
    result.loss = neg_weight * neg_sum + pos_weight * pos_sum;
    return result;
}

double overall_loss(double l_asr, double l_pf, double l_nbest, const LossConfig& cfg) {
    cfg.validate();
    if (!std::isfinite(l_asr) || !std::isfinite(l_pf) || !std::isfinite(l_nbest)) {
        throw Error(ErrorKind::NonFinite, "overall_loss components must be finite");
    }
    return l_asr + cfg.lambda * l_pf + cfg.delta * l_nbest;
}

#define CLC_INSTANTIATE_LOSSES(Real)                                                                                   \
    template Real info_nce_row(const BasicVector<Real>&, const BasicMatrix<Real>&, std::size_t, Real);                 \
    template BasicMatrix<Real> pairwise_info_nce(const BasicMatrix<Real>&, const BasicMatrix<Real>&, Real);            \
    template BasicPfResult<Real> pf_loss(const BasicPfBatch<Real>&, const LossConfig&);                                \
    template BasicPfResult<Real> pf_loss_chunked(const BasicPfBatch<Real>&, const LossConfig&, std::size_t);           \
    template BasicNBestResult<Real> nbest_loss(const BasicNBestBatch<Real>&, const LossConfig&);

CLC_INSTANTIATE_LOSSES(float)
CLC_INSTANTIATE_LOSSES(double)

} // namespace clc
