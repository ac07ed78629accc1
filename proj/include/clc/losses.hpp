#pragma once

// Contrastive losses over projection-head outputs.
//
// Past/future objective, for a batch of N samples with current, past and
// future head outputs c_i, p_i, f_i (normalized inside the ops):
//
//   L_future(i) = -log softmax_k(c_i . f_k / tau)[i]
//   L_past(i)   = -log softmax_k(c_i . p_k / tau)[i]
//   L_pf        = (alpha * sum_i L_future(i) + beta * sum_i L_past(i)) / N
//
// N-best objective, per sample with hypothesis embeddings phi_1..phi_K:
//
//   L_pos = -log softmax_k(c . phi_k / tau)[1]
//   L_neg = -log softmax_k(c . phi_k / tau)[j*],  j* = argmax_{j >= 2} c . phi_j
//   L_nbest = gamma / |R| * sum_{R} L_neg + kappa / |S| * sum_{S} L_pos
//
// R holds samples whose utterance triggered a repeat or rephrase, S the rest.
// Gradients are returned with respect to the raw (un-normalized) inputs.

#include <cstddef>
#include <vector>

#include "clc/tensor.hpp"

namespace clc {

struct LossConfig {
    double alpha = 1.0;
    double beta = 0.7;
    double tau = 0.1;
    double gamma = 0.1;
    double kappa = 1.0;
    double lambda = 1.0;
    double delta = 1.0;
    // Optional variant, off by default: replaces the hard max over
    // alternative hypotheses with a log-sum-exp over them.
    bool smooth_negative = false;

    void validate() const;
};

// Any input whose norm differs from 1 by more than this is rejected by
// info_nce_row.
inline constexpr double kNormalizedTolerance = 1e-6;

template <typename Real>
struct BasicPfBatch {
    BasicMatrix<Real> current; // N x d, one row per sample
    BasicMatrix<Real> past;    // N x d, or 0 x 0 when beta == 0
    BasicMatrix<Real> future;  // N x d, or 0 x 0 when alpha == 0

    std::size_t size() const { return current.rows(); }
};

template <typename Real>
struct BasicPfGrads {
    BasicMatrix<Real> current;
    BasicMatrix<Real> past;
    BasicMatrix<Real> future;
};

template <typename Real>
struct BasicPfResult {
    Real loss = 0;
    // Unweighted means over the batch of L_future and L_past.
    Real future_mean = 0;
    Real past_mean = 0;
    BasicPfGrads<Real> grads;
    // Largest similarity buffer held at once, in elements.
    std::size_t peak_similarity_workspace = 0;
};

enum class NBestLabel { rephrase, success };

template <typename Real>
struct BasicNBestBatch {
    BasicMatrix<Real> current;                   // N x d
    std::vector<BasicMatrix<Real>> hypotheses;   // N entries, each K_i x d, row 0 is the top-1
    std::vector<NBestLabel> labels;              // N entries

    std::size_t size() const { return current.rows(); }
};

template <typename Real>
struct BasicNBestGrads {
    BasicMatrix<Real> current;
    std::vector<BasicMatrix<Real>> hypotheses;
};

template <typename Real>
struct BasicNBestResult {
    Real loss = 0;
    Real negative_mean = 0; // mean L_neg over R, 0 if R is empty
    Real positive_mean = 0; // mean L_pos over S, 0 if S is empty
    std::size_t rephrase_count = 0;
    std::size_t success_count = 0;
    BasicNBestGrads<Real> grads;
};

using PfBatch = BasicPfBatch<double>;
using PfGrads = BasicPfGrads<double>;
using PfResult = BasicPfResult<double>;
using NBestBatch = BasicNBestBatch<double>;
using NBestGrads = BasicNBestGrads<double>;
using NBestResult = BasicNBestResult<double>;

// -log softmax(anchor . candidates / tau)[positive_index]. Inputs must
// already be unit length.
template <typename Real>
Real info_nce_row(const BasicVector<Real>& anchor, const BasicMatrix<Real>& candidates, std::size_t positive_index,
                  Real tau);

// Full matrix L(i, j) = -log softmax_k(c_i . o_k / tau)[j] over normalized rows.
// Only the diagonal enters L_pf.
template <typename Real>
BasicMatrix<Real> pairwise_info_nce(const BasicMatrix<Real>& current, const BasicMatrix<Real>& other, Real tau);

// Dense reference path: materializes both N x N similarity matrices.
template <typename Real>
BasicPfResult<Real> pf_loss(const BasicPfBatch<Real>& batch, const LossConfig& cfg);

// Same value and gradients as pf_loss, evaluated in tiles of at most
// chunk_size columns by min(d, N) rows. Pass one streams the per-row
// log-sum-exp, pass two recomputes each tile and accumulates gradients.
template <typename Real>
BasicPfResult<Real> pf_loss_chunked(const BasicPfBatch<Real>& batch, const LossConfig& cfg, std::size_t chunk_size);

template <typename Real>
BasicNBestResult<Real> nbest_loss(const BasicNBestBatch<Real>& batch, const LossConfig& cfg);

// l_asr + lambda * l_pf + delta * l_nbest
double overall_loss(double l_asr, double l_pf, double l_nbest, const LossConfig& cfg);

} // namespace clc
