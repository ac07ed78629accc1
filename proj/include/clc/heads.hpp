#pragma once

// Projection heads: mean pool over frames, then
//   Linear(k->h) -> ReLU -> LayerNorm(h) -> Dropout -> Linear(h->d).
// The output is not normalized; the losses normalize at similarity time.

#include <cstdint>
#include <vector>

#include "clc/tensor.hpp"

namespace clc {

enum class HeadMode { train, eval };

inline constexpr double kLayerNormEpsilon = 1e-5;

template <typename Real>
struct BasicHeadParams {
    BasicMatrix<Real> w1;       // h x k
    BasicVector<Real> b1;       // h
    BasicVector<Real> ln_gamma; // h
    BasicVector<Real> ln_beta;  // h
    BasicMatrix<Real> w2;       // d x h
    BasicVector<Real> b2;       // d
    double dropout_rate = 0.1;
    std::uint64_t rng_seed = 0;

    std::size_t input_dim() const { return w1.cols(); }
    std::size_t hidden_dim() const { return w1.rows(); }
    std::size_t output_dim() const { return w2.rows(); }

    // Throws ShapeMismatch / InvalidConfig when the tensors disagree.
    void validate() const;

    // All-zero parameters with gamma = 1.
    static BasicHeadParams zeros(std::size_t k, std::size_t h, std::size_t d);
    // Scaled-uniform init, deterministic in `seed`. Also seeds dropout.
    static BasicHeadParams random(std::size_t k, std::size_t h, std::size_t d, std::uint64_t seed,
                                  double dropout_rate = 0.1);
};

template <typename Real>
struct BasicHeadParamGrads {
    BasicMatrix<Real> w1;
    BasicVector<Real> b1;
    BasicVector<Real> ln_gamma;
    BasicVector<Real> ln_beta;
    BasicMatrix<Real> w2;
    BasicVector<Real> b2;

    static BasicHeadParamGrads zeros_like(const BasicHeadParams<Real>& p);
    // this += other
    void accumulate(const BasicHeadParamGrads& other);
};

template <typename Real>
struct BasicHeadForwardTrace {
    std::size_t frame_count = 0;
    std::size_t input_dim = 0;
    HeadMode mode = HeadMode::eval;
    BasicVector<Real> pooled;
    BasicVector<Real> pre_activation;
    BasicVector<Real> post_relu;
    Real ln_mean = 0;
    Real ln_variance = 0;
    BasicVector<Real> normalized; // LayerNorm output before gamma/beta
    std::vector<std::uint8_t> dropout_mask; // 1 = kept; empty in eval mode
    BasicVector<Real> dropout_output;
    BasicVector<Real> output;
};

template <typename Real>
struct BasicHeadForward {
    BasicVector<Real> output;
    BasicHeadForwardTrace<Real> trace;
};

template <typename Real>
struct BasicHeadBackward {
    BasicHeadParamGrads<Real> params;
    BasicMatrix<Real> frames;
};

// `dropout_stream` selects an independent mask stream for the same seed, so a
// batch can give each sample its own mask while staying reproducible.
template <typename Real>
BasicHeadForward<Real> head_forward(const BasicHeadParams<Real>& params, const BasicMatrix<Real>& frames,
                                    HeadMode mode, std::uint64_t dropout_stream = 0);

template <typename Real>
BasicHeadBackward<Real> head_backward(const BasicHeadParams<Real>& params, const BasicHeadForwardTrace<Real>& trace,
                                      const BasicVector<Real>& grad_output);

using HeadParams = BasicHeadParams<double>;
using HeadParamGrads = BasicHeadParamGrads<double>;
using HeadForwardTrace = BasicHeadForwardTrace<double>;
using HeadForward = BasicHeadForward<double>;
using HeadBackward = BasicHeadBackward<double>;

// The three heads of the past/future objective.
template <typename Real>
struct BasicHeadSet {
    BasicHeadParams<Real> past;
    BasicHeadParams<Real> current;
    BasicHeadParams<Real> future;

    static BasicHeadSet random(std::size_t k, std::size_t h, std::size_t d, std::uint64_t seed,
                               double dropout_rate = 0.1);
};

using HeadSet = BasicHeadSet<double>;

} // namespace clc
