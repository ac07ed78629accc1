#pragma once

// Central finite-difference checks of the analytic loss gradients.
//
// Error measure, per input tensor: max_i |analytic_i - numeric_i| divided by
// the tensor's gradient scale max(max_i |analytic_i|, max_i |numeric_i|).
// A tensor whose gradients are all exactly zero reports 0.

#include <cstdint>
#include <string>
#include <vector>

#include "clc/heads.hpp"
#include "clc/losses.hpp"

namespace clc {

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-6;

struct TensorCheck {
    std::string name;
    std::size_t entries = 0;
    double max_abs_error = 0;
    double max_rel_error = 0;
    double scale = 0;
};

struct GradCheckReport {
    std::string check;
    std::uint64_t seed = 0;
    std::vector<TensorCheck> tensors;

    double max_rel_error() const;
    bool passed(double tolerance = kGradCheckTolerance) const;
};

// Random batch with N rows of dimension d (all three roles), Gaussian entries.
PfBatch random_pf_batch(std::uint64_t seed, std::size_t n, std::size_t d);

// Random n-best batch; every sample gets 2..max_k hypotheses, and labels are
// drawn so that both R and S are non-empty whenever n >= 2.
NBestBatch random_nbest_batch(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t max_k = 4);

GradCheckReport pf_grad_check(const PfBatch& batch, const LossConfig& cfg, double step = kFiniteDifferenceStep);
GradCheckReport pf_grad_check(std::uint64_t seed, std::size_t n, std::size_t d, const LossConfig& cfg);

GradCheckReport nbest_grad_check(const NBestBatch& batch, const LossConfig& cfg,
                                 double step = kFiniteDifferenceStep);
GradCheckReport nbest_grad_check(std::uint64_t seed, std::size_t n, std::size_t d, const LossConfig& cfg);

// Heads composed with the past/future loss: each sample has its own current,
// past and future frame matrices; gradients are checked for every parameter
// tensor of all three heads and for all frames. Train mode, so the fixed
// dropout masks are part of the checked function.
struct HeadPfInstance {
    HeadSet heads;
    std::vector<Matrix> current_frames;
    std::vector<Matrix> past_frames;
    std::vector<Matrix> future_frames;
};

HeadPfInstance random_head_pf_instance(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t h,
                                       std::size_t d);

// Loss and analytic gradients for an instance (gradients returned through
// the out-parameters, laid out like the instance).
struct HeadPfGradients {
    double loss = 0;
    HeadParamGrads past;
    HeadParamGrads current;
    HeadParamGrads future;
    std::vector<Matrix> current_frames;
    std::vector<Matrix> past_frames;
    std::vector<Matrix> future_frames;
};

HeadPfGradients head_pf_loss(const HeadPfInstance& instance, const LossConfig& cfg, HeadMode mode);

GradCheckReport head_pf_grad_check(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t h, std::size_t d,
                                   const LossConfig& cfg);

// Single-head check of head_backward against finite differences of a random
// linear functional of the head output.
GradCheckReport head_grad_check(std::uint64_t seed, std::size_t frames, std::size_t k, std::size_t h,
                                std::size_t d, HeadMode mode);

} // namespace clc
