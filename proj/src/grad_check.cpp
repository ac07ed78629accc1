#include "clc/grad_check.hpp"

#include <algorithm>
#include <functional>

#include "clc/rng.hpp"

namespace clc {

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.normal();
    return Matrix(rows, cols, std::move(v));
}

TensorCheck check_tensor(std::string name, std::span<double> values, std::span<const double> analytic,
                         const std::function<double()>& loss, double step) {
    TensorCheck out;
    out.name = std::move(name);
    out.entries = values.size();
    std::vector<double> numeric(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + step;
        const double plus = loss();
        values[i] = saved - step;
        const double minus = loss();
        values[i] = saved;
        numeric[i] = (plus - minus) / (2.0 * step);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        out.scale = std::max({out.scale, std::abs(analytic[i]), std::abs(numeric[i])});
        out.max_abs_error = std::max(out.max_abs_error, std::abs(analytic[i] - numeric[i]));
    }
    out.max_rel_error = out.scale > 0.0 ? out.max_abs_error / out.scale : out.max_abs_error;
    return out;
}

void check_head_params(GradCheckReport& report, const std::string& prefix, HeadParams& params,
                       const HeadParamGrads& grads, const std::function<double()>& loss, double step) {
    report.tensors.push_back(check_tensor(prefix + ".w1", params.w1.values(), grads.w1.values(), loss, step));
    report.tensors.push_back(check_tensor(prefix + ".b1", params.b1.values(), grads.b1.values(), loss, step));
    report.tensors.push_back(
        check_tensor(prefix + ".ln_gamma", params.ln_gamma.values(), grads.ln_gamma.values(), loss, step));
    report.tensors.push_back(
        check_tensor(prefix + ".ln_beta", params.ln_beta.values(), grads.ln_beta.values(), loss, step));
    report.tensors.push_back(check_tensor(prefix + ".w2", params.w2.values(), grads.w2.values(), loss, step));
    report.tensors.push_back(check_tensor(prefix + ".b2", params.b2.values(), grads.b2.values(), loss, step));
}

// Frames of one role across all samples, reported as a single tensor.
void check_frames(GradCheckReport& report, const std::string& name, std::vector<Matrix>& frames,
                  const std::vector<Matrix>& grads, const std::function<double()>& loss, double step) {
    TensorCheck merged;
    merged.name = name;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const TensorCheck part = check_tensor(name, frames[i].values(), grads[i].values(), loss, step);
        merged.entries += part.entries;
        merged.scale = std::max(merged.scale, part.scale);
        merged.max_abs_error = std::max(merged.max_abs_error, part.max_abs_error);
    }
    merged.max_rel_error = merged.scale > 0.0 ? merged.max_abs_error / merged.scale : merged.max_abs_error;
    report.tensors.push_back(merged);
}

// Finite differences are only meaningful where the head is smooth at the
// scale of the step: no ReLU unit within 1e-3 of its kink, and a LayerNorm
// variance well above its epsilon (near it the third derivative grows like
// var^-3/2 and swamps the stencil's truncation error).
bool well_conditioned(const HeadParams& params, const std::vector<Matrix>& frames) {
    for (const auto& f : frames) {
        const auto fwd = head_forward(params, f, HeadMode::eval);
        if (fwd.trace.ln_variance < 100 * kLayerNormEpsilon) return false;
        for (double z : fwd.trace.pre_activation.values()) {
            if (std::abs(z) <= 1e-3) return false;
        }
    }
    return true;
}

} // namespace

double GradCheckReport::max_rel_error() const {
    double worst = 0;
    for (const auto& t : tensors) worst = std::max(worst, t.max_rel_error);
    return worst;
}

bool GradCheckReport::passed(double tolerance) const {
    return std::all_of(tensors.begin(), tensors.end(),
                       [tolerance](const TensorCheck& t) { return t.max_rel_error < tolerance; });
}

PfBatch random_pf_batch(std::uint64_t seed, std::size_t n, std::size_t d) {
    Rng rng(seed, 0x5046);
    PfBatch batch;
    batch.current = gaussian_matrix(n, d, rng);
    batch.past = gaussian_matrix(n, d, rng);
    batch.future = gaussian_matrix(n, d, rng);
    return batch;
}

NBestBatch random_nbest_batch(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t max_k) {
    Rng rng(seed, 0x4e42);
    NBestBatch batch;
    batch.current = gaussian_matrix(n, d, rng);
    max_k = std::max<std::size_t>(2, max_k);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = 2 + rng.uniform_index(max_k - 1);
        batch.hypotheses.push_back(gaussian_matrix(k, d, rng));
        batch.labels.push_back(rng.bernoulli(0.5) ? NBestLabel::rephrase : NBestLabel::success);
    }
    if (n >= 2) {
        batch.labels[0] = NBestLabel::rephrase;
        batch.labels[1] = NBestLabel::success;
    }
    return batch;
}

GradCheckReport pf_grad_check(const PfBatch& batch, const LossConfig& cfg, double step) {
    GradCheckReport report;
    report.check = "pf_loss";
    const PfResult analytic = pf_loss(batch, cfg);
    PfBatch work = batch;
    const std::function<double()> loss = [&] { return pf_loss(work, cfg).loss; };
    report.tensors.push_back(
        check_tensor("current", work.current.values(), analytic.grads.current.values(), loss, step));
    report.tensors.push_back(check_tensor("past", work.past.values(), analytic.grads.past.values(), loss, step));
    report.tensors.push_back(
        check_tensor("future", work.future.values(), analytic.grads.future.values(), loss, step));
    return report;
}

GradCheckReport pf_grad_check(std::uint64_t seed, std::size_t n, std::size_t d, const LossConfig& cfg) {
    GradCheckReport report = pf_grad_check(random_pf_batch(seed, n, d), cfg);
    report.seed = seed;
    return report;
}

GradCheckReport nbest_grad_check(const NBestBatch& batch, const LossConfig& cfg, double step) {
    GradCheckReport report;
    report.check = "nbest_loss";
    const NBestResult analytic = nbest_loss(batch, cfg);
    NBestBatch work = batch;
    const std::function<double()> loss = [&] { return nbest_loss(work, cfg).loss; };
    report.tensors.push_back(
        check_tensor("current", work.current.values(), analytic.grads.current.values(), loss, step));

    TensorCheck hyps;
    hyps.name = "hypotheses";
    for (std::size_t i = 0; i < work.hypotheses.size(); ++i) {
        const TensorCheck part =
            check_tensor("hypotheses", work.hypotheses[i].values(), analytic.grads.hypotheses[i].values(), loss, step);
        hyps.entries += part.entries;
        hyps.scale = std::max(hyps.scale, part.scale);
        hyps.max_abs_error = std::max(hyps.max_abs_error, part.max_abs_error);
    }
    hyps.max_rel_error = hyps.scale > 0.0 ? hyps.max_abs_error / hyps.scale : hyps.max_abs_error;
    report.tensors.push_back(hyps);
    return report;
}

GradCheckReport nbest_grad_check(std::uint64_t seed, std::size_t n, std::size_t d, const LossConfig& cfg) {
    GradCheckReport report = nbest_grad_check(random_nbest_batch(seed, n, d), cfg);
    report.seed = seed;
    return report;
}

HeadPfInstance random_head_pf_instance(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t h,
                                       std::size_t d) {
    // Redraw until every head is well conditioned for the stencil.
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(seed, 0x4845 + attempt);
        HeadPfInstance inst;
        inst.heads = HeadSet::random(k, h, d, seed * 1009 + attempt, 0.1);
        for (std::size_t i = 0; i < n; ++i) {
            inst.current_frames.push_back(gaussian_matrix(1 + rng.uniform_index(4), k, rng));
            inst.past_frames.push_back(gaussian_matrix(1 + rng.uniform_index(4), k, rng));
            inst.future_frames.push_back(gaussian_matrix(1 + rng.uniform_index(4), k, rng));
        }
        const bool ok = well_conditioned(inst.heads.current, inst.current_frames) &&
                        well_conditioned(inst.heads.past, inst.past_frames) &&
                        well_conditioned(inst.heads.future, inst.future_frames);
        if (ok) return inst;
        if (attempt >= 256) throw Error(ErrorKind::InvalidConfig, "no well-conditioned head instance for this seed");
    }
}

HeadPfGradients head_pf_loss(const HeadPfInstance& instance, const LossConfig& cfg, HeadMode mode) {
    const std::size_t n = instance.current_frames.size();
    const std::size_t d = instance.heads.current.output_dim();

    struct RoleForward {
        std::vector<HeadForwardTrace> traces;
        Matrix outputs;
    };
    auto forward_role = [&](const HeadParams& params, const std::vector<Matrix>& frames) {
        RoleForward role{{}, Matrix(n, d)};
        for (std::size_t i = 0; i < n; ++i) {
            auto fwd = head_forward(params, frames[i], mode, i);
            std::copy(fwd.output.values().begin(), fwd.output.values().end(), role.outputs.row(i).begin());
            role.traces.push_back(std::move(fwd.trace));
        }
        return role;
    };

    RoleForward current = forward_role(instance.heads.current, instance.current_frames);
    RoleForward past = forward_role(instance.heads.past, instance.past_frames);
    RoleForward future = forward_role(instance.heads.future, instance.future_frames);

    const PfResult pf = pf_loss(PfBatch{current.outputs, past.outputs, future.outputs}, cfg);

    HeadPfGradients out;
    out.loss = pf.loss;
    auto backward_role = [&](const HeadParams& params, const RoleForward& role, const Matrix& grad_rows,
                             HeadParamGrads& param_grads, std::vector<Matrix>& frame_grads) {
        param_grads = HeadParamGrads::zeros_like(params);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = grad_rows.row(i);
            auto back = head_backward(params, role.traces[i], Vector(std::vector<double>(row.begin(), row.end())));
            param_grads.accumulate(back.params);
            frame_grads.push_back(std::move(back.frames));
        }
    };
    backward_role(instance.heads.current, current, pf.grads.current, out.current, out.current_frames);
    backward_role(instance.heads.past, past, pf.grads.past, out.past, out.past_frames);
    backward_role(instance.heads.future, future, pf.grads.future, out.future, out.future_frames);
    return out;
}

GradCheckReport head_pf_grad_check(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t h, std::size_t d,
                                   const LossConfig& cfg) {
    GradCheckReport report;
    report.check = "heads+pf_loss";
    report.seed = seed;

    HeadPfInstance inst = random_head_pf_instance(seed, n, k, h, d);
    const HeadPfGradients analytic = head_pf_loss(inst, cfg, HeadMode::train);
    const std::function<double()> loss = [&] { return head_pf_loss(inst, cfg, HeadMode::train).loss; };
    const double step = kFiniteDifferenceStep;

    check_head_params(report, "current", inst.heads.current, analytic.current, loss, step);
    check_head_params(report, "past", inst.heads.past, analytic.past, loss, step);
    check_head_params(report, "future", inst.heads.future, analytic.future, loss, step);
    check_frames(report, "frames.current", inst.current_frames, analytic.current_frames, loss, step);
    check_frames(report, "frames.past", inst.past_frames, analytic.past_frames, loss, step);
    check_frames(report, "frames.future", inst.future_frames, analytic.future_frames, loss, step);
    return report;
}

GradCheckReport head_grad_check(std::uint64_t seed, std::size_t frames, std::size_t k, std::size_t h,
                                std::size_t d, HeadMode mode) {
    GradCheckReport report;
    report.check = "head";
    report.seed = seed;

    Rng rng(seed, 0x4844);
    HeadParams params;
    Matrix input;
    for (std::uint64_t attempt = 0;; ++attempt) {
        params = HeadParams::random(k, h, d, seed * 7919 + attempt, 0.25);
        input = gaussian_matrix(frames, k, rng);
        if (well_conditioned(params, {input})) break;
        if (attempt >= 256) throw Error(ErrorKind::InvalidConfig, "no well-conditioned head instance for this seed");
    }
    std::vector<double> weights(d);
    for (auto& w : weights) w = rng.normal();
    const Vector probe(weights);

    const auto fwd = head_forward(params, input, mode);
    const auto back = head_backward(params, fwd.trace, probe);
    const std::function<double()> loss = [&] {
        return dot(head_forward(params, input, mode).output.values(), probe.values());
    };
    check_head_params(report, "head", params, back.params, loss, kFiniteDifferenceStep);
    report.tensors.push_back(check_tensor("frames", input.values(), back.frames.values(), loss, kFiniteDifferenceStep));
    return report;
}

} // namespace clc
