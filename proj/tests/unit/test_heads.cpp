#include <gtest/gtest.h>

#include <cmath>

#include "clc/grad_check.hpp"
#include "clc/heads.hpp"
#include "clc/rng.hpp"

using namespace clc;

namespace {

Matrix gaussian(std::uint64_t seed, std::size_t r, std::size_t c) {
    Rng rng(seed);
    std::vector<double> v(r * c);
    for (auto& x : v) x = rng.normal();
    return Matrix(r, c, v);
}

double max_abs(std::span<const double> v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace

TEST(Heads, ZeroParamsGiveZeroOutput) {
    const auto p = HeadParams::zeros(3, 4, 2);
    const auto f = head_forward(p, gaussian(1, 5, 3), HeadMode::eval);
    EXPECT_EQ(f.output, (Vector{0.0, 0.0}));
}

TEST(Heads, IdentityConfigurationReproducesLayerNorm) {
    // Non-negative pooled input with population variance 1 passes ReLU
    // untouched; LayerNorm then only subtracts the mean and divides by
    // sqrt(1 + eps).
    auto p = HeadParams::zeros(4, 4, 4);
    p.w1 = Matrix::identity(4);
    p.w2 = Matrix::identity(4);
    const double a = 1.0, b = 3.0; // values {1,1,3,3}: mean 2, variance 1
    const Matrix frames{{a, a, b, b}};
    const auto f = head_forward(p, frames, HeadMode::eval);
    const double s = std::sqrt(1.0 + kLayerNormEpsilon);
    const Vector expected{(a - 2) / s, (a - 2) / s, (b - 2) / s, (b - 2) / s};
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(f.output[i], expected[i], 1e-15);
}

TEST(Heads, EvalIsPureAndTrainIsSeeded) {
    const auto p = HeadParams::random(3, 6, 4, 42, 0.5);
    const Matrix x = gaussian(2, 4, 3);
    EXPECT_EQ(head_forward(p, x, HeadMode::eval).output, head_forward(p, x, HeadMode::eval).output);

    const auto t1 = head_forward(p, x, HeadMode::train);
    const auto t2 = head_forward(p, x, HeadMode::train);
    EXPECT_EQ(t1.output, t2.output);
    EXPECT_EQ(t1.trace.dropout_mask, t2.trace.dropout_mask);
    EXPECT_EQ(t1.trace.dropout_mask.size(), 6u);

    // Another stream draws another mask.
    bool differs = false;
    for (std::uint64_t s = 1; s < 8 && !differs; ++s) {
        differs = head_forward(p, x, HeadMode::train, s).trace.dropout_mask != t1.trace.dropout_mask;
    }
    EXPECT_TRUE(differs);
}

TEST(Heads, InvertedDropoutScaling) {
    auto p = HeadParams::random(3, 8, 2, 5, 0.25);
    const auto f = head_forward(p, gaussian(3, 2, 3), HeadMode::train);
    for (std::size_t i = 0; i < 8; ++i) {
        const double ln = f.trace.normalized[i] * p.ln_gamma[i] + p.ln_beta[i];
        const double expected = f.trace.dropout_mask[i] ? ln / 0.75 : 0.0;
        EXPECT_NEAR(f.trace.dropout_output[i], expected, 1e-15);
    }
}

TEST(Heads, LayerNormStatistics) {
    // Before the affine step the normalized vector has mean 0 and variance
    // var / (var + eps); that ratio is 1 to within 1e-8 once var exceeds
    // 1e3.
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto p = HeadParams::random(3, 7, 2, seed);
        const auto f = head_forward(p, gaussian(seed + 100, 3, 3), HeadMode::eval);
        double mean = 0, var = 0;
        for (double x : f.trace.normalized.values()) mean += x;
        mean /= 7;
        for (double x : f.trace.normalized.values()) var += (x - mean) * (x - mean);
        var /= 7;
        EXPECT_NEAR(mean, 0.0, 1e-12);
        if (f.trace.ln_variance > 0) {
            EXPECT_NEAR(var, f.trace.ln_variance / (f.trace.ln_variance + kLayerNormEpsilon), 1e-12);
        }
    }
    auto p = HeadParams::zeros(2, 4, 2);
    p.w1 = Matrix{{100.0, 0.0}, {0.0, 100.0}, {50.0, 0.0}, {0.0, 0.0}};
    const auto f = head_forward(p, Matrix{{1.0, 1.0}}, HeadMode::eval);
    double var = 0;
    for (double x : f.trace.normalized.values()) var += x * x;
    EXPECT_NEAR(var / 4, 1.0, 1e-8);
}

TEST(Heads, ZeroUpstreamGradient) {
    const auto p = HeadParams::random(3, 4, 2, 7);
    const auto f = head_forward(p, gaussian(4, 3, 3), HeadMode::train);
    const auto b = head_backward(p, f.trace, Vector(2));
    for (auto part : {b.params.w1.values(), b.params.b1.values(), b.params.ln_gamma.values(),
                      b.params.ln_beta.values(), b.params.w2.values(), b.params.b2.values(), b.frames.values()}) {
        EXPECT_EQ(max_abs(part), 0.0);
    }
}

TEST(Heads, PoolingSplitsGradientEvenly) {
    const auto p = HeadParams::random(3, 4, 2, 8);
    const Vector g{0.3, -1.1};
    const Matrix one = gaussian(5, 1, 3);
    const auto b1 = head_backward(p, head_forward(p, one, HeadMode::eval).trace, g);

    // Four identical frames pool to the same vector; each gets a quarter.
    const Matrix four(4, 3, [&] {
        std::vector<double> v;
        for (int i = 0; i < 4; ++i) v.insert(v.end(), one.values().begin(), one.values().end());
        return v;
    }());
    const auto b4 = head_backward(p, head_forward(p, four, HeadMode::eval).trace, g);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(b4.frames(r, c), b1.frames(0, c) / 4, 1e-15);
    }
    EXPECT_EQ(b1.params.w2, b4.params.w2);
}

TEST(Heads, FiniteDifferenceSmallInstance) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (HeadMode mode : {HeadMode::eval, HeadMode::train}) {
            const auto r = head_grad_check(seed, 1 + seed % 4, 3, 4, 2, mode);
            EXPECT_LT(r.max_rel_error(), 1e-6) << "seed " << seed;
            EXPECT_EQ(r.tensors.size(), 7u);
        }
    }
}

TEST(Heads, TraceMismatchIsRejected) {
    const auto p = HeadParams::random(3, 4, 2, 1);
    const auto q = HeadParams::random(5, 4, 2, 1);
    const auto f = head_forward(q, gaussian(1, 2, 5), HeadMode::eval);
    try {
        head_backward(p, f.trace, Vector(2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TraceMismatch);
    }
}

TEST(Heads, RejectsBadInput) {
    const auto p = HeadParams::random(3, 4, 2, 1);
    EXPECT_THROW(head_forward(p, Matrix(2, 4), HeadMode::eval), Error);
    EXPECT_THROW(head_forward(p, Matrix(0, 3), HeadMode::eval), Error);
    auto bad = p;
    bad.dropout_rate = 1.0;
    EXPECT_THROW(bad.validate(), Error);
}

TEST(Heads, FloatInstantiationTracksDouble) {
    const auto p = HeadParams::random(3, 5, 4, 11);
    const Matrix x = gaussian(12, 3, 3);
    const auto d = head_forward(p, x, HeadMode::eval);
    const auto pf = BasicHeadParams<float>::random(3, 5, 4, 11);
    const auto f = head_forward(pf, cast<float>(x), HeadMode::eval);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(f.output[i], d.output[i], 1e-4);
}
