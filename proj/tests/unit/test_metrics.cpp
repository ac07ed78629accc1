#include <gtest/gtest.h>

#include <algorithm>

#include "clc/error.hpp"
#include "clc/metrics.hpp"
#include "clc/rng.hpp"
#include "oracles.hpp"

using namespace clc;

namespace {

Words random_words(Rng& rng, std::size_t max_len) {
    static const char* const kVocab[] = {"a", "b", "c", "d", "e"};
    Words w(rng.uniform_index(max_len + 1));
    for (auto& x : w) x = kVocab[rng.uniform_index(5)];
    return w;
}

// Plain DP edit distance, no backtrace.
std::size_t edit_distance(const Words& a, const Words& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

} // namespace

TEST(Tokenize, NormalizesCaseAndPunctuation) {
    EXPECT_EQ(tokenize("Turn ON the lights!"), (Words{"turn", "on", "the", "lights"}));
    EXPECT_EQ(tokenize("  what's   up? "), (Words{"what's", "up"}));
    EXPECT_EQ(tokenize("A, B", TextNormalization{false, false}), (Words{"A,", "B"}));
    EXPECT_TRUE(tokenize("?!").empty());
}

TEST(Align, WorkedExamples) {
    const auto a = align(tokenize("turn on the lights"), tokenize("turn off the lights"));
    EXPECT_EQ(a.substitutions, 1u);
    EXPECT_EQ(a.deletions, 0u);
    EXPECT_EQ(a.insertions, 0u);
    EXPECT_DOUBLE_EQ(a.wer(), 0.25);

    const auto same = align(tokenize("play some jazz"), tokenize("play some jazz"));
    EXPECT_EQ(same.errors(), 0u);
    EXPECT_EQ(same.hits, 3u);

    const auto b = align(Words{"a", "b", "c"}, Words{"b"});
    EXPECT_EQ(b.deletions, 2u);
    EXPECT_EQ(b.substitutions, 0u);
    EXPECT_EQ(b.insertions, 0u);
    EXPECT_DOUBLE_EQ(b.wer(), 2.0 / 3.0);
}

TEST(Align, EmptySequences) {
    const auto a = align({}, Words{"x", "y"});
    EXPECT_EQ(a.insertions, 2u);
    EXPECT_EQ(a.ref_len, 0u);
    EXPECT_DOUBLE_EQ(a.wer(), 2.0);
    EXPECT_EQ(align({}, {}).errors(), 0u);
    EXPECT_EQ(align(Words{"x"}, {}).deletions, 1u);
}

TEST(Align, BacktracePrefersSubstitution) {
    // Two substitutions and a deletion/insertion pair around the hit on "b"
    // both cost 2; the diagonal wins the tie.
    const auto a = align(Words{"a", "b"}, Words{"b", "a"});
    EXPECT_EQ(a.errors(), 2u);
    EXPECT_EQ(a.substitutions, 2u);
}

TEST(Align, PropertiesOnRandomPairs) {
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const Words r = random_words(rng, 8), h = random_words(rng, 8);
        const auto a = align(r, h);
        const auto b = align(h, r);
        EXPECT_EQ(a.errors(), edit_distance(r, h));
        EXPECT_EQ(a.hits + a.substitutions + a.deletions, r.size());
        EXPECT_EQ(a.hits + a.substitutions + a.insertions, h.size());
        EXPECT_EQ(a.errors(), b.errors());
        EXPECT_EQ(a.deletions - a.insertions, b.insertions - b.deletions);
        if (!r.empty()) {
            EXPECT_LE(a.wer(), double(r.size() + h.size()) / double(r.size()));
        }
    }
}

TEST(CorpusScore, ExamplesAndErrors) {
    const auto s = corpus_score({{tokenize("a b"), tokenize("a b")}, {tokenize("w x y z"), tokenize("w x y q")}});
    EXPECT_DOUBLE_EQ(s.ser, 0.5);
    EXPECT_DOUBLE_EQ(s.wer, 1.0 / 6.0);
    EXPECT_EQ(s.n_ref_words, 6u);

    const auto perfect = corpus_score({{Words{"a"}, Words{"a"}}, {Words{"b", "c"}, Words{"b", "c"}}});
    EXPECT_EQ(perfect.wer, 0.0);
    EXPECT_EQ(perfect.ser, 0.0);

    // Three hand-built pairs: 1 sub / 3 words, 2 del / 3 words, 1 ins / 2 words.
    const auto mixed = corpus_score({{Words{"a", "b", "c"}, Words{"a", "x", "c"}},
                                     {Words{"a", "b", "c"}, Words{"b"}},
                                     {Words{"p", "q"}, Words{"p", "q", "r"}}});
    EXPECT_DOUBLE_EQ(mixed.wer, 4.0 / 8.0);
    EXPECT_DOUBLE_EQ(mixed.ser, 1.0);
    EXPECT_EQ(mixed.substitutions, 1u);
    EXPECT_EQ(mixed.deletions, 2u);
    EXPECT_EQ(mixed.insertions, 1u);

    try {
        corpus_score(std::vector<std::pair<Words, Words>>{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyCorpus);
    }
}

TEST(CorpusScore, PooledEqualsRecomputation) {
    Rng rng(6);
    std::vector<std::pair<Words, Words>> pairs;
    for (int i = 0; i < 1000; ++i) pairs.emplace_back(random_words(rng, 10), random_words(rng, 10));
    const auto s = corpus_score(pairs);
    std::size_t errors = 0, words = 0, wrong = 0;
    for (const auto& [r, h] : pairs) {
        const std::size_t e = edit_distance(r, h);
        errors += e;
        words += r.size();
        wrong += e > 0;
    }
    EXPECT_DOUBLE_EQ(s.wer, double(errors) / double(words));
    EXPECT_DOUBLE_EQ(s.ser, double(wrong) / 1000.0);
    EXPECT_EQ(s.per_utterance.size(), 1000u);
}

TEST(RelativeImprovement, TableArithmetic) {
    EXPECT_NEAR(relative_improvement(11.13, 8.99), oracle::kRelativeImprovementTable, 1e-9);
    EXPECT_NEAR(relative_improvement(11.13, 8.99), 19.22, 0.01);
    EXPECT_EQ(relative_improvement(7.0, 7.0), 0.0);
    EXPECT_NEAR(relative_improvement(10.0, 9.57), 4.3, 1e-9);
    EXPECT_NEAR(relative_improvement(1113.0, 899.0), relative_improvement(11.13, 8.99), 1e-9);
    EXPECT_LT(relative_improvement(5.0, 6.0), 0.0);
    try {
        relative_improvement(0.0, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroBaseline);
    }
}

TEST(OracleWer, Examples) {
    const Words ref{"w", "x", "y", "z"};
    EXPECT_EQ(oracle_wer(ref, {Words{"q"}, ref}), 0.0);
    EXPECT_DOUBLE_EQ(oracle_wer(ref, {Words{"w", "x"}}), align(ref, Words{"w", "x"}).wer());

    const std::vector<Words> three{Words{"w", "q", "y", "q"}, Words{"w", "x", "y", "q"}, Words{"q", "q", "q", "z"}};
    EXPECT_DOUBLE_EQ(align(ref, three[0]).wer(), 0.5);
    EXPECT_DOUBLE_EQ(align(ref, three[2]).wer(), 0.75);
    const auto best = oracle_alignment(ref, three);
    EXPECT_DOUBLE_EQ(best.wer, 0.25);
    EXPECT_EQ(best.index, 1u);

    EXPECT_EQ(oracle_alignment(ref, {Words{"a"}, Words{"b"}}).index, 0u);
    try {
        oracle_wer(ref, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyNBest);
    }
}

TEST(OracleWer, EqualsMinimumOverHypotheses) {
    Rng rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        Words ref = random_words(rng, 6);
        if (ref.empty()) ref.push_back("a");
        std::vector<Words> nbest(1 + rng.uniform_index(5));
        double best = 1e300;
        for (auto& h : nbest) {
            h = random_words(rng, 6);
            best = std::min(best, align(ref, h).wer());
        }
        EXPECT_EQ(oracle_wer(ref, nbest), best);
    }
}
