#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace clc {

using Words = std::vector<std::string>;

struct TextNormalization {
    bool lowercase = true;
    bool strip_punctuation = true;
};

// Lowercase, drop punctuation (apostrophes inside words are kept), split on
// whitespace. Either step can be switched off.
Words tokenize(std::string_view text, const TextNormalization& norm = {});

struct AlignmentResult {
    std::size_t substitutions = 0;
    std::size_t deletions = 0;
    std::size_t insertions = 0;
    std::size_t hits = 0;
    std::size_t ref_len = 0;

    std::size_t errors() const { return substitutions + deletions + insertions; }
    // errors / ref_len; an empty reference divides by 1 instead.
    double wer() const;
};

// Unit-cost Levenshtein alignment. The backtrace prefers the diagonal
// (hit or substitution), then deletion, then insertion.
AlignmentResult align(const Words& ref, const Words& hyp);

struct CorpusScore {
    double wer = 0;
    double ser = 0;
    std::size_t n_utterances = 0;
    std::size_t n_ref_words = 0;
    std::size_t substitutions = 0;
    std::size_t deletions = 0;
    std::size_t insertions = 0;
    std::size_t sentence_errors = 0;
    std::vector<AlignmentResult> per_utterance;
};

// Pooled WER: total errors over total reference words.
CorpusScore corpus_score(const std::vector<std::pair<Words, Words>>& pairs);
CorpusScore corpus_score(const std::vector<AlignmentResult>& alignments);

// 100 * (baseline - system) / baseline. Serves for both WERR and SERR.
double relative_improvement(double baseline, double system);

struct OracleResult {
    double wer = 0;
    std::size_t index = 0;
    AlignmentResult alignment;
};

// Lowest WER over an n-best list; the earliest hypothesis wins ties.
OracleResult oracle_alignment(const Words& ref, const std::vector<Words>& nbest);
double oracle_wer(const Words& ref, const std::vector<Words>& nbest);

} // namespace clc
