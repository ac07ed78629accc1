#include "clc/metrics.hpp"

#include <algorithm>
#include <cctype>

#include "clc/error.hpp"

namespace clc {

Words tokenize(std::string_view text, const TextNormalization& norm) {
    Words words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const unsigned char ch = static_cast<unsigned char>(text[i]);
        if (std::isspace(ch)) {
            flush();
            continue;
        }
        if (norm.strip_punctuation && std::ispunct(ch)) {
            // Keep word-internal apostrophes: "don't", "o'clock".
            const bool inner_apostrophe = ch == '\'' && !current.empty() && i + 1 < text.size() &&
                                          std::isalnum(static_cast<unsigned char>(text[i + 1]));
            if (!inner_apostrophe) {
                // Punctuation separates words the way a space would.
                flush();
                continue;
            }
        }
        current.push_back(norm.lowercase ? static_cast<char>(std::tolower(ch)) : static_cast<char>(ch));
    }
    flush();
    return words;
}

double AlignmentResult::wer() const {
    return static_cast<double>(errors()) / static_cast<double>(std::max<std::size_t>(ref_len, 1));
}

AlignmentResult align(const Words& ref, const Words& hyp) {
    const std::size_t n = ref.size();
    const std::size_t m = hyp.size();
    const std::size_t width = m + 1;
    std::vector<std::size_t> cost((n + 1) * width);
    for (std::size_t i = 0; i <= n; ++i) cost[i * width] = i;
    for (std::size_t j = 0; j <= m; ++j) cost[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t diag = cost[(i - 1) * width + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            const std::size_t del = cost[(i - 1) * width + j] + 1;
            const std::size_t ins = cost[i * width + j - 1] + 1;
            cost[i * width + j] = std::min({diag, del, ins});
        }
    }

    AlignmentResult r;
    r.ref_len = n;
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 || j > 0) {
        const std::size_t here = cost[i * width + j];
        if (i > 0 && j > 0) {
            const bool match = ref[i - 1] == hyp[j - 1];
            if (here == cost[(i - 1) * width + j - 1] + (match ? 0 : 1)) {
                ++(match ? r.hits : r.substitutions);
                --i;
                --j;
                continue;
            }
        }
        if (i > 0 && here == cost[(i - 1) * width + j] + 1) {
            ++r.deletions;
            --i;
            continue;
        }
        ++r.insertions;
        --j;
    }
    return r;
}

CorpusScore corpus_score(const std::vector<AlignmentResult>& alignments) {
    if (alignments.empty()) {
        throw Error(ErrorKind::EmptyCorpus, "corpus_score needs at least one utterance");
    }
    CorpusScore s;
    s.n_utterances = alignments.size();
    std::size_t errors = 0;
    for (const auto& a : alignments) {
        s.n_ref_words += a.ref_len;
        s.substitutions += a.substitutions;
        s.deletions += a.deletions;
        s.insertions += a.insertions;
        errors += a.errors();
        if (a.errors() > 0) ++s.sentence_errors;
    }
    s.wer = static_cast<double>(errors) / static_cast<double>(std::max<std::size_t>(s.n_ref_words, 1));
    s.ser = static_cast<double>(s.sentence_errors) / static_cast<double>(s.n_utterances);
    s.per_utterance = alignments;
    return s;
}

CorpusScore corpus_score(const std::vector<std::pair<Words, Words>>& pairs) {
    std::vector<AlignmentResult> alignments;
    alignments.reserve(pairs.size());
    for (const auto& [ref, hyp] : pairs) alignments.push_back(align(ref, hyp));
    return corpus_score(alignments);
}

double relative_improvement(double baseline, double system) {
    if (!(baseline > 0.0)) {
        throw Error(ErrorKind::ZeroBaseline, "relative improvement needs a positive baseline");
    }
    return 100.0 * (baseline - system) / baseline;
}

OracleResult oracle_alignment(const Words& ref, const std::vector<Words>& nbest) {
    if (nbest.empty()) {
        throw Error(ErrorKind::EmptyNBest, "oracle WER of an empty n-best list");
    }
    OracleResult best;
    for (std::size_t k = 0; k < nbest.size(); ++k) {
        const AlignmentResult a = align(ref, nbest[k]);
        if (k == 0 || a.wer() < best.wer) {
            best = OracleResult{a.wer(), k, a};
        }
    }
    return best;
}

double oracle_wer(const Words& ref, const std::vector<Words>& nbest) {
    return oracle_alignment(ref, nbest).wer;
}

} // namespace clc
