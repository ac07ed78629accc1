#include "clc/dialogue.hpp"

#include "clc/error.hpp"

namespace clc {

std::string_view to_string(Speaker s) {
    return s == Speaker::user ? "user" : "agent";
}

std::optional<Speaker> parse_speaker(std::string_view s) {
    if (s == "user") return Speaker::user;
    if (s == "agent") return Speaker::agent;
    return std::nullopt;
}

std::string_view to_string(RepeatKind k) {
    return k == RepeatKind::repeat ? "repeat" : "rephrase";
}

std::optional<RepeatKind> parse_repeat_kind(std::string_view s) {
    if (s == "repeat") return RepeatKind::repeat;
    if (s == "rephrase") return RepeatKind::rephrase;
    return std::nullopt;
}

namespace {

double cosine(const Vector& a, const Vector& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorKind::ShapeMismatch, "semantic embeddings differ in dimension");
    }
    return dot(l2_normalize(a).values(), l2_normalize(b).values());
}

// Identical vectors can land a few ulps under 1.
constexpr double kCosineSlack = 1e-12;

} // namespace

std::vector<RephraseLabel> detect_repeat_rephrase(const Session& session,
                                                  const std::vector<std::optional<Vector>>& embeddings,
                                                  double similarity_threshold) {
    if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "similarity threshold must lie in (0, 1]");
    }
    if (embeddings.size() != session.turns.size()) {
        throw Error(ErrorKind::ShapeMismatch, "need one embedding slot per turn");
    }

    std::vector<std::size_t> user_turns;
    for (std::size_t i = 0; i < session.turns.size(); ++i) {
        if (session.turns[i].speaker != Speaker::user) continue;
        if (!embeddings[i]) {
            throw Error(ErrorKind::MissingEmbedding,
                        "user turn " + session.turns[i].event_id + " has no semantic embedding");
        }
        user_turns.push_back(i);
    }

    std::vector<RephraseLabel> labels;
    for (std::size_t u = 0; u + 1 < user_turns.size(); ++u) {
        const Turn& earlier = session.turns[user_turns[u]];
        const Turn& later = session.turns[user_turns[u + 1]];
        const double cos = cosine(*embeddings[user_turns[u]], *embeddings[user_turns[u + 1]]);
        if (cos < similarity_threshold - kCosineSlack) continue;
        const bool same_words = tokenize(earlier.transcript) == tokenize(later.transcript);
        labels.push_back({later.event_id, same_words ? RepeatKind::repeat : RepeatKind::rephrase, earlier.event_id});
    }
    return labels;
}

DeletionFilterResult filter_high_deletion(const std::vector<std::pair<Words, Words>>& turns,
                                          double deletion_rate_threshold) {
    if (!(deletion_rate_threshold >= 0.0 && deletion_rate_threshold <= 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "deletion rate threshold must lie in [0, 1]");
    }
    DeletionFilterResult out;
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const AlignmentResult a = align(turns[i].first, turns[i].second);
        const double rate = a.ref_len == 0 ? 0.0 : static_cast<double>(a.deletions) / static_cast<double>(a.ref_len);
        out.deletion_rates.push_back(rate);
        (rate > deletion_rate_threshold ? out.dropped : out.kept).push_back(i);
    }
    return out;
}

} // namespace clc
