#pragma once

// Dialogue records shared by the session builder, repeat/rephrase detection,
// error injection and the JSONL manifests.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clc/metrics.hpp"
#include "clc/tensor.hpp"

namespace clc {

enum class Speaker { user, agent };

std::string_view to_string(Speaker s);
std::optional<Speaker> parse_speaker(std::string_view s);

enum class RepeatKind { repeat, rephrase };

std::string_view to_string(RepeatKind k);
std::optional<RepeatKind> parse_repeat_kind(std::string_view s);

// `turn_id` is the follow-up turn, `source_turn_id` the earlier user turn that
// triggered it. Sources make up the set R.
struct RephraseLabel {
    std::string turn_id;
    RepeatKind kind = RepeatKind::repeat;
    std::string source_turn_id;

    bool operator==(const RephraseLabel&) const = default;
};

struct Hypothesis {
    std::string text;
    double score = 0;

    bool operator==(const Hypothesis&) const = default;
};

struct Turn {
    std::string event_id;
    double timestamp_s = 0;
    Speaker speaker = Speaker::user;
    std::string transcript;
    std::vector<Hypothesis> hypotheses;
    std::optional<double> wer;
    // Frame embeddings (T x k) of the turn's audio.
    std::optional<std::string> embedding_ref;
    // Sentence-level semantic embedding (1 x m) used for repeat detection.
    std::optional<std::string> semantic_ref;
    // Semantic embeddings of the hypotheses (K x d), row k for hypothesis k.
    std::optional<std::string> hyp_embedding_ref;
    std::vector<RephraseLabel> labels;

    bool operator==(const Turn&) const = default;
};

// A raw interaction before sessionization has the same shape as a turn.
using EventRecord = Turn;

struct Session {
    std::string session_id;
    std::vector<Turn> turns;
    double rho_final_s = 0;
    // Set when the time-gap floor was reached and the session was cut to the
    // utterance cap.
    bool truncated = false;

    bool operator==(const Session&) const = default;
};

// Labels in turn order. For each user turn and the next user turn after it,
// cosine >= threshold marks the later turn as a repeat when the normalized
// transcripts agree, otherwise as a rephrase. `embeddings` is aligned with
// session.turns; entries for agent turns are ignored.
std::vector<RephraseLabel> detect_repeat_rephrase(const Session& session,
                                                  const std::vector<std::optional<Vector>>& embeddings,
                                                  double similarity_threshold);

struct DeletionFilterResult {
    std::vector<std::size_t> kept;
    std::vector<std::size_t> dropped;
    std::vector<double> deletion_rates; // one per input turn
};

// Drops turns whose deletions / reference length exceeds the threshold.
inline constexpr double kDefaultDeletionRateThreshold = 0.5;

DeletionFilterResult filter_high_deletion(const std::vector<std::pair<Words, Words>>& turns,
                                          double deletion_rate_threshold = kDefaultDeletionRateThreshold);

} // namespace clc
