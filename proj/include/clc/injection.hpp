#pragma once

// Synthetic repeat/rephrase injection into clean dialogues.
//
// A conversation is a candidate when one of its user turns has WER above
// wer_candidate_threshold. floor(injection_rate * |candidates|) candidates
// are drawn uniformly without replacement. In each, the highest-WER user
// turn t gets two new turns right after the agent turn that follows it (or
// right after t when no agent turn follows): a generic agent error response,
// then a user turn that repeats t verbatim or rephrases it.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "clc/dialogue.hpp"
#include "clc/rephrase.hpp"
#include "clc/rng.hpp"

namespace clc {

struct InjectionConfig {
    double wer_candidate_threshold = 0.15;
    double injection_rate = 0.20;
    // Probability that an injection is a verbatim repeat.
    double repeat_vs_rephrase_split = 0.5;
    std::uint64_t rng_seed = 0;
    std::vector<std::string> error_response_pool = {
        "I'm sorry, I don't understand.",
        "Sorry, I didn't catch that.",
        "I'm not sure what you mean.",
    };

    void validate() const;
};

using TurnWer = std::unordered_map<std::string, double>;

// WER per user turn id, taken from Turn::wer. Throws InvalidConfig when a
// user turn carries none.
TurnWer collect_turn_wer(const Session& session);

bool is_injection_candidate(const Session& session, const TurnWer& wer, double threshold);

// Stateful so that the same draws can be replayed over a stream of sessions:
// call select() once with the candidate count, then apply() to each selected
// conversation in ascending order.
class Injector {
public:
    Injector(InjectionConfig cfg, Rephraser rephraser);

    // Positions, in ascending order, within the list of candidates.
    std::vector<std::size_t> select(std::size_t candidate_count);

    std::vector<RephraseLabel> apply(Session& session, const TurnWer& wer);

private:
    InjectionConfig cfg_;
    Rephraser rephraser_;
    Rng rng_;
    std::size_t next_response_ = 0;
};

struct InjectionResult {
    std::vector<Session> sessions;
    std::vector<RephraseLabel> labels;
    // Indices of the modified sessions.
    std::vector<std::size_t> modified;
};

InjectionResult inject_errors(std::vector<Session> sessions, const TurnWer& per_turn_wer,
                              const InjectionConfig& cfg, const Rephraser& rephraser = template_rephrase);

} // namespace clc
