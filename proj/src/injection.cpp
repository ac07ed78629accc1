#include "clc/injection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clc/error.hpp"

namespace clc {

namespace {

bool in_unit_interval(double x) {
    return x >= 0.0 && x <= 1.0;
}

double lookup(const TurnWer& wer, const Turn& turn) {
    auto it = wer.find(turn.event_id);
    if (it == wer.end()) {
        throw Error(ErrorKind::InvalidConfig, "no WER for user turn " + turn.event_id);
    }
    return it->second;
}

} // namespace

void InjectionConfig::validate() const {
    if (!in_unit_interval(wer_candidate_threshold) || !in_unit_interval(injection_rate) ||
        !in_unit_interval(repeat_vs_rephrase_split)) {
        throw Error(ErrorKind::InvalidConfig, "injection thresholds must lie in [0, 1]");
    }
    if (error_response_pool.empty()) {
        throw Error(ErrorKind::EmptyErrorPool, "error_response_pool is empty");
    }
}

TurnWer collect_turn_wer(const Session& session) {
    TurnWer out;
    for (const auto& t : session.turns) {
        if (t.speaker != Speaker::user) continue;
        if (!t.wer) {
            throw Error(ErrorKind::InvalidConfig, "user turn " + t.event_id + " has no wer");
        }
        out.emplace(t.event_id, *t.wer);
    }
    return out;
}

bool is_injection_candidate(const Session& session, const TurnWer& wer, double threshold) {
    bool candidate = false;
    for (const auto& t : session.turns) {
        if (t.speaker == Speaker::user && lookup(wer, t) > threshold) candidate = true;
    }
    return candidate;
}

Injector::Injector(InjectionConfig cfg, Rephraser rephraser)
    : cfg_(std::move(cfg)), rephraser_(std::move(rephraser)), rng_(cfg_.rng_seed) {
    cfg_.validate();
}

std::vector<std::size_t> Injector::select(std::size_t candidate_count) {
    // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
    const auto count = static_cast<std::size_t>(std::floor(cfg_.injection_rate * double(candidate_count) + 1e-9));
    std::vector<std::size_t> pool(candidate_count);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng_.uniform_index(candidate_count - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(std::min(count, candidate_count));
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::vector<RephraseLabel> Injector::apply(Session& session, const TurnWer& wer) {
    std::optional<std::size_t> source;
    double worst = cfg_.wer_candidate_threshold;
    for (std::size_t i = 0; i < session.turns.size(); ++i) {
        const Turn& t = session.turns[i];
        if (t.speaker != Speaker::user) continue;
        const double w = lookup(wer, t);
        if (w > worst) {
            worst = w;
            source = i;
        }
    }
    if (!source) return {};

    std::size_t anchor = *source;
    if (anchor + 1 < session.turns.size() && session.turns[anchor + 1].speaker == Speaker::agent) ++anchor;

    const double base = session.turns[anchor].timestamp_s;
    const bool has_next = anchor + 1 < session.turns.size();
    double step = has_next ? (session.turns[anchor + 1].timestamp_s - base) / 3.0 : 1.0;
    if (!has_next && session.rho_final_s > 0.0) step = std::min(step, session.rho_final_s / 3.0);

    const Turn& src = session.turns[*source];
    const bool repeat = rng_.bernoulli(cfg_.repeat_vs_rephrase_split);
    const RepeatKind kind = repeat ? RepeatKind::repeat : RepeatKind::rephrase;

    Turn agent;
    agent.event_id = src.event_id + "-error";
    agent.timestamp_s = base + step;
    agent.speaker = Speaker::agent;
    agent.transcript = cfg_.error_response_pool[next_response_++ % cfg_.error_response_pool.size()];

    Turn follow_up;
    follow_up.event_id = src.event_id + "-" + std::string(to_string(kind));
    follow_up.timestamp_s = base + 2.0 * step;
    follow_up.speaker = Speaker::user;
    follow_up.transcript = repeat ? src.transcript : rephraser_(src.transcript);
    // No new audio exists; the follow-up reuses the source's embeddings.
    follow_up.embedding_ref = src.embedding_ref;
    follow_up.semantic_ref = src.semantic_ref;
    RephraseLabel label{follow_up.event_id, kind, src.event_id};
    follow_up.labels.push_back(label);

    const auto at = session.turns.begin() + static_cast<std::ptrdiff_t>(anchor + 1);
    session.turns.insert(at, {std::move(agent), std::move(follow_up)});
    return {label};
}

InjectionResult inject_errors(std::vector<Session> sessions, const TurnWer& per_turn_wer,
                              const InjectionConfig& cfg, const Rephraser& rephraser) {
    Injector injector(cfg, rephraser);
    std::vector<std::size_t> candidates;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
        if (is_injection_candidate(sessions[s], per_turn_wer, cfg.wer_candidate_threshold)) candidates.push_back(s);
    }

    InjectionResult out;
    for (std::size_t pick : injector.select(candidates.size())) {
        const std::size_t s = candidates[pick];
        auto labels = injector.apply(sessions[s], per_turn_wer);
        out.labels.insert(out.labels.end(), labels.begin(), labels.end());
        out.modified.push_back(s);
    }
    out.sessions = std::move(sessions);
    return out;
}

} // namespace clc
