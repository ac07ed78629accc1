#include "clc/sessions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "clc/error.hpp"

namespace clc {

void SessionBuilderConfig::validate() const {
    if (!(rho_floor_s > 0.0) || !std::isfinite(rho_floor_s)) {
        throw Error(ErrorKind::InvalidConfig, "rho_floor_s must be positive");
    }
    if (!(rho_initial_s >= rho_floor_s) || !std::isfinite(rho_initial_s)) {
        throw Error(ErrorKind::InvalidConfig, "rho_initial_s must be at least rho_floor_s");
    }
    if (max_utterances == 0) {
        throw Error(ErrorKind::InvalidConfig, "max_utterances must be positive");
    }
}

SessionPartition partition_sessions(std::span<const double> timestamps, const SessionBuilderConfig& cfg) {
    cfg.validate();
    for (double t : timestamps) {
        if (!std::isfinite(t)) {
            throw Error(ErrorKind::NonFinite, "event timestamp is not finite");
        }
    }

    std::vector<std::size_t> order(timestamps.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return timestamps[a] < timestamps[b]; });

    // The seed is always the earliest remaining event and every session is a
    // run of consecutive remaining events, so the pool stays a suffix of
    // `order` and a closure is the longest run with gaps <= rho.
    auto closure_end = [&](std::size_t start, double rho) {
        std::size_t end = start + 1;
        while (end < order.size() && timestamps[order[end]] - timestamps[order[end - 1]] <= rho) ++end;
        return end;
    };

    SessionPartition out;
    std::size_t start = 0;
    while (start < order.size()) {
        double rho = cfg.rho_initial_s;
        std::size_t end = closure_end(start, rho);
        bool truncated = false;
        while (end - start > cfg.max_utterances) {
            if (rho <= cfg.rho_floor_s) {
                // Closest to the seed are the earliest members of the run.
                end = start + cfg.max_utterances;
                truncated = true;
                break;
            }
            rho = std::max(rho / 2.0, cfg.rho_floor_s);
            end = closure_end(start, rho);
        }
        out.groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                                order.begin() + static_cast<std::ptrdiff_t>(end));
        out.rho_final_s.push_back(rho);
        out.truncated.push_back(truncated);
        start = end;
    }
    return out;
}

std::vector<Session> build_sessions(const std::vector<EventRecord>& events, const SessionBuilderConfig& cfg) {
    std::vector<double> timestamps;
    timestamps.reserve(events.size());
    for (const auto& e : events) timestamps.push_back(e.timestamp_s);

    const SessionPartition part = partition_sessions(timestamps, cfg);
    std::vector<Session> sessions;
    sessions.reserve(part.groups.size());
    for (std::size_t s = 0; s < part.groups.size(); ++s) {
        char name[32];
        std::snprintf(name, sizeof name, "session-%05zu", s);
        Session session{name, {}, part.rho_final_s[s], part.truncated[s]};
        for (std::size_t idx : part.groups[s]) session.turns.push_back(events[idx]);
        sessions.push_back(std::move(session));
    }
    return sessions;
}

} // namespace clc
