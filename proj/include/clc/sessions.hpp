#pragma once

// Session construction from a stream of timestamped interactions.
//
// The earliest unassigned event seeds a session. Its members are the
// transitive closure of "within rho seconds of an included event". While the
// session holds more than max_utterances events, rho is halved (clamped to
// the floor) and the closure recomputed around the same seed. If the floor
// still leaves too many events, the max_utterances events closest in time to
// the seed are kept, earlier events winning ties. Assigned events leave the
// pool and seeding repeats.

#include <span>
#include <vector>

#include "clc/dialogue.hpp"

namespace clc {

struct SessionBuilderConfig {
    double rho_initial_s = 90.0;
    double rho_floor_s = 15.0;
    std::size_t max_utterances = 5;

    void validate() const;
};

struct SessionPartition {
    // Indices into the input, each group in time order.
    std::vector<std::vector<std::size_t>> groups;
    std::vector<double> rho_final_s;
    std::vector<bool> truncated;
};

SessionPartition partition_sessions(std::span<const double> timestamps, const SessionBuilderConfig& cfg);

// Sessions are named session-00000, session-00001, ... in seeding order.
std::vector<Session> build_sessions(const std::vector<EventRecord>& events, const SessionBuilderConfig& cfg);

} // namespace clc
