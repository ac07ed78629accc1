#pragma once

// Reference values and brute-force reimplementations the tests compare
// against. Constants were evaluated with 30-digit arithmetic (mpmath).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "clc/sessions.hpp"

namespace clc::oracle {

inline constexpr double kLseOneTwoThree = 3.40760596444438;            // log(e + e^2 + e^3)
inline constexpr double kInfoNceUnitTemp = 0.313261687518222834;       // log((e + 1) / e)
inline constexpr double kInfoNceTenthTemp = 4.5398899216864646e-5;     // log(1 + e^-10)
inline constexpr double kPfOrthogonal = 0.626523375036445668;          // 2 log((e + 1) / e)
inline constexpr double kNegativeUnitTemp = 1.31326168751822283;       // log(e + 1)
inline constexpr double kOverallExample = 2.93978506255466850;         // 2 + 0.626524 + 0.313262, unrounded parts
inline constexpr double kRelativeImprovementTable = 19.2273135669362;  // 100 (11.13 - 8.99) / 11.13

struct BruteSession {
    std::vector<std::size_t> members; // ordered by (timestamp, index)
    double rho = 0;
    bool truncated = false;
};

// Direct transcription of the session rule on index sets: the closure is
// grown to a fixed point by scanning every pair, with no use of sorting.
inline std::vector<BruteSession> brute_force_sessions(const std::vector<double>& t, const SessionBuilderConfig& cfg) {
    std::vector<bool> assigned(t.size(), false);
    std::vector<BruteSession> out;
    auto earlier = [&](std::size_t a, std::size_t b) { return t[a] < t[b] || (t[a] == t[b] && a < b); };

    for (;;) {
        std::size_t seed = t.size();
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!assigned[i] && (seed == t.size() || earlier(i, seed))) seed = i;
        }
        if (seed == t.size()) break;

        double rho = cfg.rho_initial_s;
        std::vector<bool> in;
        for (;;) {
            in.assign(t.size(), false);
            in[seed] = true;
            for (bool grew = true; grew;) {
                grew = false;
                for (std::size_t i = 0; i < t.size(); ++i) {
                    if (assigned[i] || in[i]) continue;
                    for (std::size_t j = 0; j < t.size(); ++j) {
                        if (in[j] && std::abs(t[i] - t[j]) <= rho) {
                            in[i] = true;
                            grew = true;
                            break;
                        }
                    }
                }
            }
            const auto size = static_cast<std::size_t>(std::count(in.begin(), in.end(), true));
            if (size <= cfg.max_utterances || rho <= cfg.rho_floor_s) break;
            rho = std::max(rho / 2, cfg.rho_floor_s);
        }

        BruteSession s;
        s.rho = rho;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (in[i]) s.members.push_back(i);
        }
        if (s.members.size() > cfg.max_utterances) {
            std::sort(s.members.begin(), s.members.end(), [&](std::size_t a, std::size_t b) {
                const double da = std::abs(t[a] - t[seed]);
                const double db = std::abs(t[b] - t[seed]);
                return da < db || (da == db && earlier(a, b));
            });
            s.members.resize(cfg.max_utterances);
            s.truncated = true;
        }
        std::sort(s.members.begin(), s.members.end(), earlier);
        for (std::size_t i : s.members) assigned[i] = true;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace clc::oracle
