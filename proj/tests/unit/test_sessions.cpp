#include <gtest/gtest.h>

#include <algorithm>

#include "clc/error.hpp"
#include "clc/rng.hpp"
#include "clc/sessions.hpp"
#include "oracles.hpp"

using namespace clc;

namespace {

std::vector<EventRecord> events_at(const std::vector<double>& t) {
    std::vector<EventRecord> out;
    for (std::size_t i = 0; i < t.size(); ++i) {
        EventRecord e;
        e.event_id = "e" + std::to_string(i);
        e.timestamp_s = t[i];
        e.transcript = "hello";
        out.push_back(e);
    }
    return out;
}

std::vector<double> random_stream(Rng& rng) {
    const std::size_t n = rng.uniform_index(51);
    std::vector<double> t(n);
    double now = rng.uniform(0, 100);
    for (auto& x : t) {
        // Mix of tight, medium and wide gaps, plus exact duplicates.
        const double r = rng.uniform01();
        now += r < 0.1 ? 0.0 : r < 0.6 ? rng.uniform(0, 20) : r < 0.9 ? rng.uniform(20, 100) : rng.uniform(100, 400);
        x = now;
    }
    // Shuffle so the builder has to sort.
    for (std::size_t i = n; i > 1; --i) std::swap(t[i - 1], t[rng.uniform_index(i)]);
    return t;
}

} // namespace

TEST(Sessions, WorkedExampleSplitsOnLargeGap) {
    const auto s = build_sessions(events_at({0, 30, 80, 200}), SessionBuilderConfig{});
    ASSERT_EQ(s.size(), 2u);
    ASSERT_EQ(s[0].turns.size(), 3u);
    EXPECT_EQ(s[0].turns[2].timestamp_s, 80.0);
    EXPECT_EQ(s[1].turns.size(), 1u);
    EXPECT_EQ(s[0].session_id, "session-00000");
    EXPECT_EQ(s[1].session_id, "session-00001");
    EXPECT_EQ(s[0].rho_final_s, 90.0);
}

TEST(Sessions, SingleEvent) {
    const auto s = build_sessions(events_at({12.5}), SessionBuilderConfig{});
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].turns.size(), 1u);
    EXPECT_EQ(s[0].rho_final_s, 90.0);
    EXPECT_FALSE(s[0].truncated);
    EXPECT_TRUE(build_sessions({}, SessionBuilderConfig{}).empty());
}

TEST(Sessions, FloorTruncation) {
    const auto s = build_sessions(events_at({0, 10, 20, 30, 40, 50, 60}), SessionBuilderConfig{});
    ASSERT_EQ(s.size(), 2u);
    ASSERT_EQ(s[0].turns.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(s[0].turns[i].timestamp_s, 10.0 * double(i));
    EXPECT_EQ(s[0].rho_final_s, 15.0);
    EXPECT_TRUE(s[0].truncated);
    EXPECT_EQ(s[1].turns.size(), 2u);
}

TEST(Sessions, HalvingStopsOnceSmallEnough) {
    // Gaps of 40 s: at rho 90 and 45 all six chain, at 22.5 the seed is
    // alone. The remaining five then fit at the initial rho.
    const auto part = partition_sessions(std::vector<double>{0, 40, 80, 120, 160, 200}, SessionBuilderConfig{});
    ASSERT_EQ(part.groups.size(), 2u);
    EXPECT_EQ(part.groups[0], (std::vector<std::size_t>{0}));
    EXPECT_EQ(part.rho_final_s[0], 22.5);
    EXPECT_EQ(part.groups[1].size(), 5u);
    EXPECT_EQ(part.rho_final_s[1], 90.0);
    EXPECT_FALSE(part.truncated[0] || part.truncated[1]);
}

TEST(Sessions, UnsortedInputIsSorted) {
    const auto s = build_sessions(events_at({80, 0, 200, 30}), SessionBuilderConfig{});
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].turns[0].event_id, "e1");
    EXPECT_EQ(s[0].turns[1].event_id, "e3");
    EXPECT_EQ(s[0].turns[2].event_id, "e0");
    EXPECT_EQ(s[1].turns[0].event_id, "e2");
}

TEST(Sessions, MatchesBruteForceOracle) {
    Rng rng(2024);
    for (int stream = 0; stream < 200; ++stream) {
        const auto t = random_stream(rng);
        SessionBuilderConfig cfg;
        if (stream % 3 == 1) cfg.max_utterances = 1 + rng.uniform_index(8);
        const auto expected = oracle::brute_force_sessions(t, cfg);
        const auto got = partition_sessions(t, cfg);
        ASSERT_EQ(got.groups.size(), expected.size()) << "stream " << stream;
        std::vector<int> seen(t.size(), 0);
        for (std::size_t s = 0; s < expected.size(); ++s) {
            EXPECT_EQ(got.groups[s], expected[s].members) << "stream " << stream << " session " << s;
            EXPECT_EQ(got.rho_final_s[s], expected[s].rho);
            EXPECT_EQ(got.truncated[s], expected[s].truncated);
            for (std::size_t i : got.groups[s]) ++seen[i];
        }
        EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    }
}

TEST(Sessions, SessionInvariants) {
    Rng rng(31);
    for (int stream = 0; stream < 50; ++stream) {
        const auto t = random_stream(rng);
        for (const auto& s : build_sessions(events_at(t), SessionBuilderConfig{})) {
            for (std::size_t i = 1; i < s.turns.size(); ++i) {
                EXPECT_LE(s.turns[i - 1].timestamp_s, s.turns[i].timestamp_s);
                EXPECT_LE(s.turns[i].timestamp_s - s.turns[i - 1].timestamp_s, s.rho_final_s);
            }
            EXPECT_LE(s.turns.size(), 5u);
            EXPECT_GE(s.rho_final_s, 15.0);
        }
    }
}

TEST(Sessions, RejectsBadConfig) {
    SessionBuilderConfig cfg;
    cfg.rho_floor_s = 0;
    EXPECT_THROW(partition_sessions(std::vector<double>{1.0}, cfg), Error);
    cfg = SessionBuilderConfig{};
    cfg.rho_initial_s = 10;
    EXPECT_THROW(partition_sessions(std::vector<double>{1.0}, cfg), Error);
    EXPECT_THROW(partition_sessions(std::vector<double>{std::nan("")}, SessionBuilderConfig{}), Error);
}
