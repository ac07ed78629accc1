#include <gtest/gtest.h>

#include <fstream>

#include "clc/embedding_io.hpp"
#include "clc/error.hpp"
#include "clc/manifest.hpp"
#include "clc/pipeline.hpp"
#include "clc/sessions.hpp"
#include "temp_dir.hpp"

using namespace clc;
using clc::testing::fixture;
using clc::testing::slurp;
using clc::testing::TempDir;
using clc::testing::write_text;

TEST(Manifest, ReadsFixtureEvents) {
    const auto events = read_events(fixture("events.jsonl"));
    ASSERT_EQ(events.size(), 12u);
    EXPECT_EQ(events[0].event_id, "e00");
    EXPECT_EQ(events[0].speaker, Speaker::user);
    EXPECT_EQ(events[0].hypotheses.size(), 3u);
    EXPECT_EQ(events[1].speaker, Speaker::agent);
    EXPECT_TRUE(events[4].semantic_ref.has_value());
    EXPECT_EQ(*events[4].embedding_ref, "frames/e04.clce");
}

TEST(Manifest, SessionRoundTrip) {
    TempDir dir;
    auto sessions = build_sessions(read_events(fixture("events.jsonl")), SessionBuilderConfig{});
    ASSERT_EQ(sessions.size(), 3u);
    sessions[1].turns[0].wer = 0.5;
    sessions[1].turns[2].labels.push_back({"e06", RepeatKind::rephrase, "e04"});
    write_sessions(dir / "s.jsonl", sessions);
    const auto back = read_sessions(dir / "s.jsonl");
    ASSERT_EQ(back.size(), sessions.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].session_id, sessions[i].session_id);
        EXPECT_EQ(back[i].turns, sessions[i].turns);
    }

    ManifestReader reader(dir / "s.jsonl");
    std::size_t n = 0;
    while (auto r = reader.next_record()) {
        EXPECT_TRUE(r->session_id.has_value());
        EXPECT_EQ(r->line, ++n);
    }
    EXPECT_EQ(n, 12u);
}

TEST(Manifest, PlainStringHypotheses) {
    const auto r = record_from_json(
        nlohmann::json::parse(R"({"event_id":"x","speaker":"user","timestamp_s":1,"transcript":"hi",
                                  "hyp_transcripts":["hi","high"]})"),
        1);
    ASSERT_EQ(r.turn.hypotheses.size(), 2u);
    EXPECT_EQ(r.turn.hypotheses[1].text, "high");
}

TEST(Manifest, ParseErrorsNameTheLine) {
    try {
        read_events(fixture("missing_timestamp.jsonl"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("timestamp_s"), std::string::npos) << e.what();
    }
    TempDir dir;
    write_text(dir / "bad.jsonl", "{\"speaker\": \"user\",\n");
    EXPECT_THROW(read_events(dir / "bad.jsonl"), Error);
    write_text(dir / "robot.jsonl", R"({"speaker":"robot","timestamp_s":0,"transcript":"x"})");
    EXPECT_THROW(read_events(dir / "robot.jsonl"), Error);
}

TEST(Validate, WellFormedFixtureIsClean) {
    EXPECT_TRUE(validate_manifest(fixture("events.jsonl")).empty());
    EXPECT_TRUE(validate_manifest(fixture("events.jsonl"), {4, false}).empty());
}

TEST(Validate, MissingTimestampIsOneError) {
    const auto d = validate_manifest(fixture("missing_timestamp.jsonl"));
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].severity, Severity::error);
    EXPECT_EQ(d[0].line, 2u);
    EXPECT_EQ(d[0].field, "timestamp_s");
    EXPECT_EQ(format_diagnostic(d[0]).rfind("line 2: error [timestamp_s]", 0), 0u);
}

TEST(Validate, TruncatedEmbeddingIsDimensionMismatch) {
    const auto d = validate_manifest(fixture("truncated_ref.jsonl"));
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].line, 2u);
    EXPECT_EQ(d[0].field, "embedding_ref");
    EXPECT_NE(d[0].message.find("dimension mismatch"), std::string::npos) << d[0].message;
}

TEST(Validate, WrongWidthAndMissingFile) {
    const auto wide = validate_manifest(fixture("events.jsonl"), {5, false});
    EXPECT_EQ(wide.size(), 12u);
    for (const auto& d : wide) EXPECT_NE(d.message.find("dimension mismatch"), std::string::npos);

    const auto missing = validate_manifest(fixture("missing_ref.jsonl"));
    ASSERT_EQ(missing.size(), 1u);
    EXPECT_EQ(missing[0].line, 1u);

    const auto sessions = validate_manifest(fixture("events.jsonl"), {std::nullopt, true});
    EXPECT_FALSE(sessions.empty());
}

TEST(EmbeddingStore, LoadsAndReportsMissing) {
    EmbeddingStore store(CLC_FIXTURES_DIR);
    const Matrix& m = store.load("frames/e00.clce");
    EXPECT_EQ(m.cols(), 4u);
    EXPECT_EQ(&store.load("frames/e00.clce"), &m);
    try {
        store.load("frames/nope.clce");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingEmbedding);
    }
    try {
        store.load("frames/truncated.clce");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    }
    EXPECT_EQ(read_clce_header(fixture("frames/truncated.clce")).payload_values, 10u);
}

TEST(AtomicWrite, ReplacesWholeFile) {
    TempDir dir;
    write_file_atomically(dir / "a.txt", "first");
    write_file_atomically(dir / "a.txt", "second");
    EXPECT_EQ(slurp(dir / "a.txt"), "second");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
    EXPECT_EQ(entries, 1u);
}

TEST(RunConfig, JsonRoundTripAndUnknownKeys) {
    const auto cfg = load_run_config(fixture("fixture_config.json"));
    EXPECT_EQ(cfg.seed, 7u);
    EXPECT_EQ(cfg.chunk_size, 3u);
    EXPECT_EQ(cfg.in, fixture("events.jsonl"));
    EXPECT_EQ(cfg.heads.out_dim, 8u);
    const auto again = run_config_from_json(run_config_to_json(cfg), "");
    EXPECT_EQ(run_config_to_json(again), run_config_to_json(cfg));

    try {
        run_config_from_json(nlohmann::json::parse(R"({"sede": 3})"), "");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
    }
    EXPECT_THROW(run_config_from_json(nlohmann::json::parse(R"({"loss": {"tau": -1}})"), ""), Error);
}
