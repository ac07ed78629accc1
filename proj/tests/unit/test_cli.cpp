#include <gtest/gtest.h>

#include <sstream>

#include "clc/cli.hpp"
#include "clc/embedding_io.hpp"
#include "clc/injection.hpp"
#include "clc/manifest.hpp"
#include "clc/pipeline.hpp"
#include "clc/rephrase.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace clc;
using clc::testing::fixture;
using clc::testing::slurp;
using clc::testing::TempDir;
using clc::testing::write_text;
using nlohmann::json;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "clc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string s(const std::filesystem::path& p) {
    return p.string();
}

} // namespace

TEST(Cli, PipelineIsDeterministicAndValid) {
    TempDir dir;
    const auto a = run({"run-pipeline", "--config", s(fixture("fixture_config.json")), "--out", s(dir / "a.json")});
    const auto b = run({"run-pipeline", "--config", s(fixture("fixture_config.json")), "--out", s(dir / "b.json")});
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));

    const json report = json::parse(slurp(dir / "a.json"));
    EXPECT_TRUE(validate_report(report).empty());
    EXPECT_EQ(report["schema"], kReportSchema);
    EXPECT_EQ(report["r_set"].size(), 1u);
    EXPECT_EQ(report["counts"]["r_set_size"], 1);
    EXPECT_TRUE(report["losses"]["pf"]["evaluated"].get<bool>());
    EXPECT_LE(report["losses"]["pf"]["peak_similarity_workspace"].get<std::size_t>(),
              3u * report["config"]["heads"]["out_dim"].get<std::size_t>());

    // Without --out the report goes to stdout, byte for byte.
    const auto c = run({"run-pipeline", "--config", s(fixture("fixture_config.json"))});
    EXPECT_EQ(c.out, slurp(dir / "a.json"));
}

TEST(Cli, SeedAndModeChangeTheReport) {
    const auto base = run({"run-pipeline", "--config", s(fixture("fixture_config.json"))});
    const auto other = run({"run-pipeline", "--config", s(fixture("fixture_config.json")), "--seed", "8"});
    const auto fast = run({"run-pipeline", "--config", s(fixture("fixture_config.json")), "--mode", "fast"});
    ASSERT_EQ(fast.code, 0) << fast.err;
    EXPECT_NE(base.out, other.out);
    const json f = json::parse(fast.out), d = json::parse(base.out);
    EXPECT_NEAR(f["losses"]["pf"]["loss"].get<double>(), d["losses"]["pf"]["loss"].get<double>(), 1e-4);
}

TEST(Cli, MaskFutureDropsTheFutureTerm) {
    const auto r = run({"run-pipeline", "--config", s(fixture("fixture_config.json")), "--mask-future"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_TRUE(j["losses"]["pf"]["future_mean"].is_null());
    EXPECT_TRUE(j["losses"]["pf"]["grad_norms"]["head_future"].is_null());
    EXPECT_GT(j["losses"]["pf"]["past_mean"].get<double>(), 0.0);
    EXPECT_TRUE(j["config"]["mask_future"].get<bool>());
}

TEST(Cli, ErrorExitCodesLeaveNoOutput) {
    TempDir dir;
    const auto empty = run({"run-pipeline", "--in", s(fixture("empty.jsonl")), "--out", s(dir / "r.json")});
    EXPECT_EQ(empty.code, exit_code::empty_corpus);
    EXPECT_FALSE(std::filesystem::exists(dir / "r.json"));
    EXPECT_TRUE(std::filesystem::is_empty(dir.path()));

    const auto missing = run({"run-pipeline", "--in", s(fixture("missing_ref.jsonl")), "--out", s(dir / "r.json")});
    EXPECT_EQ(missing.code, exit_code::missing_embedding) << missing.err;
    EXPECT_FALSE(std::filesystem::exists(dir / "r.json"));

    EXPECT_EQ(run({"run-pipeline", "--in", s(fixture("missing_timestamp.jsonl"))}).code, exit_code::parse);
    EXPECT_EQ(run({"run-pipeline", "--in", s(fixture("truncated_ref.jsonl"))}).code, exit_code::shape);
    EXPECT_EQ(run({"run-pipeline"}).code, exit_code::invalid_input);
    EXPECT_EQ(run({"no-such-command"}).code, exit_code::usage);
    EXPECT_EQ(run({"--mode", "slow", "grad-check"}).code, exit_code::usage);
}

TEST(Cli, HelpListsExitCodes) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("CLC_LOG"), std::string::npos);
    EXPECT_NE(r.out.find("missing embedding"), std::string::npos) << r.out;
}

TEST(Cli, BuildSessionsThenInjectMatchesLibrary) {
    TempDir dir;
    ASSERT_EQ(run({"build-sessions", "--in", s(fixture("events.jsonl")), "--out", s(dir / "sessions.jsonl")}).code, 0);
    const auto sessions = read_sessions(dir / "sessions.jsonl");
    ASSERT_EQ(sessions.size(), 3u);
    EXPECT_EQ(sessions[1].turns[0].event_id, "e04");
    // Refs were rewritten relative to the output directory.
    EXPECT_NO_THROW(EmbeddingStore(dir.path()).load(*sessions[0].turns[0].embedding_ref));

    write_text(dir / "cfg.json", R"({"injection": {"injection_rate": 1.0, "repeat_vs_rephrase_split": 0.0}})");
    const auto r = run({"inject", "--config", s(dir / "cfg.json"), "--seed", "11", "--in", s(dir / "sessions.jsonl"),
                        "--out", s(dir / "injected.jsonl")});
    ASSERT_EQ(r.code, 0) << r.err;

    InjectionConfig cfg;
    cfg.injection_rate = 1.0;
    cfg.repeat_vs_rephrase_split = 0.0;
    cfg.rng_seed = 11;
    const auto lib = inject_errors(sessions, turn_wer_table(sessions), cfg, TemplateRephraser{});
    ASSERT_EQ(lib.labels.size(), 1u);
    EXPECT_EQ(lib.labels[0].source_turn_id, "e04");
    EXPECT_EQ(lib.labels[0].kind, RepeatKind::rephrase);
    std::ostringstream expected;
    for (const auto& session : lib.sessions) write_session(expected, session);
    EXPECT_EQ(slurp(dir / "injected.jsonl"), expected.str());
}

TEST(Cli, DetectAndFilter) {
    TempDir dir;
    ASSERT_EQ(run({"build-sessions", "--in", s(fixture("events.jsonl")), "--out", s(dir / "s.jsonl")}).code, 0);
    ASSERT_EQ(run({"inject", "--config", s(fixture("fixture_config.json")), "--in", s(dir / "s.jsonl"), "--out",
                   s(dir / "i.jsonl")})
                  .code,
              0);
    const auto d = run({"detect", "--threshold", "0.99", "--in", s(dir / "i.jsonl")});
    ASSERT_EQ(d.code, 0) << d.err;
    EXPECT_NE(d.out.find(R"("source_turn_id":"e04")"), std::string::npos);
    EXPECT_EQ(run({"detect", "--threshold", "1.5", "--in", s(dir / "i.jsonl")}).code, exit_code::invalid_input);

    const auto f = run({"filter", "--threshold", "0.0", "--in", s(dir / "s.jsonl")});
    ASSERT_EQ(f.code, 0) << f.err;
    std::size_t expected_dropped = 0;
    for (const auto& session : read_sessions(dir / "s.jsonl")) {
        for (const auto& t : session.turns) {
            if (t.speaker == Speaker::user && align(tokenize(t.transcript), tokenize(t.hypotheses[0].text)).deletions)
                ++expected_dropped;
        }
    }
    std::size_t lines = 0;
    for (char ch : f.out) lines += ch == '\n';
    EXPECT_EQ(lines, 12u - expected_dropped);
}

TEST(Cli, ScoreAndCompare) {
    TempDir dir;
    write_text(dir / "base.jsonl",
               R"({"id":"1","ref":"turn on the lights","hyp":"turn off the lights","slice":"rr"}
{"id":"2","ref":"a b c","nbest":["b","a b c"]}
)");
    const auto r = run({"score", "--in", s(dir / "base.jsonl"), "--out", s(dir / "base.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json base = json::parse(slurp(dir / "base.json"));
    EXPECT_DOUBLE_EQ(base["wer"].get<double>(), 3.0 / 7.0);
    EXPECT_DOUBLE_EQ(base["ser"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(base["oracle_wer"].get<double>(), 1.0 / 7.0);
    EXPECT_EQ(base["per_utt"].size(), 2u);
    EXPECT_DOUBLE_EQ(base["slices"]["rr"]["wer"].get<double>(), 0.25);

    write_text(dir / "b.json", R"({"wer": 11.13, "ser": 20.0})");
    write_text(dir / "s.json", R"({"wer": 8.99, "ser": 15.0})");
    const auto c = run({"compare", s(dir / "b.json"), s(dir / "s.json")});
    ASSERT_EQ(c.code, 0) << c.err;
    const json cmp = json::parse(c.out);
    EXPECT_NEAR(cmp["werr"].get<double>(), oracle::kRelativeImprovementTable, 1e-9);
    EXPECT_DOUBLE_EQ(cmp["serr"].get<double>(), 25.0);

    write_text(dir / "z.json", R"({"wer": 0.0, "ser": 0.0})");
    EXPECT_EQ(run({"compare", s(dir / "z.json"), s(dir / "s.json")}).code, exit_code::invalid_input);
    write_text(dir / "empty.jsonl", "");
    EXPECT_EQ(run({"score", "--in", s(dir / "empty.jsonl")}).code, exit_code::empty_corpus);
}

TEST(Cli, LossEvalClosedForms) {
    TempDir dir;
    write_clce(dir / "e.clce", Matrix{{1.0, 0.0}, {0.0, 1.0}});
    write_clce(dir / "c.clce", Matrix{{1.0, 0.0}});
    write_text(dir / "batch.json", R"({"pf": {"current": "e.clce", "past": "e.clce", "future": "e.clce"},
        "nbest": {"current": "c.clce", "hypotheses": ["e.clce"], "labels": ["rephrase"]}, "l_asr": 2.0})");
    write_text(dir / "cfg.json", R"({"loss": {"alpha": 1, "beta": 1, "tau": 1, "gamma": 1, "kappa": 1}})");
    const auto r = run({"loss-eval", "--config", s(dir / "cfg.json"), "--in", s(dir / "batch.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_NEAR(j["pf"]["loss"].get<double>(), oracle::kPfOrthogonal, 1e-12);
    EXPECT_NEAR(j["nbest"]["loss"].get<double>(), oracle::kNegativeUnitTemp, 1e-12);
    EXPECT_NEAR(j["overall"].get<double>(), 2.0 + oracle::kPfOrthogonal + oracle::kNegativeUnitTemp, 1e-12);

    const auto chunked =
        run({"loss-eval", "--config", s(dir / "cfg.json"), "--chunk-size", "1", "--in", s(dir / "batch.json")});
    EXPECT_NEAR(json::parse(chunked.out)["pf"]["loss"].get<double>(), oracle::kPfOrthogonal, 1e-12);

    write_text(dir / "gone.json", R"({"pf": {"current": "nope.clce", "past": "e.clce", "future": "e.clce"}})");
    EXPECT_EQ(run({"loss-eval", "--in", s(dir / "gone.json")}).code, exit_code::missing_embedding);
}

TEST(Cli, GradCheckAndValidate) {
    const auto g = run({"grad-check", "--seeds", "3", "--n", "4", "--d", "3"});
    EXPECT_EQ(g.code, 0) << g.out;
    const json j = json::parse(g.out);
    EXPECT_EQ(j["checks"].size(), 9u);
    EXPECT_TRUE(j["passed"].get<bool>());
    EXPECT_EQ(run({"grad-check", "--n", "17"}).code, exit_code::invalid_input);

    EXPECT_EQ(run({"validate", "--in", s(fixture("events.jsonl"))}).code, 0);
    const auto bad = run({"validate", "--in", s(fixture("missing_timestamp.jsonl"))});
    EXPECT_EQ(bad.code, exit_code::check_failed);
    EXPECT_NE(bad.out.find("line 2: error [timestamp_s]"), std::string::npos) << bad.out;
    const auto trunc = run({"validate", "--in", s(fixture("truncated_ref.jsonl"))});
    EXPECT_NE(trunc.out.find("dimension mismatch"), std::string::npos);
}
