#include "clc/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "clc/embedding_io.hpp"
#include "clc/grad_check.hpp"
#include "clc/injection.hpp"
#include "clc/losses.hpp"
#include "clc/manifest.hpp"
#include "clc/metrics.hpp"
#include "clc/pipeline.hpp"
#include "clc/rephrase.hpp"
#include "clc/sessions.hpp"

namespace clc {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ParseError:
        return exit_code::parse;
    case ErrorKind::ShapeMismatch:
    case ErrorKind::TraceMismatch:
        return exit_code::shape;
    case ErrorKind::MissingEmbedding:
        return exit_code::missing_embedding;
    case ErrorKind::EmptyCorpus:
        return exit_code::empty_corpus;
    case ErrorKind::IoError:
        return exit_code::io;
    case ErrorKind::ZeroNorm:
    case ErrorKind::NonFinite:
    case ErrorKind::NotNormalized:
        return exit_code::numeric;
    case ErrorKind::EmptyInput:
    case ErrorKind::BatchTooSmall:
    case ErrorKind::NoAlternativeHypothesis:
    case ErrorKind::BadChunkSize:
    case ErrorKind::InvalidConfig:
    case ErrorKind::EmptyErrorPool:
    case ErrorKind::NoTemplateApplies:
    case ErrorKind::ZeroBaseline:
    case ErrorKind::EmptyNBest:
        return exit_code::invalid_input;
    }
    return exit_code::invalid_input;
}

namespace {

constexpr const char* kExitCodeHelp = R"(Exit codes:
  0  success
  1  a check failed (grad-check above tolerance, validate found errors)
  2  usage error
  3  malformed JSON / JSONL input
  4  shape or dimension mismatch
  5  missing embedding file
  6  empty corpus
  7  invalid configuration or input values
  8  I/O failure
  9  numerical failure (non-finite value, zero-norm vector)

Environment:
  CLC_LOG  log level on stderr: trace, debug, info, warn (default), error, off)";

void setup_logging() {
    auto logger = spdlog::get("clc");
    if (!logger) {
        logger = spdlog::stderr_logger_mt("clc");
        spdlog::set_default_logger(logger);
    }
    spdlog::set_pattern("[clc] [%l] %v");
    const char* level = std::getenv("CLC_LOG");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

// Output file that only appears under its final name once complete.
class AtomicOutput {
public:
    AtomicOutput(std::optional<fs::path> path, std::ostream& fallback) : path_(std::move(path)), fallback_(fallback) {
        if (path_) {
            tmp_ = *path_;
            tmp_ += ".tmp";
            file_.open(tmp_, std::ios::binary | std::ios::trunc);
            if (!file_) throw Error(ErrorKind::IoError, "cannot open " + tmp_.string() + " for writing");
        }
    }
    ~AtomicOutput() {
        if (path_ && !committed_) {
            file_.close();
            std::error_code ec;
            fs::remove(tmp_, ec);
        }
    }
    AtomicOutput(const AtomicOutput&) = delete;
    AtomicOutput& operator=(const AtomicOutput&) = delete;

    std::ostream& stream() { return path_ ? static_cast<std::ostream&>(file_) : fallback_; }

    void commit() {
        if (!path_) return;
        file_.close();
        if (!file_) throw Error(ErrorKind::IoError, "write failed for " + tmp_.string());
        fs::rename(tmp_, *path_);
        committed_ = true;
    }

private:
    std::optional<fs::path> path_;
    std::ostream& fallback_;
    fs::path tmp_;
    std::ofstream file_;
    bool committed_ = false;
};

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::string in;
    std::string out;
    std::optional<std::size_t> chunk_size;
    bool mask_future = false;
};

RunConfig effective_config(const Globals& g) {
    RunConfig cfg = g.config.empty() ? RunConfig{} : load_run_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    cfg.injection.rng_seed = cfg.seed;
    if (g.mode) {
        auto p = parse_precision(*g.mode);
        if (!p) throw Error(ErrorKind::InvalidConfig, "--mode must be verify or fast");
        cfg.mode = *p;
    }
    if (!g.in.empty()) cfg.in = g.in;
    if (!g.out.empty()) cfg.out = g.out;
    if (g.chunk_size) cfg.chunk_size = *g.chunk_size;
    if (g.mask_future) cfg.mask_future = true;
    cfg.validate();
    return cfg;
}

fs::path require_in(const RunConfig& cfg) {
    if (cfg.in.empty()) throw Error(ErrorKind::InvalidConfig, "an input path is required (--in)");
    return cfg.in;
}

std::optional<fs::path> out_path(const RunConfig& cfg) {
    if (cfg.out.empty()) return std::nullopt;
    return cfg.out;
}

// Embedding refs are relative to the manifest that holds them; keep them
// valid when the output lands in another directory.
void rebase_refs(Turn& t, const fs::path& from_dir, const std::optional<fs::path>& to) {
    if (!to) return;
    const fs::path to_dir = fs::absolute(to->parent_path());
    const fs::path from = fs::absolute(from_dir);
    if (from.lexically_normal() == to_dir.lexically_normal()) return;
    for (auto* ref : {&t.embedding_ref, &t.semantic_ref, &t.hyp_embedding_ref}) {
        if (!*ref) continue;
        const fs::path p(**ref);
        if (p.is_absolute()) continue;
        **ref = (from / p).lexically_normal().lexically_relative(to_dir).generic_string();
    }
}

void write_rebased(std::ostream& os, Session s, const fs::path& from_dir, const std::optional<fs::path>& to) {
    for (auto& t : s.turns) rebase_refs(t, from_dir, to);
    write_session(os, s);
}

int cmd_build_sessions(const RunConfig& cfg, std::ostream& out) {
    const fs::path in = require_in(cfg);
    const auto events = read_events(in);
    const auto sessions = build_sessions(events, cfg.session);
    AtomicOutput sink(out_path(cfg), out);
    std::size_t truncated = 0;
    for (const auto& s : sessions) {
        if (s.truncated) {
            ++truncated;
            spdlog::warn("{} hit the {} s floor and was cut to {} turns", s.session_id, cfg.session.rho_floor_s,
                         cfg.session.max_utterances);
        }
        write_rebased(sink.stream(), s, in.parent_path(), out_path(cfg));
    }
    sink.commit();
    spdlog::info("{} events -> {} sessions ({} truncated)", events.size(), sessions.size(), truncated);
    return exit_code::ok;
}

int cmd_detect(const RunConfig& cfg, std::ostream& out) {
    const fs::path in = require_in(cfg);
    ManifestReader reader(in);
    EmbeddingStore store(in.parent_path());
    AtomicOutput sink(out_path(cfg), out);
    std::size_t count = 0;
    while (auto s = reader.next_session()) {
        std::vector<std::optional<Vector>> emb;
        for (const auto& t : s->turns) {
            std::optional<Vector> v;
            if (t.speaker == Speaker::user) {
                if (t.semantic_ref) {
                    v = mean_pool_rows(store.load(*t.semantic_ref));
                } else if (t.embedding_ref) {
                    v = mean_pool_rows(store.load(*t.embedding_ref));
                }
            }
            emb.push_back(std::move(v));
        }
        for (const auto& l : detect_repeat_rephrase(*s, emb, cfg.similarity_threshold)) {
            for (auto& t : s->turns) {
                if (t.event_id != l.turn_id) continue;
                if (std::find(t.labels.begin(), t.labels.end(), l) == t.labels.end()) t.labels.push_back(l);
            }
            ++count;
        }
        write_rebased(sink.stream(), std::move(*s), in.parent_path(), out_path(cfg));
    }
    sink.commit();
    spdlog::info("detected {} repeat/rephrase labels", count);
    return exit_code::ok;
}

// Two passes over the input: the first counts candidates, the second applies
// the seeded selection, so only one session is in memory at a time.
int cmd_inject(const RunConfig& cfg, std::ostream& out) {
    const fs::path in = require_in(cfg);
    InjectionConfig inj = cfg.injection;
    inj.rng_seed = cfg.seed;
    Injector injector(inj, TemplateRephraser(cfg.rephrase_mapping));

    std::vector<std::size_t> candidates;
    {
        ManifestReader reader(in);
        std::size_t index = 0;
        while (auto s = reader.next_session()) {
            if (is_injection_candidate(*s, turn_wer_table({*s}), inj.wer_candidate_threshold)) {
                candidates.push_back(index);
            }
            ++index;
        }
    }
    std::set<std::size_t> chosen;
    for (std::size_t pick : injector.select(candidates.size())) chosen.insert(candidates[pick]);

    ManifestReader reader(in);
    AtomicOutput sink(out_path(cfg), out);
    std::size_t index = 0;
    std::size_t labels = 0;
    while (auto s = reader.next_session()) {
        if (chosen.count(index)) labels += injector.apply(*s, turn_wer_table({*s})).size();
        write_rebased(sink.stream(), std::move(*s), in.parent_path(), out_path(cfg));
        ++index;
    }
    sink.commit();
    spdlog::info("{} candidates, {} sessions modified, {} labels", candidates.size(), chosen.size(), labels);
    return exit_code::ok;
}

int cmd_filter(const RunConfig& cfg, std::ostream& out) {
    const fs::path in = require_in(cfg);
    ManifestReader reader(in);
    AtomicOutput sink(out_path(cfg), out);
    std::size_t dropped = 0;
    while (auto s = reader.next_session()) {
        std::vector<std::pair<Words, Words>> pairs;
        std::vector<std::size_t> where;
        for (std::size_t i = 0; i < s->turns.size(); ++i) {
            const Turn& t = s->turns[i];
            if (t.speaker != Speaker::user || t.hypotheses.empty()) continue;
            pairs.emplace_back(tokenize(t.transcript), tokenize(t.hypotheses.front().text));
            where.push_back(i);
        }
        const auto r = filter_high_deletion(pairs, cfg.deletion_rate_threshold);
        std::set<std::size_t> drop;
        for (std::size_t d : r.dropped) {
            drop.insert(where[d]);
            spdlog::info("dropping {} (deletion rate {:.3f})", s->turns[where[d]].event_id, r.deletion_rates[d]);
        }
        dropped += drop.size();
        Session kept{s->session_id, {}, s->rho_final_s, s->truncated};
        for (std::size_t i = 0; i < s->turns.size(); ++i) {
            if (!drop.count(i)) kept.turns.push_back(std::move(s->turns[i]));
        }
        if (!kept.turns.empty()) write_rebased(sink.stream(), std::move(kept), in.parent_path(), out_path(cfg));
    }
    sink.commit();
    spdlog::info("dropped {} turns", dropped);
    return exit_code::ok;
}

json alignment_json(const AlignmentResult& a) {
    return {{"wer", a.wer()},         {"substitutions", a.substitutions}, {"deletions", a.deletions},
            {"insertions", a.insertions}, {"hits", a.hits},                 {"ref_len", a.ref_len}};
}

json corpus_json(const CorpusScore& s) {
    return {{"wer", s.wer},
            {"ser", s.ser},
            {"n_utterances", s.n_utterances},
            {"n_ref_words", s.n_ref_words},
            {"substitutions", s.substitutions},
            {"deletions", s.deletions},
            {"insertions", s.insertions}};
}

std::vector<std::string> slices_of(const json& j, std::size_t line) {
    std::vector<std::string> out;
    if (!j.contains("slice")) return out;
    const json& s = j["slice"];
    if (s.is_string()) {
        out.push_back(s.get<std::string>());
    } else if (s.is_array()) {
        for (const auto& e : s) {
            if (!e.is_string()) throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": bad slice");
            out.push_back(e.get<std::string>());
        }
    } else if (!s.is_null()) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": slice must be a string or array");
    }
    return out;
}

std::string text_field(const json& j, const char* key, std::size_t line) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + " [" + key + "]: string required");
    }
    return j[key].get<std::string>();
}

// Reads {ref, hyp} or {ref, nbest: [...]} lines, optionally tagged with a
// "slice" name, and reports pooled WER/SER overall and per slice.
int cmd_score(const RunConfig& cfg, std::ostream& out) {
    const fs::path in = require_in(cfg);
    std::ifstream is(in);
    if (!is) throw Error(ErrorKind::IoError, "cannot open " + in.string());

    std::vector<AlignmentResult> top1, oracle;
    std::map<std::string, std::vector<AlignmentResult>> slices;
    json per_utt = json::array();
    std::string text;
    std::size_t line = 0;
    while (std::getline(is, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::ParseError, in.string() + " line " + std::to_string(line) + ": " + e.what());
        }
        if (!j.is_object()) throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": not an object");
        const Words ref = tokenize(text_field(j, "ref", line));
        json entry;
        if (j.contains("id")) entry["id"] = j["id"];
        if (j.contains("nbest")) {
            if (!j["nbest"].is_array()) throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": nbest");
            std::vector<Words> nbest;
            for (const auto& h : j["nbest"]) {
                if (h.is_string()) {
                    nbest.push_back(tokenize(h.get<std::string>()));
                } else if (h.is_object() && h.contains("text") && h["text"].is_string()) {
                    nbest.push_back(tokenize(h["text"].get<std::string>()));
                } else {
                    throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + " [nbest]: bad entry");
                }
            }
            const auto best = oracle_alignment(ref, nbest);
            top1.push_back(align(ref, nbest.front()));
            oracle.push_back(best.alignment);
            entry["oracle_wer"] = best.wer;
            entry["oracle_index"] = best.index;
        } else {
            top1.push_back(align(ref, tokenize(text_field(j, "hyp", line))));
            oracle.push_back(top1.back());
        }
        entry.update(alignment_json(top1.back()));
        for (const auto& name : slices_of(j, line)) slices[name].push_back(top1.back());
        per_utt.push_back(std::move(entry));
    }
    if (top1.empty()) throw Error(ErrorKind::EmptyCorpus, "no scored lines in " + in.string());

    json report = corpus_json(corpus_score(top1));
    report["oracle_wer"] = corpus_score(oracle).wer;
    json sj = json::object();
    for (const auto& [name, alignments] : slices) sj[name] = corpus_json(corpus_score(alignments));
    report["slices"] = sj;
    report["per_utt"] = per_utt;

    AtomicOutput sink(out_path(cfg), out);
    sink.stream() << report.dump(2) << '\n';
    sink.commit();
    return exit_code::ok;
}

json load_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

double report_number(const json& r, const char* key, const std::string& where) {
    if (!r.is_object() || !r.contains(key) || !r[key].is_number()) {
        throw Error(ErrorKind::ParseError, where + ": numeric '" + key + "' required");
    }
    return r[key].get<double>();
}

json relative_json(const json& base, const json& sys, const std::string& where) {
    json out;
    for (const auto& [metric, key] : {std::pair{"wer", "werr"}, std::pair{"ser", "serr"}}) {
        const double b = report_number(base, metric, where);
        const double s = report_number(sys, metric, where);
        out[key] = b > 0 ? json(relative_improvement(b, s)) : json(nullptr);
    }
    return out;
}

// WERR/SERR of a system report over a baseline report, overall and for
// every slice present in both.
int cmd_compare(const fs::path& baseline, const fs::path& system, const RunConfig& cfg, std::ostream& out) {
    const json b = load_json(baseline);
    const json s = load_json(system);
    // The pipeline report keeps its scores under "metrics".
    const json& bm = b.contains("metrics") && b["metrics"].is_object() ? b["metrics"] : b;
    const json& sm = s.contains("metrics") && s["metrics"].is_object() ? s["metrics"] : s;
    if (report_number(bm, "wer", baseline.string()) <= 0) {
        throw Error(ErrorKind::ZeroBaseline, "baseline WER is zero; relative improvement is undefined");
    }
    json report = relative_json(bm, sm, "report");
    report["baseline"] = {{"wer", bm["wer"]}, {"ser", bm["ser"]}};
    report["system"] = {{"wer", sm["wer"]}, {"ser", sm["ser"]}};
    json slices = json::object();
    auto slice_map = [](const json& r) {
        json m = json::object();
        if (r.contains("slices") && r["slices"].is_object()) m = r["slices"];
        if (r.contains("repeat_rephrase") && r["repeat_rephrase"].is_object()) m["repeat_rephrase"] = r["repeat_rephrase"];
        return m;
    };
    const json bs = slice_map(bm);
    const json ss = slice_map(sm);
    for (const auto& [name, value] : bs.items()) {
        if (ss.contains(name)) slices[name] = relative_json(value, ss[name], "slice " + name);
    }
    report["slices"] = slices;
    AtomicOutput sink(out_path(cfg), out);
    sink.stream() << report.dump(2) << '\n';
    sink.commit();
    return exit_code::ok;
}

template <typename Real>
double frob(const BasicMatrix<Real>& m) {
    double s = 0;
    for (Real x : m.values()) s += double(x) * double(x);
    return std::sqrt(s);
}

template <typename Real>
json eval_batch(const json& manifest, const fs::path& base, const RunConfig& cfg) {
    auto load = [&](const json& j, const char* what) {
        if (!j.is_string()) throw Error(ErrorKind::ParseError, std::string("batch manifest: ") + what + " must be a path");
        fs::path p(j.get<std::string>());
        if (p.is_relative()) p = base / p;
        if (!fs::exists(p)) throw Error(ErrorKind::MissingEmbedding, "embedding file " + p.string() + " does not exist");
        return cast<Real>(read_clce(p));
    };
    LossConfig lc = cfg.loss;
    if (cfg.mask_future) lc.alpha = 0.0;
    json out;
    double l_pf = 0, l_nbest = 0;
    if (manifest.contains("pf")) {
        const json& p = manifest["pf"];
        BasicPfBatch<Real> batch;
        batch.current = load(p.value("current", json()), "pf.current");
        if (lc.beta > 0 || p.contains("past")) batch.past = load(p.value("past", json()), "pf.past");
        if (!cfg.mask_future && (lc.alpha > 0 || p.contains("future"))) {
            batch.future = load(p.value("future", json()), "pf.future");
        }
        const std::size_t chunk = std::min(cfg.chunk_size, batch.size());
        const auto r = chunk == 0 ? pf_loss(batch, lc) : pf_loss_chunked(batch, lc, chunk);
        l_pf = double(r.loss);
        out["pf"] = {{"loss", l_pf},
                     {"future_mean", double(r.future_mean)},
                     {"past_mean", double(r.past_mean)},
                     {"samples", batch.size()},
                     {"chunk_size", chunk},
                     {"peak_similarity_workspace", r.peak_similarity_workspace},
                     {"grad_norms",
                      {{"current", frob(r.grads.current)},
                       {"past", frob(r.grads.past)},
                       {"future", frob(r.grads.future)}}}};
    }
    if (manifest.contains("nbest")) {
        const json& n = manifest["nbest"];
        BasicNBestBatch<Real> batch;
        batch.current = load(n.value("current", json()), "nbest.current");
        if (!n.contains("hypotheses") || !n["hypotheses"].is_array()) {
            throw Error(ErrorKind::ParseError, "batch manifest: nbest.hypotheses must be an array of paths");
        }
        for (const auto& h : n["hypotheses"]) batch.hypotheses.push_back(load(h, "nbest.hypotheses[]"));
        if (!n.contains("labels") || !n["labels"].is_array()) {
            throw Error(ErrorKind::ParseError, "batch manifest: nbest.labels must be an array");
        }
        for (const auto& l : n["labels"]) {
            if (l == "rephrase") {
                batch.labels.push_back(NBestLabel::rephrase);
            } else if (l == "success") {
                batch.labels.push_back(NBestLabel::success);
            } else {
                throw Error(ErrorKind::ParseError, "batch manifest: labels must be \"rephrase\" or \"success\"");
            }
        }
        const auto r = nbest_loss(batch, lc);
        l_nbest = double(r.loss);
        double hyp = 0;
        for (const auto& g : r.grads.hypotheses) hyp += frob(g) * frob(g);
        out["nbest"] = {{"loss", l_nbest},
                        {"negative_mean", double(r.negative_mean)},
                        {"positive_mean", double(r.positive_mean)},
                        {"rephrase_samples", r.rephrase_count},
                        {"success_samples", r.success_count},
                        {"grad_norms", {{"current", frob(r.grads.current)}, {"hypotheses", std::sqrt(hyp)}}}};
    }
    double l_asr = cfg.l_asr;
    if (manifest.contains("l_asr")) {
        if (!manifest["l_asr"].is_number()) throw Error(ErrorKind::ParseError, "batch manifest: l_asr must be a number");
        l_asr = manifest["l_asr"].get<double>();
    }
    out["l_asr"] = l_asr;
    out["overall"] = overall_loss(l_asr, l_pf, l_nbest, lc);
    return out;
}

int cmd_loss_eval(const RunConfig& cfg, std::ostream& out) {
    const fs::path in = require_in(cfg);
    const json manifest = load_json(in);
    if (!manifest.is_object() || (!manifest.contains("pf") && !manifest.contains("nbest"))) {
        throw Error(ErrorKind::ParseError, "batch manifest needs a \"pf\" or \"nbest\" section");
    }
    const json report = cfg.mode == Precision::verify ? eval_batch<double>(manifest, in.parent_path(), cfg)
                                                      : eval_batch<float>(manifest, in.parent_path(), cfg);
    AtomicOutput sink(out_path(cfg), out);
    sink.stream() << report.dump(2) << '\n';
    sink.commit();
    return exit_code::ok;
}

struct GradCheckOptions {
    std::size_t seeds = 20;
    std::size_t n = 6;
    std::size_t d = 4;
    std::size_t k = 3;
    std::size_t h = 5;
};

int cmd_grad_check(const RunConfig& cfg, const GradCheckOptions& o, std::ostream& out) {
    if (o.n > 16 || o.d > 8 || o.n < 2 || o.d < 1 || o.seeds == 0) {
        throw Error(ErrorKind::InvalidConfig, "grad-check needs 2 <= n <= 16, 1 <= d <= 8, seeds >= 1");
    }
    json checks = json::array();
    bool ok = true;
    double worst = 0;
    auto record = [&](const GradCheckReport& r) {
        json tensors = json::array();
        for (const auto& t : r.tensors) {
            tensors.push_back({{"name", t.name}, {"max_rel_error", t.max_rel_error}, {"max_abs_error", t.max_abs_error}});
        }
        const bool pass = r.passed();
        ok = ok && pass;
        worst = std::max(worst, r.max_rel_error());
        if (!pass) spdlog::error("{} seed {} failed: {:.3e}", r.check, r.seed, r.max_rel_error());
        checks.push_back({{"check", r.check},
                          {"seed", r.seed},
                          {"max_rel_error", r.max_rel_error()},
                          {"passed", pass},
                          {"tensors", tensors}});
    };
    for (std::uint64_t i = 0; i < o.seeds; ++i) {
        const std::uint64_t seed = cfg.seed + i;
        record(pf_grad_check(seed, o.n, o.d, cfg.loss));
        record(nbest_grad_check(seed, o.n, o.d, cfg.loss));
        record(head_pf_grad_check(seed, o.n, o.k, o.h, o.d, cfg.loss));
    }
    const json report = {{"tolerance", kGradCheckTolerance},
                         {"step", kFiniteDifferenceStep},
                         {"max_rel_error", worst},
                         {"passed", ok},
                         {"checks", checks}};
    AtomicOutput sink(out_path(cfg), out);
    sink.stream() << report.dump(2) << '\n';
    sink.commit();
    return ok ? exit_code::ok : exit_code::check_failed;
}

int cmd_run_pipeline(const RunConfig& cfg, std::ostream& out) {
    require_in(cfg);
    const json report = run_pipeline(cfg);
    if (cfg.out.empty()) out << report.dump(2) << '\n';
    return exit_code::ok;
}

int cmd_validate(const RunConfig& cfg, std::optional<std::size_t> dim, bool sessions, std::ostream& out) {
    const fs::path in = require_in(cfg);
    if (!fs::exists(in)) throw Error(ErrorKind::IoError, "cannot open " + in.string());
    const auto diags = validate_manifest(in, {dim, sessions});
    std::size_t errors = 0;
    for (const auto& d : diags) {
        out << format_diagnostic(d) << '\n';
        if (d.severity == Severity::error) ++errors;
    }
    spdlog::info("{} diagnostics, {} errors", diags.size(), errors);
    return errors == 0 ? exit_code::ok : exit_code::check_failed;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    setup_logging();

    CLI::App app{"Contrastive loss toolkit: sessions, injection, metrics, loss evaluation", "clc"};
    app.footer(kExitCodeHelp);
    app.require_subcommand(1);

    Globals g;
    app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed for every stochastic step");
    app.add_option("--mode", g.mode, "verify (64-bit) or fast (32-bit)")->check(CLI::IsMember({"verify", "fast"}));
    app.add_option("--in", g.in, "Input path");
    app.add_option("--out", g.out, "Output path (default: stdout)");
    app.add_option("--chunk-size", g.chunk_size, "Column chunk for the past/future loss (0 = dense)");
    app.add_flag("--mask-future", g.mask_future, "Use only past and current context");

    std::optional<double> threshold;
    auto* build = app.add_subcommand("build-sessions", "Group a JSONL event stream into sessions");
    auto* detect = app.add_subcommand("detect", "Label repeats and rephrases in a session manifest");
    detect->add_option("--threshold", threshold, "Cosine similarity threshold in (0, 1]");
    auto* inject = app.add_subcommand("inject", "Insert synthetic repeat/rephrase turns");
    auto* filter = app.add_subcommand("filter", "Drop user turns with a high deletion rate");
    filter->add_option("--threshold", threshold, "Deletion-rate threshold in [0, 1]");
    auto* score = app.add_subcommand("score", "WER/SER of a JSONL of {ref, hyp | nbest}");
    std::string baseline, system;
    auto* compare = app.add_subcommand("compare", "WERR/SERR of a system report over a baseline report");
    compare->add_option("baseline", baseline, "Baseline report")->required()->check(CLI::ExistingFile);
    compare->add_option("system", system, "System report")->required()->check(CLI::ExistingFile);
    auto* loss_eval = app.add_subcommand("loss-eval", "Evaluate the losses on a JSON batch manifest");
    GradCheckOptions gc;
    auto* grad = app.add_subcommand("grad-check", "Finite-difference check of the analytic gradients");
    grad->add_option("--seeds", gc.seeds, "Number of consecutive seeds");
    grad->add_option("--n", gc.n, "Batch size (<= 16)");
    grad->add_option("--d", gc.d, "Embedding dimension (<= 8)");
    auto* pipeline = app.add_subcommand("run-pipeline", "Sessions, injection, detection, losses and metrics");
    std::optional<std::size_t> dim;
    bool need_sessions = false;
    auto* validate = app.add_subcommand("validate", "Check a JSONL manifest and its embedding files");
    validate->add_option("--embedding-dim", dim, "Required frame embedding width");
    validate->add_flag("--sessions", need_sessions, "Require session_id and turn_index");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_code::ok : exit_code::usage;
    }

    try {
        RunConfig cfg = effective_config(g);
        if (threshold) {
            if (detect->parsed()) cfg.similarity_threshold = *threshold;
            if (filter->parsed()) cfg.deletion_rate_threshold = *threshold;
            cfg.validate();
        }
        if (build->parsed()) return cmd_build_sessions(cfg, out);
        if (detect->parsed()) return cmd_detect(cfg, out);
        if (inject->parsed()) return cmd_inject(cfg, out);
        if (filter->parsed()) return cmd_filter(cfg, out);
        if (score->parsed()) return cmd_score(cfg, out);
        if (compare->parsed()) return cmd_compare(baseline, system, cfg, out);
        if (loss_eval->parsed()) return cmd_loss_eval(cfg, out);
        if (grad->parsed()) return cmd_grad_check(cfg, gc, out);
        if (pipeline->parsed()) return cmd_run_pipeline(cfg, out);
        if (validate->parsed()) return cmd_validate(cfg, dim, need_sessions, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::io;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::parse;
    }
    return exit_code::usage;
}

} // namespace clc
