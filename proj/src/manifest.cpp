#include "clc/manifest.hpp"

#include <cmath>
#include <sstream>

#include "clc/embedding_io.hpp"
#include "clc/error.hpp"

namespace clc {

using nlohmann::json;

namespace {

void add(std::vector<Diagnostic>& out, std::size_t line, std::string field, std::string message,
         Severity severity = Severity::error) {
    out.push_back(Diagnostic{severity, line, std::move(field), std::move(message)});
}

bool optional_string(const json& j, const char* key) {
    return !j.contains(key) || j[key].is_null() || j[key].is_string();
}

// Field-level schema checks shared by parsing and validation.
std::vector<Diagnostic> check_record(const json& j, std::size_t line) {
    std::vector<Diagnostic> out;
    if (!j.is_object()) {
        add(out, line, "", "line is not a JSON object");
        return out;
    }

    bool is_user = true;
    if (!j.contains("speaker")) {
        add(out, line, "speaker", "missing required field");
    } else if (!j["speaker"].is_string() || !parse_speaker(j["speaker"].get<std::string>())) {
        add(out, line, "speaker", "must be \"user\" or \"agent\"");
    } else {
        is_user = j["speaker"] == "user";
    }

    if (!j.contains("timestamp_s")) {
        add(out, line, "timestamp_s", "missing required field");
    } else if (!j["timestamp_s"].is_number() || !std::isfinite(j["timestamp_s"].get<double>())) {
        add(out, line, "timestamp_s", "must be a finite number");
    }

    if (!j.contains("transcript")) {
        add(out, line, "transcript", "missing required field");
    } else if (!j["transcript"].is_string()) {
        add(out, line, "transcript", "must be a string");
    } else if (is_user && j["transcript"].get<std::string>().empty()) {
        add(out, line, "transcript", "user turns need a non-empty transcript");
    }

    for (const char* key : {"event_id", "session_id", "embedding_ref", "semantic_ref", "hyp_embedding_ref"}) {
        if (!optional_string(j, key)) add(out, line, key, "must be a string");
    }
    if (j.contains("turn_index") && !j["turn_index"].is_number_unsigned()) {
        add(out, line, "turn_index", "must be a non-negative integer");
    }
    if (j.contains("wer") && !j["wer"].is_null()) {
        if (!j["wer"].is_number() || !(j["wer"].get<double>() >= 0.0)) {
            add(out, line, "wer", "must be a non-negative number");
        }
    }
    if (j.contains("hyp_transcripts")) {
        const auto& h = j["hyp_transcripts"];
        if (!h.is_array()) {
            add(out, line, "hyp_transcripts", "must be an array");
        } else {
            for (const auto& e : h) {
                const bool ok = e.is_string() || (e.is_object() && e.contains("text") && e["text"].is_string() &&
                                                  (!e.contains("score") || e["score"].is_number()));
                if (!ok) {
                    add(out, line, "hyp_transcripts", "entries must be strings or {\"text\", \"score\"} objects");
                    break;
                }
            }
        }
    }
    if (j.contains("labels")) {
        const auto& l = j["labels"];
        if (!l.is_array()) {
            add(out, line, "labels", "must be an array");
        } else {
            for (const auto& e : l) {
                const bool ok = e.is_object() && e.contains("kind") && e["kind"].is_string() &&
                                parse_repeat_kind(e["kind"].get<std::string>()) && e.contains("source_turn_id") &&
                                e["source_turn_id"].is_string() && optional_string(e, "turn_id");
                if (!ok) {
                    add(out, line, "labels",
                        "entries must be {\"kind\": repeat|rephrase, \"source_turn_id\", \"turn_id\"?}");
                    break;
                }
            }
        }
    }
    return out;
}

std::optional<std::string> string_field(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
}

} // namespace

std::string format_diagnostic(const Diagnostic& d) {
    std::ostringstream os;
    os << "line " << d.line << ": " << (d.severity == Severity::error ? "error" : "warning");
    if (!d.field.empty()) os << " [" << d.field << "]";
    os << ": " << d.message;
    return os.str();
}

ManifestRecord record_from_json(const json& j, std::size_t line) {
    const auto problems = check_record(j, line);
    for (const auto& d : problems) {
        if (d.severity == Severity::error) throw Error(ErrorKind::ParseError, format_diagnostic(d));
    }

    ManifestRecord r;
    r.line = line;
    r.session_id = string_field(j, "session_id");
    if (j.contains("turn_index")) r.turn_index = j["turn_index"].get<std::size_t>();

    Turn& t = r.turn;
    t.speaker = *parse_speaker(j["speaker"].get<std::string>());
    t.timestamp_s = j["timestamp_s"].get<double>();
    t.transcript = j["transcript"].get<std::string>();
    if (auto id = string_field(j, "event_id")) {
        t.event_id = *id;
    } else if (r.session_id && r.turn_index) {
        t.event_id = *r.session_id + "/" + std::to_string(*r.turn_index);
    } else {
        t.event_id = "line-" + std::to_string(line);
    }
    if (j.contains("hyp_transcripts")) {
        for (const auto& e : j["hyp_transcripts"]) {
            if (e.is_string()) {
                t.hypotheses.push_back({e.get<std::string>(), 0.0});
            } else {
                t.hypotheses.push_back({e["text"].get<std::string>(), e.value("score", 0.0)});
            }
        }
    }
    if (j.contains("wer") && !j["wer"].is_null()) t.wer = j["wer"].get<double>();
    t.embedding_ref = string_field(j, "embedding_ref");
    t.semantic_ref = string_field(j, "semantic_ref");
    t.hyp_embedding_ref = string_field(j, "hyp_embedding_ref");
    if (j.contains("labels")) {
        for (const auto& e : j["labels"]) {
            t.labels.push_back({e.value("turn_id", t.event_id), *parse_repeat_kind(e["kind"].get<std::string>()),
                                e["source_turn_id"].get<std::string>()});
        }
    }
    return r;
}

json event_to_json(const Turn& t) {
    json j;
    j["event_id"] = t.event_id;
    j["speaker"] = std::string(to_string(t.speaker));
    j["timestamp_s"] = t.timestamp_s;
    j["transcript"] = t.transcript;
    json hyps = json::array();
    for (const auto& h : t.hypotheses) hyps.push_back({{"text", h.text}, {"score", h.score}});
    j["hyp_transcripts"] = std::move(hyps);
    j["wer"] = t.wer ? json(*t.wer) : json(nullptr);
    if (t.embedding_ref) j["embedding_ref"] = *t.embedding_ref;
    if (t.semantic_ref) j["semantic_ref"] = *t.semantic_ref;
    if (t.hyp_embedding_ref) j["hyp_embedding_ref"] = *t.hyp_embedding_ref;
    json labels = json::array();
    for (const auto& l : t.labels) {
        labels.push_back(
            {{"kind", std::string(to_string(l.kind))}, {"turn_id", l.turn_id}, {"source_turn_id", l.source_turn_id}});
    }
    j["labels"] = std::move(labels);
    return j;
}

json turn_to_json(const Turn& t, const std::string& session_id, std::size_t turn_index) {
    json j = event_to_json(t);
    j["session_id"] = session_id;
    j["turn_index"] = turn_index;
    return j;
}

ManifestReader::ManifestReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    }
}

std::optional<ManifestRecord> ManifestReader::next_record() {
    if (pending_) {
        auto r = std::move(pending_);
        pending_.reset();
        return r;
    }
    std::string text;
    while (std::getline(in_, text)) {
        ++line_;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::ParseError, path_.string() + " line " + std::to_string(line_) + ": " + e.what());
        }
        return record_from_json(j, line_);
    }
    return std::nullopt;
}

std::optional<Session> ManifestReader::next_session() {
    auto first = next_record();
    if (!first) return std::nullopt;
    if (!first->session_id) {
        throw Error(ErrorKind::ParseError,
                    path_.string() + " line " + std::to_string(first->line) + ": session_id is required");
    }
    Session s;
    s.session_id = *first->session_id;
    s.turns.push_back(std::move(first->turn));
    while (auto r = next_record()) {
        if (r->session_id != s.session_id) {
            pending_ = std::move(r);
            break;
        }
        s.turns.push_back(std::move(r->turn));
    }
    return s;
}

std::vector<EventRecord> read_events(const std::filesystem::path& path) {
    ManifestReader reader(path);
    std::vector<EventRecord> events;
    while (auto r = reader.next_record()) events.push_back(std::move(r->turn));
    return events;
}

std::vector<Session> read_sessions(const std::filesystem::path& path) {
    ManifestReader reader(path);
    std::vector<Session> sessions;
    while (auto s = reader.next_session()) sessions.push_back(std::move(*s));
    return sessions;
}

void write_session(std::ostream& out, const Session& session) {
    for (std::size_t i = 0; i < session.turns.size(); ++i) {
        out << turn_to_json(session.turns[i], session.session_id, i).dump() << '\n';
    }
}

void write_sessions(const std::filesystem::path& path, const std::vector<Session>& sessions) {
    std::ostringstream os;
    for (const auto& s : sessions) write_session(os, s);
    write_file_atomically(path, os.str());
}

std::filesystem::path EmbeddingStore::resolve(const std::string& ref) const {
    const std::filesystem::path p(ref);
    return p.is_absolute() ? p : base_ / p;
}

const Matrix& EmbeddingStore::load(const std::string& ref) {
    const auto path = resolve(ref);
    auto it = cache_.find(path);
    if (it == cache_.end()) {
        if (!std::filesystem::exists(path)) {
            throw Error(ErrorKind::MissingEmbedding, "embedding file " + path.string() + " does not exist");
        }
        it = cache_.emplace(path, read_clce(path)).first;
    }
    return it->second;
}

namespace {

struct RefCheck {
    const char* field;
    std::optional<std::size_t> expected_cols;
};

void check_ref(std::vector<Diagnostic>& out, std::size_t line, const std::filesystem::path& base, const json& j,
               RefCheck& check) {
    if (!j.contains(check.field) || !j[check.field].is_string()) return;
    const std::filesystem::path ref(j[check.field].get<std::string>());
    const auto path = ref.is_absolute() ? ref : base / ref;
    if (!std::filesystem::exists(path)) {
        add(out, line, check.field, "file not found: " + path.string());
        return;
    }
    ClceHeader h;
    try {
        h = read_clce_header(path);
    } catch (const Error& e) {
        add(out, line, check.field, std::string("unreadable embedding file: ") + e.what());
        return;
    }
    if (!h.complete()) {
        add(out, line, check.field,
            "dimension mismatch: header declares " + std::to_string(h.rows) + "x" + std::to_string(h.cols) + " (" +
                std::to_string(std::uint64_t(h.rows) * h.cols) + " values) but the file holds " +
                std::to_string(h.payload_values) + (h.stray_bytes ? " values and a partial value" : " values"));
        return;
    }
    if (h.rows == 0) {
        add(out, line, check.field, "embedding file has no rows");
        return;
    }
    if (!check.expected_cols) {
        check.expected_cols = h.cols;
    } else if (*check.expected_cols != h.cols) {
        add(out, line, check.field,
            "dimension mismatch: expected " + std::to_string(*check.expected_cols) + " columns, file has " +
                std::to_string(h.cols));
    }
}

} // namespace

std::vector<Diagnostic> validate_manifest(const std::filesystem::path& path,
                                          const ManifestValidationOptions& options) {
    std::vector<Diagnostic> out;
    std::ifstream in(path);
    if (!in) {
        add(out, 0, "", "cannot open " + path.string());
        return out;
    }
    const auto base = path.parent_path();
    RefCheck frames{"embedding_ref", options.embedding_dim};
    RefCheck semantic{"semantic_ref", std::nullopt};
    RefCheck hyps{"hyp_embedding_ref", std::nullopt};

    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            add(out, line, "", std::string("invalid JSON: ") + e.what());
            continue;
        }
        auto problems = check_record(j, line);
        if (j.is_object() && options.require_session_fields) {
            for (const char* key : {"session_id", "turn_index"}) {
                if (!j.contains(key)) add(problems, line, key, "missing required field");
            }
        }
        out.insert(out.end(), problems.begin(), problems.end());
        if (!j.is_object()) continue;
        check_ref(out, line, base, j, frames);
        check_ref(out, line, base, j, semantic);
        check_ref(out, line, base, j, hyps);
    }
    return out;
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
        }
        out << contents;
        if (!out) {
            throw Error(ErrorKind::IoError, "write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace clc
