#pragma once

// JSON Lines turn manifests, one turn per line:
//
//   {"session_id": "...", "turn_index": 0, "event_id": "...", "speaker": "user",
//    "timestamp_s": 12.5, "transcript": "...",
//    "hyp_transcripts": [{"text": "...", "score": -1.2}, ...],
//    "wer": 0.25, "embedding_ref": "frames/e1.clce",
//    "semantic_ref": "sem/e1.clce", "hyp_embedding_ref": "hyps/e1.clce",
//    "labels": [{"kind": "repeat", "turn_id": "...", "source_turn_id": "..."}]}
//
// Raw event streams use the same shape without session_id / turn_index.
// hyp_transcripts entries may also be plain strings. Relative refs resolve
// against the manifest's directory.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "clc/dialogue.hpp"
#include "clc/tensor.hpp"

namespace clc {

struct ManifestRecord {
    Turn turn;
    std::optional<std::string> session_id;
    std::optional<std::size_t> turn_index;
    std::size_t line = 0;
};

// Throws ParseError naming the line and field on malformed input.
ManifestRecord record_from_json(const nlohmann::json& j, std::size_t line);
nlohmann::json turn_to_json(const Turn& turn, const std::string& session_id, std::size_t turn_index);
nlohmann::json event_to_json(const Turn& turn);

// Streams a manifest one record or one session (consecutive lines sharing a
// session_id) at a time.
class ManifestReader {
public:
    explicit ManifestReader(const std::filesystem::path& path);

    std::optional<ManifestRecord> next_record();
    std::optional<Session> next_session();

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t line_ = 0;
    std::optional<ManifestRecord> pending_;
};

std::vector<EventRecord> read_events(const std::filesystem::path& path);
std::vector<Session> read_sessions(const std::filesystem::path& path);

void write_session(std::ostream& out, const Session& session);
void write_sessions(const std::filesystem::path& path, const std::vector<Session>& sessions);

// Loads CLCE files relative to a base directory, caching by resolved path.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::filesystem::path base_dir) : base_(std::move(base_dir)) {}

    const Matrix& load(const std::string& ref);
    std::filesystem::path resolve(const std::string& ref) const;

private:
    std::filesystem::path base_;
    std::map<std::filesystem::path, Matrix> cache_;
};

enum class Severity { warning, error };

struct Diagnostic {
    Severity severity = Severity::error;
    std::size_t line = 0;
    std::string field;
    std::string message;
};

std::string format_diagnostic(const Diagnostic& d);

struct ManifestValidationOptions {
    // Required column count of every embedding_ref; when unset, the first
    // readable embedding fixes it.
    std::optional<std::size_t> embedding_dim;
    bool require_session_fields = false;
};

std::vector<Diagnostic> validate_manifest(const std::filesystem::path& path,
                                          const ManifestValidationOptions& options = {});

// Writes to a sibling temporary file and renames it into place, so a failed
// command leaves no partial output.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);

} // namespace clc
