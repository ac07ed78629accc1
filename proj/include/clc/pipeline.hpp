#pragma once

// End-to-end run: events -> sessions -> injection + detection -> batches of
// head outputs -> past/future and n-best losses -> corpus metrics.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "clc/injection.hpp"
#include "clc/losses.hpp"
#include "clc/sessions.hpp"
#include "clc/tensor.hpp"

namespace clc {

struct HeadConfig {
    std::size_t hidden_dim = 0; // 0 = same as out_dim
    std::size_t out_dim = 8;
    double dropout_rate = 0.1;

    void validate() const;
};

struct RunConfig {
    LossConfig loss;
    SessionBuilderConfig session;
    InjectionConfig injection;
    HeadConfig heads;
    double similarity_threshold = 0.9;
    double deletion_rate_threshold = kDefaultDeletionRateThreshold;
    std::uint64_t seed = 0;
    Precision mode = Precision::verify;
    // 0 evaluates the dense path; larger values are clamped to the batch size.
    std::size_t chunk_size = 0;
    // Drop the future term and use only past and current context.
    bool mask_future = false;
    // External ASR loss entering the overall objective.
    double l_asr = 0.0;
    std::map<std::string, std::string> rephrase_mapping;
    std::filesystem::path in;
    std::filesystem::path out;

    void validate() const;
};

// Unknown keys are rejected. Relative paths resolve against base_dir.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);

std::string_view to_string(Precision p);
std::optional<Precision> parse_precision(std::string_view s);

inline constexpr const char* kReportSchema = "clc.run_report/1";

// Runs the pipeline on cfg.in and returns the report. When cfg.out is set
// the report is also written there; nothing is written on failure.
nlohmann::json run_pipeline(const RunConfig& cfg);

// Problems with a report's structure, empty when it is well formed.
std::vector<std::string> validate_report(const nlohmann::json& report);

// Per-user-turn WER: the turn's own wer field, else the top hypothesis
// scored against the transcript, else 0.
TurnWer turn_wer_table(const std::vector<Session>& sessions);

} // namespace clc
