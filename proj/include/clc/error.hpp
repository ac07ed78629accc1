#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clc {

enum class ErrorKind {
    ZeroNorm,
    EmptyInput,
    NonFinite,
    ShapeMismatch,
    TraceMismatch,
    NotNormalized,
    BatchTooSmall,
    NoAlternativeHypothesis,
    BadChunkSize,
    InvalidConfig,
    EmptyErrorPool,
    NoTemplateApplies,
    MissingEmbedding,
    EmptyCorpus,
    ZeroBaseline,
    EmptyNBest,
    ParseError,
    IoError,
};

std::string_view to_string(ErrorKind kind);

// Every recoverable failure in the library carries a kind so the CLI can map
// it to a stable exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace clc
