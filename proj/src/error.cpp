#include "clc/error.hpp"

namespace clc {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ZeroNorm: return "ZeroNorm";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::TraceMismatch: return "TraceMismatch";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::BatchTooSmall: return "BatchTooSmall";
    case ErrorKind::NoAlternativeHypothesis: return "NoAlternativeHypothesis";
    case ErrorKind::BadChunkSize: return "BadChunkSize";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::EmptyErrorPool: return "EmptyErrorPool";
    case ErrorKind::NoTemplateApplies: return "NoTemplateApplies";
    case ErrorKind::MissingEmbedding: return "MissingEmbedding";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::ZeroBaseline: return "ZeroBaseline";
    case ErrorKind::EmptyNBest: return "EmptyNBest";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace clc
