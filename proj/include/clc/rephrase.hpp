#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace clc {

// Any total, deterministic text -> text function can stand in for the
// rephrase generator.
using Rephraser = std::function<std::string(std::string_view)>;

inline constexpr std::string_view kFallbackRephrasePrefix = "I meant: ";

// Deterministic rephrasing from a user mapping table, then a fixed set of
// phrase templates ("are there X" -> "is there any X"), then word synonyms.
// Output is lowercased and punctuation-free. When nothing applies the text
// is returned with kFallbackRephrasePrefix, so the result always differs
// from the input.
class TemplateRephraser {
public:
    TemplateRephraser() = default;
    // Keys are matched after lowercasing and punctuation stripping.
    explicit TemplateRephraser(std::map<std::string, std::string> mapping);

    // nullopt when no mapping or template changes the text. Throws
    // EmptyInput for text without words.
    std::optional<std::string> try_rephrase(std::string_view text) const;

    // Like try_rephrase but throws NoTemplateApplies instead of returning
    // nullopt.
    std::string rephrase_strict(std::string_view text) const;

    std::string operator()(std::string_view text) const;

private:
    std::map<std::string, std::string> mapping_;
};

std::string template_rephrase(std::string_view text);

} // namespace clc
