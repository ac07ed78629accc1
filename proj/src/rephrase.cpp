#include "clc/rephrase.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "clc/error.hpp"
#include "clc/metrics.hpp"

namespace clc {

namespace {

struct PhraseTemplate {
    std::string_view from;
    std::string_view to;
};

// Leading phrase rewrites, first match wins.
constexpr std::array<PhraseTemplate, 14> kPhraseTemplates{{
    {"are there", "is there any"},
    {"is there", "do you have"},
    {"can you", "could you"},
    {"could you", "can you"},
    {"i want to", "i would like to"},
    {"i want", "i would like"},
    {"i would like", "i want"},
    {"i need", "i am looking for"},
    {"i'm looking for", "i need"},
    {"what is", "tell me"},
    {"what's", "tell me"},
    {"where is", "what is the location of"},
    {"how do i", "what is the way to"},
    {"please", "kindly"},
}};

constexpr std::array<std::pair<std::string_view, std::string_view>, 24> kSynonyms{{
    {"find", "locate"},      {"book", "reserve"},   {"reserve", "book"},       {"cheap", "inexpensive"},
    {"expensive", "pricey"}, {"show", "display"},   {"restaurant", "eatery"},  {"hotel", "lodging"},
    {"taxi", "cab"},         {"weather", "forecast"}, {"music", "songs"},      {"lights", "lamps"},
    {"turn", "switch"},      {"play", "put on"},    {"call", "phone"},         {"buy", "purchase"},
    {"start", "begin"},      {"stop", "end"},       {"big", "large"},          {"small", "little"},
    {"near", "close to"},    {"tomorrow", "the next day"}, {"today", "this day"}, {"remind", "alert"},
}};

Words split_words(std::string_view phrase) {
    return tokenize(phrase, TextNormalization{false, false});
}

std::string join(const Words& words, std::size_t from = 0) {
    std::string out;
    for (std::size_t i = from; i < words.size(); ++i) {
        if (!out.empty()) out.push_back(' ');
        out += words[i];
    }
    return out;
}

std::optional<std::string> apply_phrase_template(const Words& words) {
    for (const auto& t : kPhraseTemplates) {
        const Words prefix = split_words(t.from);
        if (words.size() < prefix.size() || !std::equal(prefix.begin(), prefix.end(), words.begin())) continue;
        std::string out(t.to);
        const std::string rest = join(words, prefix.size());
        if (!rest.empty()) out += " " + rest;
        return out;
    }
    return std::nullopt;
}

std::optional<std::string> apply_synonyms(const Words& words) {
    Words out;
    bool changed = false;
    for (const auto& w : words) {
        auto it = std::find_if(kSynonyms.begin(), kSynonyms.end(), [&](const auto& s) { return s.first == w; });
        if (it != kSynonyms.end()) {
            out.emplace_back(it->second);
            changed = true;
        } else {
            out.push_back(w);
        }
    }
    if (!changed) return std::nullopt;
    return join(out);
}

} // namespace

TemplateRephraser::TemplateRephraser(std::map<std::string, std::string> mapping) {
    for (auto& [key, value] : mapping) mapping_.emplace(join(tokenize(key)), std::move(value));
}

std::optional<std::string> TemplateRephraser::try_rephrase(std::string_view text) const {
    const Words words = tokenize(text);
    if (words.empty()) {
        throw Error(ErrorKind::EmptyInput, "cannot rephrase empty text");
    }
    std::optional<std::string> out;
    if (auto it = mapping_.find(join(words)); it != mapping_.end()) {
        out = it->second;
    } else if (auto templ = apply_phrase_template(words)) {
        out = std::move(templ);
    } else {
        out = apply_synonyms(words);
    }
    if (out && (*out == text || *out == join(words))) return std::nullopt;
    return out;
}

std::string TemplateRephraser::rephrase_strict(std::string_view text) const {
    auto out = try_rephrase(text);
    if (!out) {
        throw Error(ErrorKind::NoTemplateApplies, "no template rewrites \"" + std::string(text) + "\"");
    }
    return *out;
}

std::string TemplateRephraser::operator()(std::string_view text) const {
    if (auto out = try_rephrase(text)) return *out;
    return std::string(kFallbackRephrasePrefix) + std::string(text);
}

std::string template_rephrase(std::string_view text) {
    static const TemplateRephraser rephraser;
    return rephraser(text);
}

} // namespace clc
