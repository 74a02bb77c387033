#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saba/backend/provider.hpp"
#include "saba/core/types.hpp"
#include "saba/errors.hpp"
#include "saba/prompts/templates.hpp"
#include "saba/util.hpp"

namespace saba::eval {

using nlohmann::json;

enum class PropositionSource { Prediction, Reference };

struct AtomicProposition {
    std::string id;
    std::string text;
    PropositionSource source = PropositionSource::Prediction;
};

namespace detail {

inline std::string proposition_id(PropositionSource source, int k) {
    return (source == PropositionSource::Prediction ? "p-" : "r-") + std::to_string(k);
}

} // namespace detail

// Identity path for reference fields that ship pre-decomposed.
inline std::vector<AtomicProposition> as_propositions(const std::vector<std::string>& texts,
                                                      PropositionSource source) {
    std::vector<AtomicProposition> out;
    int k = 1;
    for (const auto& t : texts) {
        if (util::is_blank(t))
            throw Error(ErrorClass::InputValidation, "blank proposition text");
        out.push_back({detail::proposition_id(source, k++), util::trim(t), source});
    }
    return out;
}

// Rule-based fallback: split at sentence terminators. A single clause with no
// split points comes back unchanged as one proposition.
inline std::vector<AtomicProposition> rule_split(const std::string& text,
                                                 PropositionSource source) {
    if (util::is_blank(text))
        throw Error(ErrorClass::InputValidation, "cannot decompose blank text");
    std::vector<std::string> parts;
    std::string current;
    for (char ch : text) {
        if (ch == '.' || ch == '!' || ch == '?' || ch == ';') {
            if (!util::is_blank(current)) parts.push_back(util::trim(current));
            current.clear();
        } else {
            current += ch;
        }
    }
    if (!util::is_blank(current)) parts.push_back(util::trim(current));
    if (parts.empty()) parts.push_back(util::trim(text));

    std::vector<AtomicProposition> out;
    int k = 1;
    for (auto& p : parts)
        out.push_back({detail::proposition_id(source, k++), std::move(p), source});
    return out;
}

namespace detail {

inline std::optional<std::string> validate_split_payload(const json& j) {
    if (!j.is_object()) return "payload must be an object";
    if (!j.contains("propositions") || !j.at("propositions").is_array() ||
        j.at("propositions").empty())
        return "propositions must be a non-empty array";
    for (const auto& p : j.at("propositions"))
        if (!p.is_string() || util::is_blank(p.get<std::string>()))
            return "propositions entries must be non-empty strings";
    return std::nullopt;
}

} // namespace detail

// Model-backed decomposition; the discriminator keys the scripted fixture when
// several texts from one case are decomposed.
inline std::vector<AtomicProposition> decompose_propositions(
    backend::ModelClient& client, const prompts::TemplateRegistry& templates,
    const std::string& case_id, const std::string& discriminator, const std::string& text,
    PropositionSource source, double temperature = 0.0) {
    if (util::is_blank(text))
        throw Error(ErrorClass::InputValidation, "cannot decompose blank text");
    backend::ModelRequest req;
    req.kind = PromptKind::SplitPropositions;
    req.rendered_prompt = templates.render_for(PromptKind::SplitPropositions, {{"text", text}});
    req.temperature = temperature;
    req.case_id = case_id;
    req.round = 0;
    req.discriminator = discriminator;

    auto resp = client.complete(req, detail::validate_split_payload, ErrorClass::QsrParse);
    std::vector<std::string> texts;
    for (const auto& p : resp.parsed.at("propositions")) texts.push_back(p.get<std::string>());
    return as_propositions(texts, source);
}

// Decomposer signature shared by the scoring paths; defaults to rule_split so
// evaluation never needs a backend.
using Splitter =
    std::function<std::vector<AtomicProposition>(const std::string&, PropositionSource)>;

inline Splitter rule_splitter() {
    return [](const std::string& text, PropositionSource source) {
        return rule_split(text, source);
    };
}

} // namespace saba::eval
