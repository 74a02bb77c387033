#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "saba/backend/provider.hpp"
#include "saba/errors.hpp"
#include "saba/util.hpp"

namespace saba::backend {

// Deterministic scripted provider. Scripts are keyed by
// case_id / kind / round / discriminator; a missing key fails loudly with the
// full key named. An entry is either a single response or an "attempts" list
// replayed per attempt index (the last attempt repeats if the list is short).
//
// Script file shape:
//   {
//     "schema_version": 1,
//     "cases": {
//       "<case_id>": {
//         "<Kind>/<round>/<discriminator>": {"response": {...}},
//         "<Kind>/<round>/<discriminator>": {"attempts": [
//             {"transport_error": "..."},
//             {"raw_text": "not json"},
//             {"response": {...}, "prompt_tokens": 100, "completion_tokens": 50}
//         ]}
//       }
//     }
//   }
class MockProvider : public Provider {
public:
    MockProvider() = default;

    explicit MockProvider(const nlohmann::json& script) { load(script); }

    static MockProvider from_file(const std::filesystem::path& path) {
        auto parsed = nlohmann::json::parse(util::read_file(path), nullptr, false);
        if (parsed.is_discarded())
            throw Error(ErrorClass::InputValidation, "mock script is not valid JSON: " + path.string());
        MockProvider p;
        p.load(parsed);
        return p;
    }

    void load(const nlohmann::json& script) {
        if (!script.is_object() || !script.contains("cases") || !script.at("cases").is_object())
            throw Error(ErrorClass::InputValidation, "mock script must carry a 'cases' object");
        for (const auto& [case_id, entries] : script.at("cases").items()) {
            if (!entries.is_object())
                throw Error(ErrorClass::InputValidation, "mock case " + case_id + " must be an object");
            for (const auto& [key, entry] : entries.items()) entries_[case_id + "/" + key] = entry;
        }
    }

    RawAttempt call(const ModelRequest& request, int attempt) override {
        const std::string key = request.case_id + "/" + std::string(to_string(request.kind)) + "/" +
                                std::to_string(request.round) + "/" + request.discriminator;
        auto it = entries_.find(key);
        if (it == entries_.end())
            throw Error(ErrorClass::MissingFixture, "no mock entry for key '" + key + "'");

        nlohmann::json step = it->second;
        if (step.contains("attempts")) {
            const auto& attempts = step.at("attempts");
            if (!attempts.is_array() || attempts.empty())
                throw Error(ErrorClass::InputValidation, "mock entry '" + key + "' has empty attempts");
            size_t idx = std::min<size_t>(static_cast<size_t>(attempt), attempts.size() - 1);
            step = attempts.at(idx);
        }

        RawAttempt out;
        if (step.contains("transport_error")) {
            out.transport_ok = false;
            out.transport_error = step.at("transport_error").get<std::string>();
            return out;
        }
        out.transport_ok = true;
        if (step.contains("raw_text")) out.raw_text = step.at("raw_text").get<std::string>();
        else if (step.contains("response")) out.raw_text = step.at("response").dump();
        else
            throw Error(ErrorClass::InputValidation,
                        "mock entry '" + key + "' needs 'response', 'raw_text' or 'transport_error'");
        if (step.contains("prompt_tokens")) out.reported_prompt_tokens = step.at("prompt_tokens").get<long>();
        if (step.contains("completion_tokens"))
            out.reported_completion_tokens = step.at("completion_tokens").get<long>();
        return out;
    }

    std::string model_name() const override { return "mock"; }

    bool has_case(const std::string& case_id) const {
        auto prefix = case_id + "/";
        auto it = entries_.lower_bound(prefix);
        return it != entries_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
    }

private:
    std::map<std::string, nlohmann::json> entries_;
};

} // namespace saba::backend
