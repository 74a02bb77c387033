#pragma once

#include <cstdlib>
#include <string>

#include <nlohmann/json.hpp>

#include "httplib.h"

#include "saba/backend/provider.hpp"
#include "saba/errors.hpp"

namespace saba::backend {

struct HttpOptions {
    std::string base_url = "http://localhost:8080";
    std::string model = "default-model";
    std::string token_env = "SABA_API_TOKEN";
    std::string completions_path = "/v1/chat/completions";
    std::string embeddings_path = "/v1/embeddings";
    int timeout_seconds = 60;
};

// Chat-completion wire mapping, kept free of I/O so it is testable offline.
inline nlohmann::json build_completion_body(const ModelRequest& request, const std::string& model) {
    return nlohmann::json{
        {"messages", nlohmann::json::array({nlohmann::json{{"content", request.rendered_prompt},
                                                           {"role", "user"}}})},
        {"model", model},
        {"temperature", request.temperature},
    };
}

inline RawAttempt parse_completion_body(const std::string& body) {
    RawAttempt out;
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j.at("choices").is_array() ||
        j.at("choices").empty()) {
        out.transport_ok = false;
        out.transport_error = "malformed completion body";
        return out;
    }
    out.transport_ok = true;
    out.raw_text = j.at("choices").at(0).value("message", nlohmann::json::object())
                       .value("content", std::string{});
    if (j.contains("usage")) {
        const auto& usage = j.at("usage");
        if (usage.contains("prompt_tokens")) out.reported_prompt_tokens = usage.at("prompt_tokens").get<long>();
        if (usage.contains("completion_tokens"))
            out.reported_completion_tokens = usage.at("completion_tokens").get<long>();
    }
    return out;
}

class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpOptions options) : options_(std::move(options)) {}

    RawAttempt call(const ModelRequest& request, int /*attempt*/) override {
        httplib::Client client(options_.base_url);
        client.set_read_timeout(options_.timeout_seconds, 0);
        client.set_connection_timeout(options_.timeout_seconds, 0);
        httplib::Headers headers;
        if (const char* token = std::getenv(options_.token_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + token);

        auto body = build_completion_body(request, options_.model).dump();
        auto res = client.Post(options_.completions_path, headers, body, "application/json");

        RawAttempt out;
        if (!res) {
            out.transport_ok = false;
            out.transport_error = "connection failed: " + httplib::to_string(res.error());
            return out;
        }
        if (res->status == 429 || res->status >= 500) {
            out.transport_ok = false;
            out.transport_error = "status " + std::to_string(res->status);
            return out;
        }
        if (res->status != 200) {
            out.transport_ok = false;
            out.transport_error = "status " + std::to_string(res->status) + ": " + res->body;
            return out;
        }
        return parse_completion_body(res->body);
    }

    std::string model_name() const override { return options_.model; }

    const HttpOptions& options() const { return options_; }

private:
    HttpOptions options_;
};

} // namespace saba::backend
