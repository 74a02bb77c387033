#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saba/backend/cache.hpp"
#include "saba/backend/types.hpp"
#include "saba/errors.hpp"
#include "saba/util.hpp"

namespace saba::backend {

// One raw provider exchange before parsing/validation.
struct RawAttempt {
    bool transport_ok = false;
    std::string transport_error;
    std::string raw_text;
    std::optional<long> reported_prompt_tokens;
    std::optional<long> reported_completion_tokens;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual RawAttempt call(const ModelRequest& request, int attempt) = 0;
    virtual std::string model_name() const = 0;
};

// Thrown when every attempt produced an unusable payload; carries the raw
// responses and their token spend so callers can log before aborting.
class ParseExhausted : public Error {
public:
    ParseExhausted(ErrorClass cls, const std::string& message, std::vector<AttemptUsage> attempts)
        : Error(cls, message), attempts_(std::move(attempts)) {}
    const std::vector<AttemptUsage>& attempts() const { return attempts_; }

private:
    std::vector<AttemptUsage> attempts_;
};

class TransportExhausted : public Error {
public:
    TransportExhausted(const std::string& message, std::vector<AttemptUsage> attempts)
        : Error(ErrorClass::BackendUnavailable, message), attempts_(std::move(attempts)) {}
    const std::vector<AttemptUsage>& attempts() const { return attempts_; }

private:
    std::vector<AttemptUsage> attempts_;
};

// Returns an error message when the payload violates the kind's schema.
using Validator = std::function<std::optional<std::string>(const nlohmann::json&)>;

/// Locates the structured payload inside a model reply: tolerates code fences
// and prose around a single top-level JSON object.
inline std::optional<nlohmann::json> extract_payload(const std::string& raw_text) {
    const size_t begin = raw_text.find('{');
    const size_t end = raw_text.rfind('}');
    if (begin == std::string::npos || end == std::string::npos || end < begin) return std::nullopt;
    auto parsed = nlohmann::json::parse(raw_text.substr(begin, end - begin + 1), nullptr, false);
    if (parsed.is_discarded()) return std::nullopt;
    return parsed;
}

struct ClientOptions {
    int retry_budget = 3;  // attempts per request, transport and schema alike
    bool cache_enabled = true;
};

// Uniform completion path: cache lookup, provider attempts with retry on
// transport or schema failure, token accounting, cache store on success.
class ModelClient {
public:
    ModelClient(std::shared_ptr<Provider> provider, ClientOptions options,
                std::shared_ptr<ResponseCache> cache = nullptr)
        : provider_(std::move(provider)), options_(options), cache_(std::move(cache)) {
        if (options_.cache_enabled && !cache_) cache_ = std::make_shared<ResponseCache>();
    }

    ModelResponse complete(const ModelRequest& request, const Validator& validate,
                           ErrorClass parse_error_class) {
        const std::string key = ResponseCache::key_for(request.kind, request.rendered_prompt,
                                                       request.temperature, provider_->model_name());
        if (options_.cache_enabled) {
            if (auto cached = cache_->lookup(key)) return *cached;
        }

        std::vector<AttemptUsage> attempts;
        std::string last_error;
        bool saw_transport_response = false;

        for (int attempt = 0; attempt < options_.retry_budget; ++attempt) {
            const auto start = std::chrono::steady_clock::now();
            RawAttempt raw = provider_->call(request, attempt);
            const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - start)
                                     .count();

            if (!raw.transport_ok) {
                last_error = raw.transport_error;
                attempts.push_back(AttemptUsage{0, 0, ""});
                continue;
            }
            saw_transport_response = true;

            AttemptUsage usage;
            usage.prompt_tokens =
                raw.reported_prompt_tokens.value_or(util::estimate_tokens(request.rendered_prompt));
            usage.completion_tokens =
                raw.reported_completion_tokens.value_or(util::estimate_tokens(raw.raw_text));
            usage.raw_text = raw.raw_text;

            auto payload = extract_payload(raw.raw_text);
            std::optional<std::string> schema_error;
            if (!payload) schema_error = "no JSON object in response";
            else schema_error = validate(*payload);

            if (schema_error) {
                last_error = *schema_error;
                attempts.push_back(usage);
                continue;
            }

            ModelResponse response;
            response.raw_text = raw.raw_text;
            response.parsed = *payload;
            response.prompt_tokens = usage.prompt_tokens;
            response.completion_tokens = usage.completion_tokens;
            response.cache_hit = false;
            response.token_source =
                (raw.reported_prompt_tokens && raw.reported_completion_tokens) ? "provider" : "estimator";
            response.latency_ms = elapsed;
            response.failed_attempts = attempts;
            if (options_.cache_enabled) cache_->store(key, response);
            return response;
        }

        if (!saw_transport_response)
            throw TransportExhausted("provider unreachable after " +
                                         std::to_string(options_.retry_budget) + " attempts (" +
                                         last_error + ")",
                                     std::move(attempts));

        std::string detail = to_string(request.kind);
        detail += " response failed schema validation after ";
        detail += std::to_string(options_.retry_budget);
        detail += " attempts: " + last_error + "; raw attempts:";
        for (const auto& a : attempts) {
            if (a.raw_text.empty()) continue;
            detail += "\n---\n" + a.raw_text;
        }
        throw ParseExhausted(parse_error_class, detail, std::move(attempts));
    }

    const std::shared_ptr<Provider>& provider() const { return provider_; }
    const ClientOptions& options() const { return options_; }

private:
    std::shared_ptr<Provider> provider_;
    ClientOptions options_;
    std::shared_ptr<ResponseCache> cache_;
};

} // namespace saba::backend
