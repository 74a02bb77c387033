#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "saba/backend/types.hpp"
#include "saba/errors.hpp"
#include "saba/util.hpp"

namespace saba::backend {

// Content-addressed response cache. Keyed by (kind, rendered prompt,
// temperature, model name); persisted one file per entry so concurrent runs
// only ever race on identical content. Only schema-valid responses are stored.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    static std::string key_for(PromptKind kind, const std::string& rendered_prompt,
                               double temperature, const std::string& model_name) {
        char temp_buf[32];
        std::snprintf(temp_buf, sizeof(temp_buf), "%.6g", temperature);
        std::string material = std::string(to_string(kind)) + "\x1f" + rendered_prompt +
                               "\x1f" + temp_buf + "\x1f" + model_name;
        return util::content_hash(material);
    }

    std::optional<ModelResponse> lookup(const std::string& key) const {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = memory_.find(key);
            if (it != memory_.end()) return hit(it->second);
        }
        if (dir_.empty()) return std::nullopt;
        auto path = entry_path(key);
        if (!std::filesystem::exists(path)) return std::nullopt;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(util::read_file(path));
        } catch (const std::exception&) {
            return std::nullopt;  // corrupt entry behaves like a miss
        }
        ModelResponse r;
        r.raw_text = j.value("raw_text", std::string{});
        r.parsed = j.value("parsed", nlohmann::json{});
        r.prompt_tokens = j.value("prompt_tokens", 0L);
        r.completion_tokens = j.value("completion_tokens", 0L);
        r.token_source = j.value("token_source", std::string{"estimator"});
        {
            std::lock_guard<std::mutex> lock(mutex_);
            memory_[key] = r;
        }
        return hit(r);
    }

    void store(const std::string& key, const ModelResponse& response) {
        ModelResponse stored = response;
        stored.cache_hit = false;
        stored.latency_ms = 0;
        stored.failed_attempts.clear();
        {
            std::lock_guard<std::mutex> lock(mutex_);
            memory_[key] = stored;
        }
        if (dir_.empty()) return;
        nlohmann::json j{{"completion_tokens", stored.completion_tokens},
                         {"key", key},
                         {"parsed", stored.parsed},
                         {"prompt_tokens", stored.prompt_tokens},
                         {"raw_text", stored.raw_text},
                         {"token_source", stored.token_source}};
        util::write_file_atomic(entry_path(key), j.dump(2) + "\n");
    }

private:
    static ModelResponse hit(ModelResponse r) {
        // Cache hits keep their original token counts for cost accounting.
        r.cache_hit = true;
        r.latency_ms = 0;
        return r;
    }

    std::filesystem::path entry_path(const std::string& key) const {
        return dir_ / key.substr(0, 2) / (key + ".json");
    }

    std::filesystem::path dir_;  // empty = memory-only
    mutable std::mutex mutex_;
    mutable std::map<std::string, ModelResponse> memory_;
};

} // namespace saba::backend
