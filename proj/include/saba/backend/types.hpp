#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saba/core/types.hpp"

namespace saba::backend {

struct ModelRequest {
    PromptKind kind = PromptKind::DirectAnswer;
    std::string rendered_prompt;
    double temperature = 0.0;
    std::string case_id;
    int round = 0;
    std::string discriminator;  // distinguishes calls of one kind within a round
};

struct AttemptUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
    std::string raw_text;  // kept so parse failures can be surfaced verbatim
};

struct ModelResponse {
    std::string raw_text;
    nlohmann::json parsed;  // schema-validated payload
    long prompt_tokens = 0;
    long completion_tokens = 0;
    bool cache_hit = false;
    std::string token_source = "estimator";
    long latency_ms = 0;
    std::vector<AttemptUsage> failed_attempts;  // spend of attempts before success
};

struct EmbeddingVector {
    std::vector<double> values;  // unit-normalized on ingestion
    int dimension() const { return static_cast<int>(values.size()); }
};

} // namespace saba::backend
