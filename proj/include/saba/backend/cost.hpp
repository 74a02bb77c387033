#pragma once

#include <vector>

#include "saba/core/types.hpp"

namespace saba::backend {

struct CostSummary {
    long total_prompt_tokens = 0;
    long total_completion_tokens = 0;
    long total_calls = 0;
    long cache_hits = 0;

    long total_tokens() const { return total_prompt_tokens + total_completion_tokens; }
};

enum class CostMode {
    IncludeCacheHits,  // cache hits keep their original token counts
    FreshOnly,         // strict spend: cached calls contribute no tokens
};

inline CostSummary cost_summary(const std::vector<TraceRecord>& trace,
                                CostMode mode = CostMode::IncludeCacheHits) {
    CostSummary out;
    for (const auto& record : trace) {
        for (const auto& call : record.model_calls) {
            out.total_calls += 1;
            if (call.cache_hit) {
                out.cache_hits += 1;
                if (mode == CostMode::FreshOnly) continue;
            }
            out.total_prompt_tokens += call.prompt_tokens;
            out.total_completion_tokens += call.completion_tokens;
        }
    }
    return out;
}

} // namespace saba::backend
