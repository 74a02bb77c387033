#pragma once

#include <nlohmann/json.hpp>

#include "saba/core/state.hpp"
#include "saba/core/types.hpp"

// JSON codecs for every persisted type. Object keys serialize in sorted order
// (nlohmann default), which keeps trace and dataset files byte-stable.

namespace saba {

using nlohmann::json;

namespace detail {
inline std::string require_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw Error(ErrorClass::StructuralValidation, where + ": missing string field '" + key + "'");
    return j.at(key).get<std::string>();
}
inline int require_int(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_number_integer())
        throw Error(ErrorClass::StructuralValidation, where + ": missing integer field '" + key + "'");
    return j.at(key).get<int>();
}
} // namespace detail

inline void to_json(json& j, const TaskDimension& d) { j = d.name(); }
inline void from_json(const json& j, TaskDimension& d) { d = TaskDimension::parse(j.get<std::string>()); }

inline void to_json(json& j, const ObstacleType& t) { j = t.name(); }
inline void from_json(const json& j, ObstacleType& t) { t = ObstacleType::parse(j.get<std::string>()); }

inline void to_json(json& j, const NarrativeUnit& u) {
    j = json{{"id", u.id}, {"ordinal", u.ordinal}, {"text", u.text}};
}
inline void from_json(const json& j, NarrativeUnit& u) {
    u.id = detail::require_string(j, "id", "narrative unit");
    u.text = detail::require_string(j, "text", "narrative unit");
    u.ordinal = detail::require_int(j, "ordinal", "narrative unit");
}

inline void to_json(json& j, const BackboneEvent& e) {
    j = json{{"description", e.description},
             {"id", e.id},
             {"ordinal", e.ordinal},
             {"source_unit_ids", e.source_unit_ids}};
}
inline void from_json(const json& j, BackboneEvent& e) {
    e.id = detail::require_string(j, "id", "event");
    e.description = detail::require_string(j, "description", "event");
    e.ordinal = detail::require_int(j, "ordinal", "event");
    e.source_unit_ids = j.value("source_unit_ids", std::vector<std::string>{});
}

inline void to_json(json& j, const Attribute& a) {
    j = json{{"description", a.description},
             {"id", a.id},
             {"kind", to_string(a.kind)},
             {"source_unit_ids", a.source_unit_ids}};
}
inline void from_json(const json& j, Attribute& a) {
    a.id = detail::require_string(j, "id", "attribute");
    a.description = detail::require_string(j, "description", "attribute");
    auto kind = parse_attribute_kind(detail::require_string(j, "kind", "attribute"));
    if (!kind)
        throw Error(ErrorClass::StructuralValidation,
                    "attribute " + a.id + ": unknown kind " + j.at("kind").get<std::string>());
    a.kind = *kind;
    a.source_unit_ids = j.value("source_unit_ids", std::vector<std::string>{});
}

inline void to_json(json& j, const AlignmentMap& m) { j = json{{"entries", m.entries}}; }
inline void from_json(const json& j, AlignmentMap& m) {
    m.entries = j.value("entries", std::map<std::string, std::vector<std::string>>{});
}

inline void to_json(json& j, const AlignedUnit& u) {
    j = json{{"attributes", u.attributes}, {"event", u.event}};
}
inline void from_json(const json& j, AlignedUnit& u) {
    u.event = j.at("event").get<BackboneEvent>();
    u.attributes = j.value("attributes", std::vector<Attribute>{});
}

inline void to_json(json& j, const ConsistencyComment& c) {
    j = json{{"note", c.note},
             {"referenced_unit_ids", c.referenced_unit_ids},
             {"unit_id", c.unit_id},
             {"verdict", to_string(c.verdict)}};
}
inline void from_json(const json& j, ConsistencyComment& c) {
    c.unit_id = detail::require_string(j, "unit_id", "comment");
    auto v = parse_verdict(detail::require_string(j, "verdict", "comment"));
    if (!v)
        throw Error(ErrorClass::StructuralValidation,
                    "comment on " + c.unit_id + ": unknown verdict " + j.at("verdict").get<std::string>());
    c.verdict = *v;
    c.note = j.value("note", std::string{});
    c.referenced_unit_ids = j.value("referenced_unit_ids", std::vector<std::string>{});
}

inline void to_json(json& j, const BaselinePair& p) {
    j = json{{"comment", p.comment}, {"unit", p.unit}};
}
inline void from_json(const json& j, BaselinePair& p) {
    p.unit = j.at("unit").get<AlignedUnit>();
    p.comment = j.at("comment").get<ConsistencyComment>();
}

inline void to_json(json& j, const BaselineState& b) { j = json{{"pairs", b.pairs}}; }
inline void from_json(const json& j, BaselineState& b) {
    b.pairs = j.value("pairs", std::vector<BaselinePair>{});
}

inline void to_json(json& j, const Obstacle& o) {
    j = json{{"dimension", o.dimension},
             {"id", o.id},
             {"requirement", o.requirement},
             {"round", o.round},
             {"type", o.type}};
}
inline void from_json(const json& j, Obstacle& o) {
    o.id = detail::require_string(j, "id", "obstacle");
    o.type = j.at("type").get<ObstacleType>();
    o.dimension = j.at("dimension").get<TaskDimension>();
    o.requirement = detail::require_string(j, "requirement", "obstacle");
    o.round = detail::require_int(j, "round", "obstacle");
}

inline void to_json(json& j, const QueryItem& q) {
    j = json{{"id", q.id},
             {"obstacle_id", q.obstacle_id},
             {"question", q.question},
             {"round", q.round}};
}
inline void from_json(const json& j, QueryItem& q) {
    q.id = detail::require_string(j, "id", "query");
    q.obstacle_id = detail::require_string(j, "obstacle_id", "query");
    q.question = detail::require_string(j, "question", "query");
    q.round = detail::require_int(j, "round", "query");
}

inline void to_json(json& j, const HypothesisItem& h) {
    j = json{{"id", h.id},
             {"query_id", h.query_id},
             {"round", h.round},
             {"statement", h.statement},
             {"status", to_string(h.status)}};
    if (h.supersedes) j["supersedes"] = *h.supersedes;
}
inline void from_json(const json& j, HypothesisItem& h) {
    h.id = detail::require_string(j, "id", "hypothesis");
    h.query_id = detail::require_string(j, "query_id", "hypothesis");
    h.statement = detail::require_string(j, "statement", "hypothesis");
    auto s = parse_support_status(detail::require_string(j, "status", "hypothesis"));
    if (!s)
        throw Error(ErrorClass::StructuralValidation,
                    "hypothesis " + h.id + ": unknown status " + j.at("status").get<std::string>());
    h.status = *s;
    if (j.contains("supersedes")) h.supersedes = j.at("supersedes").get<std::string>();
    else h.supersedes.reset();
    h.round = detail::require_int(j, "round", "hypothesis");
}

inline void to_json(json& j, const Task& t) {
    j = json{{"dimensions", t.dimensions}, {"instruction", t.instruction}};
}
inline void from_json(const json& j, Task& t) {
    t.dimensions = j.value("dimensions", std::vector<TaskDimension>{});
    t.instruction = j.value("instruction", std::string{});
}

inline void to_json(json& j, const Conclusion& c) {
    json answers = json::object();
    for (const auto& [dim, text] : c.answers) answers[dim.name()] = text;
    j = json{{"answers", answers}, {"rationale", c.rationale}, {"support_ids", c.support_ids}};
}
inline void from_json(const json& j, Conclusion& c) {
    c.answers.clear();
    if (j.contains("answers")) {
        for (const auto& [key, value] : j.at("answers").items())
            c.answers.emplace_back(TaskDimension::parse(key), value.get<std::string>());
    }
    c.rationale = j.value("rationale", std::string{});
    c.support_ids = j.value("support_ids", std::vector<std::string>{});
}

inline void to_json(json& j, const StateSize& s) {
    j = json{{"baseline_units", s.baseline_units}, {"hypotheses", s.hypotheses}, {"queries", s.queries}};
}
inline void from_json(const json& j, StateSize& s) {
    s.baseline_units = j.value("baseline_units", 0);
    s.queries = j.value("queries", 0);
    s.hypotheses = j.value("hypotheses", 0);
}

inline void to_json(json& j, const ModelCall& c) {
    j = json{{"cache_hit", c.cache_hit},
             {"completion_tokens", c.completion_tokens},
             {"kind", to_string(c.kind)},
             {"latency_ms", c.latency_ms},
             {"prompt_tokens", c.prompt_tokens},
             {"token_source", c.token_source}};
}
inline void from_json(const json& j, ModelCall& c) {
    auto k = parse_prompt_kind(detail::require_string(j, "kind", "model call"));
    if (!k) throw Error(ErrorClass::StructuralValidation, "model call: unknown kind");
    c.kind = *k;
    c.prompt_tokens = j.value("prompt_tokens", 0L);
    c.completion_tokens = j.value("completion_tokens", 0L);
    c.cache_hit = j.value("cache_hit", false);
    c.token_source = j.value("token_source", std::string{"estimator"});
    c.latency_ms = j.value("latency_ms", 0L);
}

inline void to_json(json& j, const TraceRecord& r) {
    j = json{{"hypotheses_added", r.hypotheses_added},
             {"model_calls", r.model_calls},
             {"obstacles", r.obstacles},
             {"queries_added", r.queries_added},
             {"round", r.round},
             {"state_size_after", r.state_size_after}};
    if (r.baseline) j["baseline"] = *r.baseline;
}
inline void from_json(const json& j, TraceRecord& r) {
    r.round = detail::require_int(j, "round", "trace record");
    r.obstacles = j.value("obstacles", std::vector<Obstacle>{});
    r.queries_added = j.value("queries_added", std::vector<QueryItem>{});
    r.hypotheses_added = j.value("hypotheses_added", std::vector<HypothesisItem>{});
    r.state_size_after = j.value("state_size_after", StateSize{});
    r.model_calls = j.value("model_calls", std::vector<ModelCall>{});
    if (j.contains("baseline")) r.baseline = j.at("baseline").get<BaselineState>();
    else r.baseline.reset();
}

inline void to_json(json& j, const RunConfig& c) {
    j = json{{"batched_verify", c.batched_verify},
             {"beam_width", c.beam_width},
             {"gate_conflict_threshold", c.gate_conflict_threshold},
             {"gate_doubt_threshold", c.gate_doubt_threshold},
             {"t_max", c.t_max},
             {"temperature", c.temperature},
             {"variant", to_string(c.variant)}};
}
inline void from_json(const json& j, RunConfig& c) {
    c.t_max = j.value("t_max", 3);
    c.gate_conflict_threshold = j.value("gate_conflict_threshold", 0);
    c.gate_doubt_threshold = j.value("gate_doubt_threshold", 0);
    auto v = parse_variant(j.value("variant", std::string{"full"}));
    if (!v) throw Error(ErrorClass::InputValidation, "unknown variant " + j.at("variant").get<std::string>());
    c.variant = *v;
    c.temperature = j.value("temperature", 0.0);
    c.beam_width = j.value("beam_width", 1);
    c.batched_verify = j.value("batched_verify", false);
}

inline void to_json(json& j, const RunResult& r) {
    j = json{{"conclusion", r.conclusion},
             {"rounds_executed", r.rounds_executed},
             {"termination_reason", to_string(r.termination_reason)}};
}
inline void from_json(const json& j, RunResult& r) {
    r.conclusion = j.value("conclusion", Conclusion{});
    auto reason = parse_termination_reason(
        detail::require_string(j, "termination_reason", "run result"));
    if (!reason) throw Error(ErrorClass::StructuralValidation, "run result: unknown termination reason");
    r.termination_reason = *reason;
    r.rounds_executed = detail::require_int(j, "rounds_executed", "run result");
}

} // namespace saba
