#pragma once

#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "saba/backend/provider.hpp"
#include "saba/core/state.hpp"
#include "saba/core/types.hpp"
#include "saba/data/dataset.hpp"
#include "saba/errors.hpp"
#include "saba/fusion/fusion.hpp"
#include "saba/prompts/templates.hpp"

namespace saba::qsr {

using nlohmann::json;

// Adaptive gate: bypass the reasoning loop only when both indicator counts sit
// at or below their thresholds.
inline bool should_gate(int conflicts, int doubts, const RunConfig& config) {
    if (conflicts < 0 || doubts < 0)
        throw Error(ErrorClass::InputValidation, "indicator counts must be non-negative");
    return conflicts <= config.gate_conflict_threshold && doubts <= config.gate_doubt_threshold;
}

struct RunHooks {
    // Called once per finalized trace record, in order; wiring point for the
    // trace store so partial traces survive aborted runs.
    std::function<void(const TraceRecord&)> on_record;
    std::function<void(const std::string&)> on_warning;

    void record(const TraceRecord& r) const { if (on_record) on_record(r); }
    void warn(const std::string& msg) const { if (on_warning) on_warning(msg); }
};

namespace detail {

inline std::string render_task(const Task& task) {
    std::ostringstream os;
    os << task.instruction << "\n" << "Dimensions:";
    for (const auto& d : task.dimensions) os << " " << d.name();
    os << "\n";
    return os.str();
}

inline std::string render_state(const ReasoningState& state) {
    std::ostringstream os;
    for (const auto& p : state.baseline.pairs) {
        os << p.unit.event.id << ": " << p.unit.event.description << "\n";
        for (const auto& a : p.unit.attributes)
            os << "  " << a.id << " [" << to_string(a.kind) << "]: " << a.description << "\n";
        os << "  verdict: " << to_string(p.comment.verdict);
        if (!p.comment.note.empty()) os << " (" << p.comment.note << ")";
        os << "\n";
    }
    for (const auto& q : state.queries)
        os << q.id << " (from " << q.obstacle_id << "): " << q.question << "\n";
    for (const auto& h : state.hypotheses) {
        os << h.id << " [" << to_string(h.status) << "]: " << h.statement;
        if (h.supersedes) os << " (revises " << *h.supersedes << ")";
        os << "\n";
    }
    if (!state.obstacle_ids_seen.empty()) {
        os << "Obstacles noted:";
        for (const auto& id : state.obstacle_ids_seen) os << " " << id;
        os << "\n";
    }
    return os.str();
}

inline std::string render_obstacle(const Obstacle& ob) {
    std::ostringstream os;
    os << ob.id << " [" << ob.type.name() << " / " << ob.dimension.name() << "]: "
       << ob.requirement << "\n";
    return os.str();
}

inline std::optional<std::string> validate_aware_payload(const json& j) {
    if (!j.is_object()) return "payload must be an object";
    if (!j.contains("obstacles") || !j.at("obstacles").is_array())
        return "obstacles must be an array";
    for (const auto& ob : j.at("obstacles")) {
        if (!ob.is_object()) return "obstacles entries must be objects";
        for (const char* field : {"type", "dimension", "requirement"})
            if (!ob.contains(field) || !ob.at(field).is_string())
                return std::string("obstacle ") + field + " must be a string";
        if (util::is_blank(ob.at("requirement").get<std::string>()))
            return "obstacle requirement must be non-empty";
    }
    return std::nullopt;
}

inline std::optional<std::string> validate_decompose_payload(const json& j) {
    if (!j.is_object()) return "payload must be an object";
    if (!j.contains("queries") || !j.at("queries").is_array())
        return "queries must be an array";
    for (const auto& q : j.at("queries"))
        if (!q.is_string() || util::is_blank(q.get<std::string>()))
            return "queries entries must be non-empty strings";
    return std::nullopt;
}

inline backend::Validator make_hypothesize_validator(std::set<std::string> known_hypotheses) {
    return [known = std::move(known_hypotheses)](const json& j) -> std::optional<std::string> {
        if (!j.is_object()) return "payload must be an object";
        if (!j.contains("statement") || !j.at("statement").is_string() ||
            util::is_blank(j.at("statement").get<std::string>()))
            return "statement must be a non-empty string";
        if (j.contains("evidence")) {
            if (!j.at("evidence").is_array()) return "evidence must be an array";
            for (const auto& e : j.at("evidence"))
                if (!e.is_string()) return "evidence entries must be strings";
        }
        if (j.contains("flag") && !j.at("flag").is_boolean()) return "flag must be a boolean";
        if (j.contains("revises") && !j.at("revises").is_null()) {
            if (!j.at("revises").is_string()) return "revises must be a string or null";
            const std::string target = j.at("revises").get<std::string>();
            if (!known.count(target)) return "revises names unknown hypothesis '" + target + "'";
        }
        return std::nullopt;
    };
}

inline backend::Validator make_conclusion_validator(const Task& task) {
    std::vector<std::string> names;
    for (const auto& d : task.dimensions) names.push_back(d.name());
    return [names](const json& j) -> std::optional<std::string> {
        if (!j.is_object()) return "payload must be an object";
        if (!j.contains("answers") || !j.at("answers").is_object())
            return "answers must be an object";
        for (const auto& name : names) {
            if (!j.at("answers").contains(name)) return "missing answer for dimension " + name;
            if (!j.at("answers").at(name).is_string())
                return "answer for dimension " + name + " must be a string";
        }
        if (j.contains("rationale") && !j.at("rationale").is_string())
            return "rationale must be a string";
        if (j.contains("support")) {
            if (!j.at("support").is_array()) return "support must be an array";
            for (const auto& s : j.at("support"))
                if (!s.is_string()) return "support entries must be strings";
        }
        return std::nullopt;
    };
}

inline Conclusion conclusion_from_payload(const json& j, const Task& task) {
    Conclusion out;
    for (const auto& d : task.dimensions)
        out.answers.emplace_back(d, j.at("answers").at(d.name()).get<std::string>());
    out.rationale = j.value("rationale", std::string());
    if (j.contains("support"))
        for (const auto& s : j.at("support")) out.support_ids.push_back(s.get<std::string>());
    return out;
}

} // namespace detail

struct IdentifyResult {
    std::vector<Obstacle> obstacles;
    ModelCall call;
};

// Self-assessment step: asks what premises are still missing for the task.
// An empty list means the state already supports a conclusion.
inline IdentifyResult identify_obstacles(backend::ModelClient& client,
                                         const prompts::TemplateRegistry& templates,
                                         const std::string& case_id, const Task& task,
                                         const ReasoningState& state, int round,
                                         double temperature, const RunHooks& hooks = {}) {
    backend::ModelRequest req;
    req.kind = PromptKind::Aware;
    req.rendered_prompt = templates.render_for(
        PromptKind::Aware,
        {{"task", detail::render_task(task)}, {"state", detail::render_state(state)}});
    req.temperature = temperature;
    req.case_id = case_id;
    req.round = round;

    auto resp = client.complete(req, detail::validate_aware_payload, ErrorClass::QsrParse);

    IdentifyResult out;
    int k = 1;
    for (const auto& entry : resp.parsed.at("obstacles")) {
        Obstacle ob;
        ob.id = ids::obstacle(round, k++);
        ob.round = round;
        ob.type = ObstacleType::parse(entry.at("type").get<std::string>());
        ob.requirement = entry.at("requirement").get<std::string>();
        const std::string dim_name = entry.at("dimension").get<std::string>();
        TaskDimension dim = TaskDimension::parse(dim_name);
        bool declared = false;
        for (const auto& d : task.dimensions)
            if (d == dim) { declared = true; break; }
        if (!declared) {
            hooks.warn("obstacle " + ob.id + " cites undeclared dimension '" + dim_name +
                       "', recorded as-is under Other");
            dim = TaskDimension::other(dim_name);
        }
        ob.dimension = dim;
        out.obstacles.push_back(std::move(ob));
    }
    out.call = fusion::to_model_call(PromptKind::Aware, resp);
    return out;
}

struct DecomposeObstacleResult {
    std::vector<QueryItem> queries;
    ModelCall call;
};

// Splits one obstacle into targeted sub-queries. A model that returns no
// queries gets the requirement itself wrapped as the single query, so every
// obstacle always contributes at least one.
inline DecomposeObstacleResult decompose_obstacle(backend::ModelClient& client,
                                                  const prompts::TemplateRegistry& templates,
                                                  const std::string& case_id,
                                                  const Obstacle& obstacle,
                                                  const ReasoningState& state, int& next_index,
                                                  double temperature) {
    backend::ModelRequest req;
    req.kind = PromptKind::Decompose;
    req.rendered_prompt = templates.render_for(
        PromptKind::Decompose, {{"obstacle", detail::render_obstacle(obstacle)},
                                {"state", detail::render_state(state)}});
    req.temperature = temperature;
    req.case_id = case_id;
    req.round = obstacle.round;
    req.discriminator = obstacle.id;

    auto resp = client.complete(req, detail::validate_decompose_payload, ErrorClass::QsrParse);

    DecomposeObstacleResult out;
    for (const auto& q : resp.parsed.at("queries")) {
        QueryItem item;
        item.id = ids::query(obstacle.round, next_index++);
        item.obstacle_id = obstacle.id;
        item.question = q.get<std::string>();
        item.round = obstacle.round;
        out.queries.push_back(std::move(item));
    }
    if (out.queries.empty()) {
        QueryItem item;
        item.id = ids::query(obstacle.round, next_index++);
        item.obstacle_id = obstacle.id;
        item.question = obstacle.requirement;
        item.round = obstacle.round;
        out.queries.push_back(std::move(item));
    }
    out.call = fusion::to_model_call(PromptKind::Decompose, resp);
    return out;
}

struct HypothesizeResult {
    HypothesisItem hypothesis;
    ModelCall call;
};

// Answers one query with a tentative hypothesis. Support status comes from the
// response: an explicit flag wins, otherwise resolvable citations mean
// Supported and their absence means Unsupported.
inline HypothesizeResult generate_hypothesis(backend::ModelClient& client,
                                             const prompts::TemplateRegistry& templates,
                                             const std::string& case_id, const QueryItem& query,
                                             const ReasoningState& state, int& next_index,
                                             double temperature, const RunHooks& hooks = {}) {
    backend::ModelRequest req;
    req.kind = PromptKind::Hypothesize;
    req.rendered_prompt = templates.render_for(
        PromptKind::Hypothesize,
        {{"query", query.id + ": " + query.question + "\n"},
         {"state", detail::render_state(state)}});
    req.temperature = temperature;
    req.case_id = case_id;
    req.round = query.round;
    req.discriminator = query.id;

    std::set<std::string> known_hyps;
    for (const auto& h : state.hypotheses) known_hyps.insert(h.id);
    auto resp = client.complete(req, detail::make_hypothesize_validator(std::move(known_hyps)),
                                ErrorClass::QsrParse);

    HypothesizeResult out;
    out.hypothesis.id = ids::hypothesis(query.round, next_index++);
    out.hypothesis.query_id = query.id;
    out.hypothesis.round = query.round;
    out.hypothesis.statement = resp.parsed.at("statement").get<std::string>();

    const std::set<std::string> known = state.item_ids();
    int resolvable = 0;
    if (resp.parsed.contains("evidence")) {
        for (const auto& e : resp.parsed.at("evidence")) {
            const std::string id = e.get<std::string>();
            if (known.count(id)) ++resolvable;
            else hooks.warn("hypothesis " + out.hypothesis.id + " cites unknown item '" + id + "'");
        }
    }
    const bool flagged = resp.parsed.value("flag", false);
    if (flagged) out.hypothesis.status = SupportStatus::Flagged;
    else if (resolvable > 0) out.hypothesis.status = SupportStatus::Supported;
    else out.hypothesis.status = SupportStatus::Unsupported;

    if (resp.parsed.contains("revises") && resp.parsed.at("revises").is_string())
        out.hypothesis.supersedes = resp.parsed.at("revises").get<std::string>();
    out.call = fusion::to_model_call(PromptKind::Hypothesize, resp);
    return out;
}

struct SynthesizeResult {
    Conclusion conclusion;
    ModelCall call;
};

// Final synthesis over whatever state the run terminated with.
inline SynthesizeResult synthesize(backend::ModelClient& client,
                                   const prompts::TemplateRegistry& templates,
                                   const std::string& case_id, const Task& task,
                                   const ReasoningState& state, int round, double temperature) {
    backend::ModelRequest req;
    req.kind = PromptKind::Synthesize;
    req.rendered_prompt = templates.render_for(
        PromptKind::Synthesize,
        {{"task", detail::render_task(task)}, {"state", detail::render_state(state)}});
    req.temperature = temperature;
    req.case_id = case_id;
    req.round = round;

    auto resp = client.complete(req, detail::make_conclusion_validator(task), ErrorClass::QsrParse);

    SynthesizeResult out;
    out.conclusion = detail::conclusion_from_payload(resp.parsed, task);
    out.call = fusion::to_model_call(PromptKind::Synthesize, resp);
    return out;
}

namespace detail {

inline std::string render_narrative(const std::vector<NarrativeUnit>& units) {
    std::ostringstream os;
    for (const auto& u : units) os << u.id << ": " << u.text << "\n";
    return os.str();
}

inline SynthesizeResult direct_answer(backend::ModelClient& client,
                                      const prompts::TemplateRegistry& templates,
                                      const data::CaseSpec& c, bool chain_of_thought,
                                      double temperature) {
    backend::ModelRequest req;
    req.kind = PromptKind::DirectAnswer;
    const std::string preamble =
        chain_of_thought ? "Think step by step before you answer.\n\n" : "";
    req.rendered_prompt = templates.render_for(
        PromptKind::DirectAnswer, {{"preamble", preamble},
                                   {"narrative", render_narrative(c.narrative)},
                                   {"task", render_task(c.task)}});
    req.temperature = temperature;
    req.case_id = c.case_id;
    req.round = 0;
    req.discriminator = chain_of_thought ? "cot" : "direct";

    auto resp = client.complete(req, make_conclusion_validator(c.task), ErrorClass::QsrParse);
    SynthesizeResult out;
    out.conclusion = conclusion_from_payload(resp.parsed, c.task);
    out.call = fusion::to_model_call(PromptKind::DirectAnswer, resp);
    return out;
}

} // namespace detail

// Full orchestration for one case under one configuration.
//
// Trace layout: record 0 covers fusion and gating; each executed reasoning
// round appends one record (a closure check that finds nothing counts as an
// executed round with empty snapshots). The synthesis call is charged to the
// final record. Single-call variants (direct, cot) and non-loop runs report
// GatedBypass with zero rounds.
inline RunResult run(backend::ModelClient& client, const prompts::TemplateRegistry& templates,
                     const data::CaseSpec& c, const RunConfig& config,
                     const RunHooks& hooks = {}) {
    config.validate();
    if (c.narrative.empty())
        throw Error(ErrorClass::EmptyInput, "case '" + c.case_id + "' has no narrative");

    RunResult result;

    if (config.variant == Variant::Direct || config.variant == Variant::CoT) {
        auto syn = detail::direct_answer(client, templates, c,
                                         config.variant == Variant::CoT, config.temperature);
        TraceRecord rec;
        rec.round = 0;
        rec.model_calls.push_back(syn.call);
        hooks.record(rec);
        result.trace.push_back(std::move(rec));
        result.conclusion = std::move(syn.conclusion);
        result.termination_reason = TerminationReason::GatedBypass;
        result.rounds_executed = 0;
        return result;
    }

    TraceRecord record0;
    record0.round = 0;

    fusion::FusionOutput fused = fusion::fuse(client, templates, c.case_id, c.narrative, config);
    record0.model_calls = fused.calls;
    record0.baseline = fused.baseline;

    ReasoningState state = initial_state(fused.baseline);
    record0.state_size_after = state.size();

    const bool enters_loop =
        config.variant == Variant::NoIF ||
        ((config.variant == Variant::Full || config.variant == Variant::SelfAssessmentOnly) &&
         !should_gate(fused.conflicts, fused.doubts, config));

    if (!enters_loop) {
        auto syn = synthesize(client, templates, c.case_id, c.task, state, 0, config.temperature);
        record0.model_calls.push_back(syn.call);
        hooks.record(record0);
        result.trace.push_back(std::move(record0));
        result.conclusion = std::move(syn.conclusion);
        result.termination_reason = TerminationReason::GatedBypass;
        result.rounds_executed = 0;
        return result;
    }

    hooks.record(record0);
    result.trace.push_back(std::move(record0));

    TerminationReason reason = TerminationReason::MaxDepth;
    int rounds = 0;
    while (rounds < config.t_max) {
        const int round = rounds + 1;
        TraceRecord rec;
        rec.round = round;

        auto identified = identify_obstacles(client, templates, c.case_id, c.task, state, round,
                                             config.temperature, hooks);
        rec.model_calls.push_back(identified.call);
        rec.obstacles = identified.obstacles;

        if (identified.obstacles.empty()) {
            rounds = round;
            rec.state_size_after = state.size();
            reason = TerminationReason::LogicalClosure;
            auto syn = synthesize(client, templates, c.case_id, c.task, state, round,
                                  config.temperature);
            rec.model_calls.push_back(syn.call);
            hooks.record(rec);
            result.trace.push_back(std::move(rec));
            result.conclusion = std::move(syn.conclusion);
            result.termination_reason = reason;
            result.rounds_executed = rounds;
            return result;
        }

        std::vector<QueryItem> new_queries;
        std::vector<HypothesisItem> new_hypotheses;
        if (config.variant != Variant::SelfAssessmentOnly) {
            int query_index = 1;
            int hyp_index = 1;
            for (const auto& ob : identified.obstacles) {
                auto dec = decompose_obstacle(client, templates, c.case_id, ob, state,
                                              query_index, config.temperature);
                rec.model_calls.push_back(dec.call);
                for (const auto& q : dec.queries) {
                    for (int b = 0; b < config.beam_width; ++b) {
                        auto hyp = generate_hypothesis(client, templates, c.case_id, q, state,
                                                       hyp_index, config.temperature, hooks);
                        rec.model_calls.push_back(hyp.call);
                        new_hypotheses.push_back(std::move(hyp.hypothesis));
                    }
                }
                new_queries.insert(new_queries.end(), dec.queries.begin(), dec.queries.end());
            }
        }

        state = enrich(state, identified.obstacles, new_queries, new_hypotheses);
        rounds = round;
        rec.queries_added = std::move(new_queries);
        rec.hypotheses_added = std::move(new_hypotheses);
        rec.state_size_after = state.size();

        if (rounds == config.t_max) {
            auto syn = synthesize(client, templates, c.case_id, c.task, state, round,
                                  config.temperature);
            rec.model_calls.push_back(syn.call);
            hooks.record(rec);
            result.trace.push_back(std::move(rec));
            result.conclusion = std::move(syn.conclusion);
            result.termination_reason = TerminationReason::MaxDepth;
            result.rounds_executed = rounds;
            return result;
        }

        hooks.record(rec);
        result.trace.push_back(std::move(rec));
    }

    // Unreachable: the loop always returns at closure or at the depth bound.
    result.termination_reason = reason;
    result.rounds_executed = rounds;
    return result;
}

} // namespace saba::qsr
