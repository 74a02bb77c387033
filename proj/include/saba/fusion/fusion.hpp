#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saba/backend/provider.hpp"
#include "saba/core/state.hpp"
#include "saba/core/types.hpp"
#include "saba/errors.hpp"
#include "saba/prompts/templates.hpp"

namespace saba::fusion {

using nlohmann::json;

struct FusionOutput {
    std::vector<BackboneEvent> backbone;
    std::vector<Attribute> attributes;
    AlignmentMap alignment;
    BaselineState baseline;
    int conflicts = 0;
    int doubts = 0;
    std::vector<ModelCall> calls;
};

namespace detail {

inline std::string render_units(const std::vector<NarrativeUnit>& units) {
    std::ostringstream os;
    for (const auto& u : units) os << u.id << ": " << u.text << "\n";
    return os.str();
}

inline std::string render_events(const std::vector<BackboneEvent>& events) {
    std::ostringstream os;
    for (const auto& e : events) os << e.id << ": " << e.description << "\n";
    return os.str();
}

inline std::string render_attributes(const std::vector<Attribute>& attrs) {
    std::ostringstream os;
    for (const auto& a : attrs)
        os << a.id << " [" << to_string(a.kind) << "]: " << a.description << "\n";
    return os.str();
}

inline std::optional<std::string> check_string_array(const json& j, const char* field,
                                                    bool allow_empty) {
    if (!j.contains(field) || !j.at(field).is_array())
        return std::string(field) + " must be an array";
    if (!allow_empty && j.at(field).empty())
        return std::string(field) + " must be non-empty";
    for (const auto& el : j.at(field))
        if (!el.is_string()) return std::string(field) + " entries must be strings";
    return std::nullopt;
}

inline std::optional<std::string> validate_extract_payload(const json& j) {
    if (!j.is_object()) return "payload must be an object";
    if (!j.contains("events") || !j.at("events").is_array() || j.at("events").empty())
        return "events must be a non-empty array";
    for (const auto& e : j.at("events")) {
        if (!e.is_object()) return "events entries must be objects";
        if (!e.contains("description") || !e.at("description").is_string() ||
            e.at("description").get<std::string>().empty())
            return "event description must be a non-empty string";
        if (auto err = check_string_array(e, "source_units", false)) return err;
    }
    if (!j.contains("attributes") || !j.at("attributes").is_array())
        return "attributes must be an array";
    for (const auto& a : j.at("attributes")) {
        if (!a.is_object()) return "attributes entries must be objects";
        if (!a.contains("description") || !a.at("description").is_string() ||
            a.at("description").get<std::string>().empty())
            return "attribute description must be a non-empty string";
        if (!a.contains("kind") || !a.at("kind").is_string())
            return "attribute kind must be a string";
        if (auto err = check_string_array(a, "source_units", false)) return err;
    }
    return std::nullopt;
}

inline std::optional<std::string> validate_align_payload(const json& j) {
    if (!j.is_object()) return "payload must be an object";
    if (!j.contains("alignment") || !j.at("alignment").is_array())
        return "alignment must be an array";
    for (const auto& entry : j.at("alignment")) {
        if (!entry.is_object()) return "alignment entries must be objects";
        if (!entry.contains("attribute") || !entry.at("attribute").is_string())
            return "alignment entry needs an attribute id";
        if (auto err = check_string_array(entry, "events", true)) return err;
    }
    return std::nullopt;
}

inline std::optional<std::string> validate_verdict_fields(const json& j) {
    if (!j.contains("verdict") || !j.at("verdict").is_string())
        return "verdict must be a string";
    const std::string v = j.at("verdict").get<std::string>();
    if (v != "Consistent" && v != "Conflict" && v != "Doubt")
        return "verdict must be Consistent, Conflict, or Doubt";
    if (j.contains("note") && !j.at("note").is_string()) return "note must be a string";
    std::string note = j.value("note", std::string());
    if ((v == "Conflict" || v == "Doubt") && note.empty())
        return "Conflict and Doubt verdicts require a note";
    if (j.contains("referenced_units")) {
        if (auto err = check_string_array(j, "referenced_units", true)) return err;
    }
    return std::nullopt;
}

inline std::optional<std::string> validate_verify_payload(const json& j) {
    if (!j.is_object()) return "payload must be an object";
    return validate_verdict_fields(j);
}

// The batched reply must carry exactly one verdict per aligned unit.
inline backend::Validator make_batch_verify_validator(std::vector<std::string> unit_ids) {
    return [ids = std::move(unit_ids)](const json& j) -> std::optional<std::string> {
        if (!j.is_object()) return "payload must be an object";
        if (!j.contains("comments") || !j.at("comments").is_array())
            return "comments must be an array";
        std::set<std::string> seen;
        for (const auto& c : j.at("comments")) {
            if (!c.is_object()) return "comments entries must be objects";
            if (!c.contains("unit") || !c.at("unit").is_string())
                return "comment unit must be a string";
            const std::string unit = c.at("unit").get<std::string>();
            if (std::find(ids.begin(), ids.end(), unit) == ids.end())
                return "comment names unknown unit '" + unit + "'";
            if (!seen.insert(unit).second) return "duplicate comment for unit '" + unit + "'";
            if (auto err = validate_verdict_fields(c)) return err;
        }
        for (const auto& id : ids)
            if (!seen.count(id)) return "no comment for unit '" + id + "'";
        return std::nullopt;
    };
}

} // namespace detail

struct DecomposeResult {
    std::vector<BackboneEvent> backbone;
    std::vector<Attribute> attributes;
    ModelCall call;
};

inline ModelCall to_model_call(PromptKind kind, const backend::ModelResponse& r) {
    ModelCall c;
    c.kind = kind;
    c.prompt_tokens = r.prompt_tokens;
    c.completion_tokens = r.completion_tokens;
    c.cache_hit = r.cache_hit;
    c.token_source = r.token_source;
    c.latency_ms = r.latency_ms;
    for (const auto& a : r.failed_attempts) {
        c.prompt_tokens += a.prompt_tokens;
        c.completion_tokens += a.completion_tokens;
    }
    return c;
}

// Splits the narrative into backbone events plus heterogeneous attributes.
// Unknown attribute kinds degrade to Other rather than failing the run.
inline DecomposeResult decompose(backend::ModelClient& client,
                                 const prompts::TemplateRegistry& templates,
                                 const std::string& case_id,
                                 const std::vector<NarrativeUnit>& units,
                                 double temperature) {
    if (units.empty())
        throw Error(ErrorClass::EmptyInput, "narrative has no units");
    std::set<std::string> known_units;
    for (const auto& u : units) known_units.insert(u.id);

    backend::ModelRequest req;
    req.kind = PromptKind::ExtractStructure;
    req.rendered_prompt = templates.render_for(
        PromptKind::ExtractStructure, {{"narrative", detail::render_units(units)}});
    req.temperature = temperature;
    req.case_id = case_id;
    req.round = 0;

    auto resp = client.complete(req, detail::validate_extract_payload, ErrorClass::FusionParse);

    DecomposeResult out;
    int k = 1;
    for (const auto& e : resp.parsed.at("events")) {
        BackboneEvent ev;
        ev.id = ids::event(k);
        ev.ordinal = k - 1;
        ev.description = e.at("description").get<std::string>();
        for (const auto& su : e.at("source_units")) {
            std::string sid = su.get<std::string>();
            if (!known_units.count(sid))
                throw Error(ErrorClass::FusionParse,
                            "event cites unknown narrative unit '" + sid + "'");
            ev.source_unit_ids.push_back(sid);
        }
        out.backbone.push_back(std::move(ev));
        ++k;
    }
    k = 1;
    for (const auto& a : resp.parsed.at("attributes")) {
        Attribute at;
        at.id = ids::attribute(k);
        at.description = a.at("description").get<std::string>();
        at.kind = parse_attribute_kind(a.at("kind").get<std::string>())
                      .value_or(AttributeKind::Other);
        for (const auto& su : a.at("source_units")) {
            std::string sid = su.get<std::string>();
            if (!known_units.count(sid))
                throw Error(ErrorClass::FusionParse,
                            "attribute cites unknown narrative unit '" + sid + "'");
            at.source_unit_ids.push_back(sid);
        }
        out.attributes.push_back(std::move(at));
        ++k;
    }
    out.call = to_model_call(PromptKind::ExtractStructure, resp);
    return out;
}

// Binds attributes to the events they qualify. Attributes the model leaves
// unassigned are repaired by source-unit overlap (ties break to the earliest
// event), so no attribute is dropped from the fused state.
inline std::pair<AlignmentMap, ModelCall> align(backend::ModelClient& client,
                                                const prompts::TemplateRegistry& templates,
                                                const std::string& case_id,
                                                const std::vector<BackboneEvent>& events,
                                                const std::vector<Attribute>& attributes,
                                                double temperature) {
    backend::ModelRequest req;
    req.kind = PromptKind::Align;
    req.rendered_prompt = templates.render_for(
        PromptKind::Align, {{"events", detail::render_events(events)},
                            {"attributes", detail::render_attributes(attributes)}});
    req.temperature = temperature;
    req.case_id = case_id;
    req.round = 0;

    auto resp = client.complete(req, detail::validate_align_payload, ErrorClass::FusionParse);

    std::set<std::string> known_events;
    for (const auto& e : events) known_events.insert(e.id);
    std::set<std::string> known_attrs;
    for (const auto& a : attributes) known_attrs.insert(a.id);

    AlignmentMap map;
    for (const auto& a : attributes) map.entries[a.id] = {};
    for (const auto& entry : resp.parsed.at("alignment")) {
        std::string attr_id = entry.at("attribute").get<std::string>();
        if (!known_attrs.count(attr_id))
            throw Error(ErrorClass::FusionParse, "alignment names unknown attribute '" + attr_id + "'");
        for (const auto& ev : entry.at("events")) {
            std::string ev_id = ev.get<std::string>();
            if (!known_events.count(ev_id))
                throw Error(ErrorClass::FusionParse, "alignment names unknown event '" + ev_id + "'");
            auto& targets = map.entries[attr_id];
            if (std::find(targets.begin(), targets.end(), ev_id) == targets.end())
                targets.push_back(ev_id);
        }
    }

    for (const auto& a : attributes) {
        auto& targets = map.entries[a.id];
        if (!targets.empty()) continue;
        std::set<std::string> attr_units(a.source_unit_ids.begin(), a.source_unit_ids.end());
        const BackboneEvent* best = nullptr;
        size_t best_overlap = 0;
        for (const auto& e : events) {
            size_t overlap = 0;
            for (const auto& su : e.source_unit_ids)
                if (attr_units.count(su)) ++overlap;
            if (overlap > best_overlap) {
                best_overlap = overlap;
                best = &e;
            }
        }
        if (!best) best = &events.front();
        targets.push_back(best->id);
    }

    return {std::move(map), to_model_call(PromptKind::Align, resp)};
}

struct VerifyResult {
    ConsistencyComment comment;
    ModelCall call;
};

inline std::string render_aligned_unit(const BackboneEvent& event,
                                       const std::vector<Attribute>& attached) {
    std::ostringstream os;
    os << event.id << ": " << event.description << "\n";
    for (const auto& a : attached)
        os << "  " << a.id << " [" << to_string(a.kind) << "]: " << a.description << "\n";
    return os.str();
}

// Consistency check for one aligned unit against the rest of the narrative.
inline VerifyResult verify_unit(backend::ModelClient& client,
                                const prompts::TemplateRegistry& templates,
                                const std::string& case_id,
                                const BackboneEvent& event,
                                const std::vector<Attribute>& attached,
                                const std::string& context_text,
                                double temperature) {
    backend::ModelRequest req;
    req.kind = PromptKind::Verify;
    req.rendered_prompt = templates.render_for(
        PromptKind::Verify, {{"unit", render_aligned_unit(event, attached)},
                             {"context", context_text}});
    req.temperature = temperature;
    req.case_id = case_id;
    req.round = 0;
    req.discriminator = event.id;

    auto resp = client.complete(req, detail::validate_verify_payload, ErrorClass::FusionParse);

    VerifyResult out;
    out.comment.unit_id = event.id;
    out.comment.verdict = *parse_verdict(resp.parsed.at("verdict").get<std::string>());
    out.comment.note = resp.parsed.value("note", std::string());
    if (resp.parsed.contains("referenced_units"))
        for (const auto& r : resp.parsed.at("referenced_units"))
            out.comment.referenced_unit_ids.push_back(r.get<std::string>());
    out.call = to_model_call(PromptKind::Verify, resp);
    return out;
}

// Pass-through used by the no-fusion ablation: each narrative unit becomes a
// baseline event marked Consistent, with no model involvement.
inline FusionOutput passthrough(const std::vector<NarrativeUnit>& units) {
    if (units.empty())
        throw Error(ErrorClass::EmptyInput, "narrative has no units");
    FusionOutput out;
    int k = 1;
    for (const auto& u : units) {
        BackboneEvent ev;
        ev.id = ids::event(k);
        ev.ordinal = k - 1;
        ev.description = u.text;
        ev.source_unit_ids.push_back(u.id);
        ConsistencyComment c;
        c.unit_id = ev.id;
        c.verdict = Verdict::Consistent;
        out.baseline.pairs.push_back({AlignedUnit{ev, {}}, c});
        out.backbone.push_back(std::move(ev));
        ++k;
    }
    return out;
}

// One Verify call covering every unit at once; an optimization path that
// trades per-unit retry isolation for call count.
inline std::pair<std::vector<ConsistencyComment>, ModelCall> verify_batched(
    backend::ModelClient& client, const prompts::TemplateRegistry& templates,
    const std::string& case_id, const std::string& context_text,
    const std::vector<std::string>& unit_ids, double temperature) {
    backend::ModelRequest req;
    req.kind = PromptKind::Verify;
    req.rendered_prompt =
        templates.render_named("verify_batch", {{"context", context_text}});
    req.temperature = temperature;
    req.case_id = case_id;
    req.round = 0;
    req.discriminator = "batch";

    auto resp = client.complete(req, detail::make_batch_verify_validator(unit_ids),
                                ErrorClass::FusionParse);

    std::map<std::string, ConsistencyComment> by_unit;
    for (const auto& c : resp.parsed.at("comments")) {
        ConsistencyComment comment;
        comment.unit_id = c.at("unit").get<std::string>();
        comment.verdict = *parse_verdict(c.at("verdict").get<std::string>());
        comment.note = c.value("note", std::string());
        if (c.contains("referenced_units"))
            for (const auto& r : c.at("referenced_units"))
                comment.referenced_unit_ids.push_back(r.get<std::string>());
        by_unit[comment.unit_id] = std::move(comment);
    }
    std::vector<ConsistencyComment> ordered;
    for (const auto& id : unit_ids) ordered.push_back(by_unit.at(id));
    return {std::move(ordered), to_model_call(PromptKind::Verify, resp)};
}

// Phase 1: decompose, align, and verify, producing the fused baseline state.
// The no-fusion ablation short-circuits to the pass-through baseline.
inline FusionOutput fuse(backend::ModelClient& client,
                         const prompts::TemplateRegistry& templates,
                         const std::string& case_id,
                         const std::vector<NarrativeUnit>& units,
                         const RunConfig& config) {
    if (config.variant == Variant::NoIF) return passthrough(units);

    FusionOutput out;
    auto dec = decompose(client, templates, case_id, units, config.temperature);
    out.backbone = std::move(dec.backbone);
    out.attributes = std::move(dec.attributes);
    out.calls.push_back(dec.call);

    auto [alignment, align_call] =
        align(client, templates, case_id, out.backbone, out.attributes, config.temperature);
    out.alignment = std::move(alignment);
    out.calls.push_back(align_call);

    std::map<std::string, std::vector<Attribute>> by_event;
    for (const auto& a : out.attributes)
        for (const auto& ev_id : out.alignment.entries.at(a.id))
            by_event[ev_id].push_back(a);

    auto attached = [&](const BackboneEvent& e) -> std::vector<Attribute> {
        auto it = by_event.find(e.id);
        return it == by_event.end() ? std::vector<Attribute>{} : it->second;
    };

    std::vector<ConsistencyComment> comments;
    if (config.batched_verify) {
        std::vector<std::string> unit_ids;
        std::ostringstream context;
        for (const auto& e : out.backbone) {
            unit_ids.push_back(e.id);
            context << render_aligned_unit(e, attached(e));
        }
        auto [batch, call] = verify_batched(client, templates, case_id, context.str(), unit_ids,
                                            config.temperature);
        comments = std::move(batch);
        out.calls.push_back(call);
    } else {
        for (const auto& e : out.backbone) {
            // Each unit is checked against every aligned unit but itself.
            std::ostringstream context;
            for (const auto& other : out.backbone)
                if (other.id != e.id) context << render_aligned_unit(other, attached(other));
            auto vr = verify_unit(client, templates, case_id, e, attached(e), context.str(),
                                  config.temperature);
            comments.push_back(std::move(vr.comment));
            out.calls.push_back(vr.call);
        }
    }

    for (size_t i = 0; i < out.backbone.size(); ++i) {
        const auto& e = out.backbone[i];
        if (comments[i].verdict == Verdict::Conflict) ++out.conflicts;
        if (comments[i].verdict == Verdict::Doubt) ++out.doubts;
        out.baseline.pairs.push_back({AlignedUnit{e, attached(e)}, std::move(comments[i])});
    }
    return out;
}

} // namespace saba::fusion
