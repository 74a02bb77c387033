#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "saba/errors.hpp"

namespace saba {

// ---------------------------------------------------------------------------
// Closed label sets
// ---------------------------------------------------------------------------

enum class AttributeKind { Action, ObjectState, Location, EvidentiaryDescriptor, Other };

enum class Verdict { Consistent, Conflict, Doubt };

enum class SupportStatus { Supported, Unsupported, Flagged };

enum class Variant { Full, NoIF, SelfAssessmentOnly, NoAwareness, Direct, CoT };

enum class PromptKind {
    ExtractStructure,
    Align,
    Verify,
    Aware,
    Decompose,
    Hypothesize,
    Synthesize,
    DirectAnswer,
    SplitPropositions,
};

inline const char* to_string(AttributeKind k) {
    switch (k) {
        case AttributeKind::Action:                return "Action";
        case AttributeKind::ObjectState:           return "ObjectState";
        case AttributeKind::Location:              return "Location";
        case AttributeKind::EvidentiaryDescriptor: return "EvidentiaryDescriptor";
        case AttributeKind::Other:                 return "Other";
    }
    return "Other";
}

inline std::optional<AttributeKind> parse_attribute_kind(const std::string& s) {
    if (s == "Action") return AttributeKind::Action;
    if (s == "ObjectState") return AttributeKind::ObjectState;
    if (s == "Location") return AttributeKind::Location;
    if (s == "EvidentiaryDescriptor") return AttributeKind::EvidentiaryDescriptor;
    if (s == "Other") return AttributeKind::Other;
    return std::nullopt;
}

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Consistent: return "Consistent";
        case Verdict::Conflict:   return "Conflict";
        case Verdict::Doubt:      return "Doubt";
    }
    return "Consistent";
}

inline std::optional<Verdict> parse_verdict(const std::string& s) {
    if (s == "Consistent") return Verdict::Consistent;
    if (s == "Conflict") return Verdict::Conflict;
    if (s == "Doubt") return Verdict::Doubt;
    return std::nullopt;
}

inline const char* to_string(SupportStatus s) {
    switch (s) {
        case SupportStatus::Supported:   return "Supported";
        case SupportStatus::Unsupported: return "Unsupported";
        case SupportStatus::Flagged:     return "Flagged";
    }
    return "Unsupported";
}

inline std::optional<SupportStatus> parse_support_status(const std::string& s) {
    if (s == "Supported") return SupportStatus::Supported;
    if (s == "Unsupported") return SupportStatus::Unsupported;
    if (s == "Flagged") return SupportStatus::Flagged;
    return std::nullopt;
}

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::Full:               return "full";
        case Variant::NoIF:               return "no-if";
        case Variant::SelfAssessmentOnly: return "self-assessment-only";
        case Variant::NoAwareness:        return "no-awareness";
        case Variant::Direct:             return "direct";
        case Variant::CoT:                return "cot";
    }
    return "full";
}

inline std::optional<Variant> parse_variant(const std::string& s) {
    if (s == "full") return Variant::Full;
    if (s == "no-if") return Variant::NoIF;
    if (s == "self-assessment-only") return Variant::SelfAssessmentOnly;
    if (s == "no-awareness") return Variant::NoAwareness;
    if (s == "direct") return Variant::Direct;
    if (s == "cot") return Variant::CoT;
    return std::nullopt;
}

inline const char* to_string(PromptKind k) {
    switch (k) {
        case PromptKind::ExtractStructure:  return "ExtractStructure";
        case PromptKind::Align:             return "Align";
        case PromptKind::Verify:            return "Verify";
        case PromptKind::Aware:             return "Aware";
        case PromptKind::Decompose:         return "Decompose";
        case PromptKind::Hypothesize:       return "Hypothesize";
        case PromptKind::Synthesize:        return "Synthesize";
        case PromptKind::DirectAnswer:      return "DirectAnswer";
        case PromptKind::SplitPropositions: return "SplitPropositions";
    }
    return "DirectAnswer";
}

inline std::optional<PromptKind> parse_prompt_kind(const std::string& s) {
    if (s == "ExtractStructure") return PromptKind::ExtractStructure;
    if (s == "Align") return PromptKind::Align;
    if (s == "Verify") return PromptKind::Verify;
    if (s == "Aware") return PromptKind::Aware;
    if (s == "Decompose") return PromptKind::Decompose;
    if (s == "Hypothesize") return PromptKind::Hypothesize;
    if (s == "Synthesize") return PromptKind::Synthesize;
    if (s == "DirectAnswer") return PromptKind::DirectAnswer;
    if (s == "SplitPropositions") return PromptKind::SplitPropositions;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Labels with an Other(label) escape
// ---------------------------------------------------------------------------

enum class DimensionKind { Suspect, Motive, ModusOperandi, Answer, Other };

struct TaskDimension {
    DimensionKind kind = DimensionKind::Other;
    std::string label;  // non-empty only when kind == Other

    static TaskDimension suspect() { return {DimensionKind::Suspect, ""}; }
    static TaskDimension motive() { return {DimensionKind::Motive, ""}; }
    static TaskDimension modus_operandi() { return {DimensionKind::ModusOperandi, ""}; }
    static TaskDimension answer() { return {DimensionKind::Answer, ""}; }
    static TaskDimension other(std::string lbl) { return {DimensionKind::Other, std::move(lbl)}; }

    // Known names map to their kind; anything else becomes Other(label).
    static TaskDimension parse(const std::string& s) {
        if (s == "Suspect") return suspect();
        if (s == "Motive") return motive();
        if (s == "ModusOperandi") return modus_operandi();
        if (s == "Answer") return answer();
        return other(s);
    }

    std::string name() const {
        switch (kind) {
            case DimensionKind::Suspect:       return "Suspect";
            case DimensionKind::Motive:        return "Motive";
            case DimensionKind::ModusOperandi: return "ModusOperandi";
            case DimensionKind::Answer:        return "Answer";
            case DimensionKind::Other:         return label;
        }
        return label;
    }

    bool operator==(const TaskDimension& o) const { return kind == o.kind && label == o.label; }
    bool operator!=(const TaskDimension& o) const { return !(*this == o); }
    bool operator<(const TaskDimension& o) const {
        if (kind != o.kind) return kind < o.kind;
        return label < o.label;
    }
};

enum class ObstacleKind { MissingLink, Ambiguity, MotiveGap, Other };

struct ObstacleType {
    ObstacleKind kind = ObstacleKind::Other;
    std::string label;  // non-empty only when kind == Other

    static ObstacleType parse(const std::string& s) {
        if (s == "MissingLink") return {ObstacleKind::MissingLink, ""};
        if (s == "Ambiguity") return {ObstacleKind::Ambiguity, ""};
        if (s == "MotiveGap") return {ObstacleKind::MotiveGap, ""};
        return {ObstacleKind::Other, s};
    }

    std::string name() const {
        switch (kind) {
            case ObstacleKind::MissingLink: return "MissingLink";
            case ObstacleKind::Ambiguity:   return "Ambiguity";
            case ObstacleKind::MotiveGap:   return "MotiveGap";
            case ObstacleKind::Other:       return label;
        }
        return label;
    }

    bool operator==(const ObstacleType& o) const { return kind == o.kind && label == o.label; }
};

// ---------------------------------------------------------------------------
// Narrative and fusion types
// ---------------------------------------------------------------------------

struct NarrativeUnit {
    std::string id;
    std::string text;
    int ordinal = 0;
};

struct BackboneEvent {
    std::string id;
    std::string description;
    int ordinal = 0;
    std::vector<std::string> source_unit_ids;  // provenance; may be empty
};

struct Attribute {
    std::string id;
    std::string description;
    AttributeKind kind = AttributeKind::Other;
    std::vector<std::string> source_unit_ids;  // non-empty
};

// attribute id -> non-empty set of event ids; multi-assignment permitted
struct AlignmentMap {
    std::map<std::string, std::vector<std::string>> entries;
};

struct AlignedUnit {
    BackboneEvent event;
    std::vector<Attribute> attributes;
};

struct ConsistencyComment {
    std::string unit_id;  // event id this comment annotates
    Verdict verdict = Verdict::Consistent;
    std::string note;  // non-empty for Conflict/Doubt
    std::vector<std::string> referenced_unit_ids;
};

struct BaselinePair {
    AlignedUnit unit;
    ConsistencyComment comment;
};

struct BaselineState {
    std::vector<BaselinePair> pairs;  // ordered by event ordinal, one comment per unit
};

// ---------------------------------------------------------------------------
// Reasoning-loop items
// ---------------------------------------------------------------------------

struct Obstacle {
    std::string id;
    ObstacleType type;
    TaskDimension dimension;
    std::string requirement;  // non-empty
    int round = 0;
};

struct QueryItem {
    std::string id;
    std::string obstacle_id;
    std::string question;  // non-empty
    int round = 0;
};

struct HypothesisItem {
    std::string id;
    std::string query_id;
    std::string statement;
    SupportStatus status = SupportStatus::Unsupported;
    std::optional<std::string> supersedes;  // earlier-round hypothesis this revises
    int round = 0;
};

struct Task {
    std::vector<TaskDimension> dimensions;  // non-empty, unique
    std::string instruction;
};

struct Conclusion {
    // One answer per task dimension, in task order.
    std::vector<std::pair<TaskDimension, std::string>> answers;
    std::string rationale;
    // Narrative unit ids the model names as supporting facts; feeds the
    // supporting-facts F1 on QA cases. Empty is legal.
    std::vector<std::string> support_ids;

    const std::string* answer_for(const TaskDimension& dim) const {
        for (const auto& [d, text] : answers)
            if (d == dim) return &text;
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// Trace accounting
// ---------------------------------------------------------------------------

struct StateSize {
    int baseline_units = 0;
    int queries = 0;
    int hypotheses = 0;

    int total() const { return baseline_units + queries + hypotheses; }
    bool operator==(const StateSize& o) const {
        return baseline_units == o.baseline_units && queries == o.queries && hypotheses == o.hypotheses;
    }
};

struct ModelCall {
    PromptKind kind = PromptKind::DirectAnswer;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    bool cache_hit = false;
    std::string token_source = "estimator";  // "provider" | "estimator"
    long latency_ms = 0;                     // excluded from golden comparisons
};

struct TraceRecord {
    int round = 0;
    std::vector<Obstacle> obstacles;  // snapshot identified this round
    std::vector<QueryItem> queries_added;
    std::vector<HypothesisItem> hypotheses_added;
    StateSize state_size_after;
    std::vector<ModelCall> model_calls;
    // Fused baseline snapshot, populated on the round-0 record only; lets the
    // evaluation and audit paths reconstruct the final state from disk.
    std::optional<BaselineState> baseline;
};

struct RunConfig {
    int t_max = 3;
    int gate_conflict_threshold = 0;
    int gate_doubt_threshold = 0;
    Variant variant = Variant::Full;
    double temperature = 0.0;
    int beam_width = 1;          // hypotheses generated per query
    bool batched_verify = false; // one Verify call for all units instead of one per unit

    void validate() const {
        if (t_max < 1) throw Error(ErrorClass::InputValidation, "t_max must be >= 1");
        if (gate_conflict_threshold < 0 || gate_doubt_threshold < 0)
            throw Error(ErrorClass::InputValidation, "gate thresholds must be non-negative");
        if (beam_width < 1) throw Error(ErrorClass::InputValidation, "beam_width must be >= 1");
    }
};

enum class TerminationReason { GatedBypass, LogicalClosure, MaxDepth };

inline const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::GatedBypass:    return "GatedBypass";
        case TerminationReason::LogicalClosure: return "LogicalClosure";
        case TerminationReason::MaxDepth:       return "MaxDepth";
    }
    return "GatedBypass";
}

inline std::optional<TerminationReason> parse_termination_reason(const std::string& s) {
    if (s == "GatedBypass") return TerminationReason::GatedBypass;
    if (s == "LogicalClosure") return TerminationReason::LogicalClosure;
    if (s == "MaxDepth") return TerminationReason::MaxDepth;
    return std::nullopt;
}

struct RunResult {
    Conclusion conclusion;
    std::vector<TraceRecord> trace;
    TerminationReason termination_reason = TerminationReason::GatedBypass;
    int rounds_executed = 0;
};

// Deterministic id scheme: ids are case-scoped and derived from 1-based ordinals.
namespace ids {
inline std::string event(int k) { return "evt-" + std::to_string(k); }
inline std::string attribute(int k) { return "att-" + std::to_string(k); }
inline std::string obstacle(int round, int k) {
    return "obs-" + std::to_string(round) + "-" + std::to_string(k);
}
inline std::string query(int round, int k) {
    return "qry-" + std::to_string(round) + "-" + std::to_string(k);
}
inline std::string hypothesis(int round, int k) {
    return "hyp-" + std::to_string(round) + "-" + std::to_string(k);
}
} // namespace ids

} // namespace saba
