#pragma once

#include <set>
#include <string>
#include <vector>

#include "saba/core/types.hpp"
#include "saba/errors.hpp"

namespace saba {

// Append-only reasoning state. Values are immutable snapshots: enrich() returns
// a new state and never touches its input, so snapshots are safe to share.
struct ReasoningState {
    BaselineState baseline;
    std::vector<QueryItem> queries;
    std::vector<HypothesisItem> hypotheses;
    int round = 0;
    std::set<std::string> obstacle_ids_seen;  // index for link validation only

    StateSize size() const {
        return StateSize{static_cast<int>(baseline.pairs.size()),
                         static_cast<int>(queries.size()),
                         static_cast<int>(hypotheses.size())};
    }

    // Every id addressable as evidence: events, attributes, queries, hypotheses.
    std::set<std::string> item_ids() const {
        std::set<std::string> out;
        for (const auto& p : baseline.pairs) {
            out.insert(p.unit.event.id);
            for (const auto& a : p.unit.attributes) out.insert(a.id);
        }
        for (const auto& q : queries) out.insert(q.id);
        for (const auto& h : hypotheses) out.insert(h.id);
        return out;
    }

    const HypothesisItem* find_hypothesis(const std::string& id) const {
        for (const auto& h : hypotheses)
            if (h.id == id) return &h;
        return nullptr;
    }
};

inline void validate_baseline(const BaselineState& baseline) {
    if (baseline.pairs.empty())
        throw Error(ErrorClass::StructuralValidation, "baseline has no aligned units");
    std::set<std::string> seen;
    for (size_t i = 0; i < baseline.pairs.size(); ++i) {
        const auto& pair = baseline.pairs[i];
        const auto& ev = pair.unit.event;
        if (ev.id.empty())
            throw Error(ErrorClass::StructuralValidation, "aligned unit with empty event id");
        if (!seen.insert(ev.id).second)
            throw Error(ErrorClass::StructuralValidation,
                        "duplicate comment for unit " + ev.id);
        if (ev.ordinal != static_cast<int>(i))
            throw Error(ErrorClass::StructuralValidation,
                        "baseline order does not match event ordinals at " + ev.id);
        if (pair.comment.unit_id != ev.id)
            throw Error(ErrorClass::StructuralValidation,
                        "comment unit_id " + pair.comment.unit_id + " does not match unit " + ev.id);
        if (pair.comment.verdict != Verdict::Consistent && pair.comment.note.empty())
            throw Error(ErrorClass::StructuralValidation,
                        "Conflict/Doubt comment on " + ev.id + " carries no note");
    }
}

inline ReasoningState initial_state(BaselineState baseline) {
    validate_baseline(baseline);
    ReasoningState state;
    state.baseline = std::move(baseline);
    state.round = 0;
    return state;
}

// State update for one round: registers this round's obstacles and appends the
// queries and hypotheses derived from them. All new items must carry
// round == state.round + 1; parent links must resolve within the union.
inline ReasoningState enrich(const ReasoningState& state,
                             const std::vector<Obstacle>& obstacles,
                             const std::vector<QueryItem>& new_queries,
                             const std::vector<HypothesisItem>& new_hypotheses) {
    const int next_round = state.round + 1;

    ReasoningState out = state;
    out.round = next_round;

    std::set<std::string> all_ids = state.item_ids();
    std::set<std::string> obstacle_ids = state.obstacle_ids_seen;

    for (const auto& ob : obstacles) {
        if (ob.round != next_round)
            throw Error(ErrorClass::StructuralValidation,
                        "obstacle " + ob.id + " carries round " + std::to_string(ob.round) +
                            ", expected " + std::to_string(next_round));
        if (ob.requirement.empty())
            throw Error(ErrorClass::StructuralValidation, "obstacle " + ob.id + " has empty requirement");
        if (!obstacle_ids.insert(ob.id).second || all_ids.count(ob.id))
            throw Error(ErrorClass::IdCollision, "duplicate id " + ob.id);
        out.obstacle_ids_seen.insert(ob.id);
    }

    std::set<std::string> query_ids;
    for (const auto& q : state.queries) query_ids.insert(q.id);

    for (const auto& q : new_queries) {
        if (q.round != next_round)
            throw Error(ErrorClass::StructuralValidation,
                        "query " + q.id + " carries round " + std::to_string(q.round) +
                            ", expected " + std::to_string(next_round));
        if (q.question.empty())
            throw Error(ErrorClass::StructuralValidation, "query " + q.id + " has empty question");
        if (!obstacle_ids.count(q.obstacle_id))
            throw Error(ErrorClass::LinkError,
                        "query " + q.id + " references unknown obstacle " + q.obstacle_id);
        if (!all_ids.insert(q.id).second)
            throw Error(ErrorClass::IdCollision, "duplicate id " + q.id);
        query_ids.insert(q.id);
        out.queries.push_back(q);
    }

    for (const auto& h : new_hypotheses) {
        if (h.round != next_round)
            throw Error(ErrorClass::StructuralValidation,
                        "hypothesis " + h.id + " carries round " + std::to_string(h.round) +
                            ", expected " + std::to_string(next_round));
        if (h.statement.empty())
            throw Error(ErrorClass::StructuralValidation, "hypothesis " + h.id + " has empty statement");
        if (!query_ids.count(h.query_id))
            throw Error(ErrorClass::LinkError,
                        "hypothesis " + h.id + " references unknown query " + h.query_id);
        if (h.supersedes) {
            const HypothesisItem* target = state.find_hypothesis(*h.supersedes);
            if (target == nullptr)
                throw Error(ErrorClass::LinkError,
                            "hypothesis " + h.id + " supersedes unknown hypothesis " + *h.supersedes);
            if (target->round >= next_round)
                throw Error(ErrorClass::LinkError,
                            "hypothesis " + h.id + " supersedes non-earlier hypothesis " + *h.supersedes);
        }
        if (!all_ids.insert(h.id).second)
            throw Error(ErrorClass::IdCollision, "duplicate id " + h.id);
        out.hypotheses.push_back(h);
    }

    return out;
}

} // namespace saba
