#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "saba/backend/cost.hpp"
#include "saba/backend/embedding.hpp"
#include "saba/core/types.hpp"
#include "saba/data/dataset.hpp"
#include "saba/errors.hpp"
#include "saba/eval/matching.hpp"
#include "saba/eval/propositions.hpp"
#include "saba/util.hpp"

namespace saba::eval {

struct CaseScore {
    bool suspect_correct = false;
    double motive_recall = 0.0;
    double modus_recall = 0.0;
    double clue_coverage = 0.0;
    long cost_tokens = 0;
};

struct QaScore {
    bool exact_match = false;
    double support_f1 = 0.0;
};

using WarnFn = std::function<void(const std::string&)>;

namespace detail {

inline const std::set<std::string>& honorifics() {
    static const std::set<std::string> words{
        "mr", "mrs", "ms", "mx", "miss", "dr", "prof", "professor", "sir",
        "lady", "lord", "madam", "madame", "det", "detective", "officer"};
    return words;
}

inline std::vector<std::string> words_lower_no_punct(const std::string& s) {
    std::string cleaned;
    for (unsigned char ch : s)
        cleaned += std::isalnum(ch) ? static_cast<char>(std::tolower(ch)) : ' ';
    return util::split_whitespace(cleaned);
}

} // namespace detail

// Casefolds, strips punctuation, and drops leading articles and honorifics,
// so "The Butler" and "Mr. Chen" compare as "butler" and "chen".
inline std::string normalize_name(const std::string& s) {
    auto words = detail::words_lower_no_punct(s);
    size_t start = 0;
    while (start < words.size() &&
           (words[start] == "the" || words[start] == "a" || words[start] == "an" ||
            detail::honorifics().count(words[start])))
        ++start;
    if (start == words.size()) start = 0;  // title-only names stay intact
    return util::join(std::vector<std::string>(words.begin() + static_cast<long>(start),
                                               words.end()),
                      " ");
}

// The usual exact-match recipe: casefold, delete punctuation, drop article
// words, collapse whitespace.
inline std::string normalize_answer(const std::string& s) {
    std::string lowered;
    for (unsigned char ch : s)
        if (std::isalnum(ch) || std::isspace(ch)) lowered += static_cast<char>(std::tolower(ch));
    std::vector<std::string> kept;
    for (const auto& w : util::split_whitespace(lowered))
        if (w != "a" && w != "an" && w != "the") kept.push_back(w);
    return util::join(kept, " ");
}

inline bool score_suspect(const Conclusion& prediction, const data::CaseSpec& gold,
                          const WarnFn& warn = {}) {
    if (gold.gold_suspect.name.empty())
        throw Error(ErrorClass::DatasetValidation,
                    "case '" + gold.case_id + "' has no gold suspect");
    const std::string* answer = prediction.answer_for(TaskDimension::suspect());
    if (answer == nullptr || util::is_blank(*answer)) {
        if (warn) warn("case '" + gold.case_id + "': prediction has no Suspect answer");
        return false;
    }
    const std::string predicted = normalize_name(*answer);
    if (predicted == normalize_name(gold.gold_suspect.name)) return true;
    for (const auto& alias : gold.gold_suspect.aliases)
        if (predicted == normalize_name(alias)) return true;
    return false;
}

// Texts of the final reasoning state, reconstructed from a trace: the fused
// baseline snapshot on the round-0 record plus everything appended later.
// Obstacle requirements stay out; obstacle snapshots are not state items.
inline std::vector<std::string> final_state_texts(const std::vector<TraceRecord>& records) {
    std::vector<std::string> out;
    for (const auto& rec : records) {
        if (rec.baseline) {
            for (const auto& p : rec.baseline->pairs) {
                out.push_back(p.unit.event.description);
                for (const auto& a : p.unit.attributes) out.push_back(a.description);
                if (!util::is_blank(p.comment.note)) out.push_back(p.comment.note);
            }
        }
        for (const auto& q : rec.queries_added) out.push_back(q.question);
        for (const auto& h : rec.hypotheses_added) out.push_back(h.statement);
    }
    return out;
}

namespace detail {

inline std::vector<AtomicProposition> split_or_empty(const Splitter& split,
                                                     const std::string& text) {
    if (util::is_blank(text)) return {};
    return split(text, PropositionSource::Prediction);
}

inline double dimension_recall(const RunResult& result, const TaskDimension& dim,
                               const std::vector<std::string>& reference_props,
                               backend::EmbeddingProvider& embedder, const MatchConfig& config,
                               const Splitter& split, const WarnFn& warn,
                               const std::string& case_id) {
    const std::string* answer = result.conclusion.answer_for(dim);
    std::vector<AtomicProposition> preds;
    if (answer == nullptr || util::is_blank(*answer)) {
        if (warn) warn("case '" + case_id + "': prediction has no " + dim.name() + " answer");
    } else {
        preds = split_or_empty(split, *answer);
    }
    auto refs = as_propositions(reference_props, PropositionSource::Reference);
    return greedy_match(preds, refs, embedder, config).recall;
}

} // namespace detail

// Clue coverage: a critical clue counts as explored when any proposition from
// the final state or the conclusion reaches the similarity threshold. This is
// coverage, not one-to-one matching: several clues may hit the same text.
inline double clue_coverage(const std::vector<std::string>& clues,
                            const std::vector<std::string>& candidate_texts,
                            backend::EmbeddingProvider& embedder, const MatchConfig& config,
                            const Splitter& split) {
    config.validate();
    if (clues.empty())
        throw Error(ErrorClass::DatasetValidation, "clue coverage needs a non-empty clue list");

    std::vector<std::string> props;
    for (const auto& text : candidate_texts)
        for (const auto& p : detail::split_or_empty(split, text)) props.push_back(p.text);
    if (props.empty()) return 0.0;

    std::vector<std::string> all;
    all.reserve(clues.size() + props.size());
    for (const auto& c : clues) all.push_back(c);
    for (const auto& p : props) all.push_back(p);
    auto vectors = embedder.embed(all);

    int covered = 0;
    for (size_t i = 0; i < clues.size(); ++i) {
        double best = -1.0;
        for (size_t j = 0; j < props.size(); ++j)
            best = std::max(best, backend::cosine(vectors[i], vectors[clues.size() + j]));
        if (best >= config.threshold) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(clues.size());
}

inline CaseScore score_case(const RunResult& result, const data::CaseSpec& gold,
                            const MatchConfig& config, backend::EmbeddingProvider& embedder,
                            const Splitter& split = rule_splitter(), const WarnFn& warn = {}) {
    config.validate();
    if (gold.mode != data::CaseMode::DP)
        throw Error(ErrorClass::DatasetValidation,
                    "case '" + gold.case_id + "' is not a DP case");
    if (gold.gold_motive_props.empty() || gold.gold_modus_props.empty() ||
        gold.gold_critical_clues.empty())
        throw Error(ErrorClass::DatasetValidation,
                    "case '" + gold.case_id + "' is missing gold reference fields");

    CaseScore score;
    score.suspect_correct = score_suspect(result.conclusion, gold, warn);
    score.motive_recall =
        detail::dimension_recall(result, TaskDimension::motive(), gold.gold_motive_props,
                                 embedder, config, split, warn, gold.case_id);
    score.modus_recall =
        detail::dimension_recall(result, TaskDimension::modus_operandi(), gold.gold_modus_props,
                                 embedder, config, split, warn, gold.case_id);

    std::vector<std::string> candidates = final_state_texts(result.trace);
    for (const auto& [dim, text] : result.conclusion.answers)
        if (!util::is_blank(text)) candidates.push_back(text);
    if (!util::is_blank(result.conclusion.rationale))
        candidates.push_back(result.conclusion.rationale);
    score.clue_coverage =
        clue_coverage(gold.gold_critical_clues, candidates, embedder, config, split);

    score.cost_tokens = backend::cost_summary(result.trace).total_tokens();
    return score;
}

inline QaScore score_qa(const std::string& prediction,
                        const std::vector<std::string>& gold_answers,
                        const std::vector<std::string>& gold_support,
                        const std::vector<std::string>& predicted_support) {
    if (gold_answers.empty())
        throw Error(ErrorClass::DatasetValidation, "QA scoring needs at least one gold answer");

    QaScore out;
    const std::string norm_pred = normalize_answer(prediction);
    for (const auto& g : gold_answers)
        if (norm_pred == normalize_answer(g)) { out.exact_match = true; break; }

    const std::set<std::string> gold_set(gold_support.begin(), gold_support.end());
    const std::set<std::string> pred_set(predicted_support.begin(), predicted_support.end());
    if (gold_set.empty() && pred_set.empty()) {
        out.support_f1 = 1.0;
        return out;
    }
    size_t hits = 0;
    for (const auto& id : pred_set)
        if (gold_set.count(id)) ++hits;
    const double precision =
        pred_set.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred_set.size());
    const double recall =
        gold_set.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(gold_set.size());
    out.support_f1 =
        (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    return out;
}

// Paired cost ratios against a designated baseline method: for each run index,
// method tokens / baseline tokens, then the mean over runs. The baseline maps
// to exactly 1.0 by construction.
inline std::map<std::string, double> normalized_cost(
    const std::map<std::string, std::vector<double>>& method_costs, const std::string& baseline) {
    auto it = method_costs.find(baseline);
    if (it == method_costs.end())
        throw Error(ErrorClass::InputValidation, "baseline method '" + baseline + "' has no costs");
    const auto& base = it->second;
    if (base.empty())
        throw Error(ErrorClass::InputValidation, "baseline method '" + baseline + "' has no runs");
    for (double b : base)
        if (b == 0.0)
            throw Error(ErrorClass::DivisionError,
                        "baseline method '" + baseline + "' has a zero-cost run");

    std::map<std::string, double> out;
    for (const auto& [method, costs] : method_costs) {
        if (method == baseline) {
            out[method] = 1.0;
            continue;
        }
        if (costs.size() != base.size())
            throw Error(ErrorClass::InputValidation,
                        "method '" + method + "' has " + std::to_string(costs.size()) +
                            " runs, baseline has " + std::to_string(base.size()));
        double sum = 0.0;
        for (size_t i = 0; i < costs.size(); ++i) sum += costs[i] / base[i];
        out[method] = sum / static_cast<double>(base.size());
    }
    return out;
}

} // namespace saba::eval
