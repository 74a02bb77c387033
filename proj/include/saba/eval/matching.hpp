#pragma once

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "saba/backend/embedding.hpp"
#include "saba/errors.hpp"
#include "saba/eval/propositions.hpp"

namespace saba::eval {

struct MatchConfig {
    double threshold = 0.5;

    void validate() const {
        if (threshold < 0.0 || threshold > 1.0)
            throw Error(ErrorClass::InputValidation, "match threshold must lie in [0, 1]");
    }
};

struct MatchedPair {
    std::string prediction_id;
    std::string reference_id;
    double similarity = 0.0;
};

struct MatchReport {
    std::vector<MatchedPair> pairs;
    double recall = 0.0;
    std::vector<std::string> unmatched_references;
};

struct IndexPair {
    size_t prediction = 0;
    size_t reference = 0;
    double similarity = 0.0;
};

// Greedy one-to-one matching over a similarity matrix (rows: predictions,
// columns: references). Candidates are taken in descending similarity, ties
// broken by lower prediction index then lower reference index; a pair is
// accepted iff it clears the threshold and both sides are still free. Greedy
// is deliberate and can be beaten by an optimal assignment; see the tests for
// the canonical 2x2 witness.
inline std::vector<IndexPair> greedy_match_matrix(const std::vector<std::vector<double>>& sim,
                                                  double threshold) {
    std::vector<IndexPair> candidates;
    for (size_t i = 0; i < sim.size(); ++i)
        for (size_t j = 0; j < sim[i].size(); ++j)
            if (sim[i][j] >= threshold) candidates.push_back({i, j, sim[i][j]});

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const IndexPair& a, const IndexPair& b) {
                         if (a.similarity != b.similarity) return a.similarity > b.similarity;
                         if (a.prediction != b.prediction) return a.prediction < b.prediction;
                         return a.reference < b.reference;
                     });

    std::vector<bool> pred_used(sim.size(), false);
    std::vector<bool> ref_used(sim.empty() ? 0 : sim.front().size(), false);
    for (const auto& c : candidates)
        if (ref_used.size() < c.reference + 1) ref_used.resize(c.reference + 1, false);

    std::vector<IndexPair> out;
    for (const auto& c : candidates) {
        if (pred_used[c.prediction] || ref_used[c.reference]) continue;
        pred_used[c.prediction] = true;
        ref_used[c.reference] = true;
        out.push_back(c);
    }
    return out;
}

inline MatchReport greedy_match(const std::vector<AtomicProposition>& predictions,
                                const std::vector<AtomicProposition>& references,
                                backend::EmbeddingProvider& embedder,
                                const MatchConfig& config) {
    config.validate();

    MatchReport report;
    if (references.empty()) {
        // Nothing to recall: vacuous success.
        report.recall = 1.0;
        return report;
    }
    if (predictions.empty()) {
        report.recall = 0.0;
        for (const auto& r : references) report.unmatched_references.push_back(r.id);
        return report;
    }

    std::vector<std::string> texts;
    texts.reserve(predictions.size() + references.size());
    for (const auto& p : predictions) texts.push_back(p.text);
    for (const auto& r : references) texts.push_back(r.text);
    auto vectors = embedder.embed(texts);

    std::vector<std::vector<double>> sim(predictions.size(),
                                         std::vector<double>(references.size(), 0.0));
    for (size_t i = 0; i < predictions.size(); ++i)
        for (size_t j = 0; j < references.size(); ++j)
            sim[i][j] = backend::cosine(vectors[i], vectors[predictions.size() + j]);

    auto pairs = greedy_match_matrix(sim, config.threshold);
    std::vector<bool> ref_matched(references.size(), false);
    for (const auto& p : pairs) {
        report.pairs.push_back({predictions[p.prediction].id, references[p.reference].id,
                                p.similarity});
        ref_matched[p.reference] = true;
    }
    for (size_t j = 0; j < references.size(); ++j)
        if (!ref_matched[j]) report.unmatched_references.push_back(references[j].id);

    report.recall = static_cast<double>(pairs.size()) / static_cast<double>(references.size());
    return report;
}

} // namespace saba::eval
