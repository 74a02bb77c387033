#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saba/core/serde.hpp"
#include "saba/core/types.hpp"
#include "saba/errors.hpp"
#include "saba/util.hpp"

namespace saba::data {

using nlohmann::json;

enum class Difficulty { Easy, Medium, Complex, NA };

inline const char* to_string(Difficulty d) {
    switch (d) {
        case Difficulty::Easy:    return "Easy";
        case Difficulty::Medium:  return "Medium";
        case Difficulty::Complex: return "Complex";
        case Difficulty::NA:      return "NA";
    }
    return "NA";
}

inline std::optional<Difficulty> parse_difficulty(const std::string& s) {
    if (s == "Easy") return Difficulty::Easy;
    if (s == "Medium") return Difficulty::Medium;
    if (s == "Complex") return Difficulty::Complex;
    if (s == "NA") return Difficulty::NA;
    return std::nullopt;
}

enum class CaseMode { DP, QA };

inline const char* to_string(CaseMode m) { return m == CaseMode::DP ? "DP" : "QA"; }

inline std::optional<CaseMode> parse_case_mode(const std::string& s) {
    if (s == "DP") return CaseMode::DP;
    if (s == "QA") return CaseMode::QA;
    return std::nullopt;
}

enum class CorpusMode { DP, QA, ChoiceAccuracy };

inline const char* to_string(CorpusMode m) {
    switch (m) {
        case CorpusMode::DP:             return "DP";
        case CorpusMode::QA:             return "QA";
        case CorpusMode::ChoiceAccuracy: return "ChoiceAccuracy";
    }
    return "DP";
}

inline std::optional<CorpusMode> parse_corpus_mode(const std::string& s) {
    if (s == "DP") return CorpusMode::DP;
    if (s == "QA") return CorpusMode::QA;
    if (s == "ChoiceAccuracy") return CorpusMode::ChoiceAccuracy;
    return std::nullopt;
}

struct GoldSuspect {
    std::string name;
    std::vector<std::string> aliases;
};

struct CaseSpec {
    std::string case_id;
    CaseMode mode = CaseMode::DP;
    Difficulty difficulty = Difficulty::NA;
    std::vector<NarrativeUnit> narrative;
    Task task;

    GoldSuspect gold_suspect;                    // DP
    std::vector<std::string> gold_motive_props;  // DP
    std::vector<std::string> gold_modus_props;   // DP
    std::vector<std::string> gold_critical_clues;// DP
    std::vector<std::string> gold_answers;       // QA
    std::vector<std::string> gold_support;       // QA, may be empty
};

struct CorpusManifest {
    std::string name;
    CorpusMode mode = CorpusMode::DP;
    std::vector<std::string> case_paths;  // relative to the manifest file
    std::map<Difficulty, int> counts;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& field,
                              const std::string& msg) {
    throw Error(ErrorClass::DatasetValidation, where + ": " + field + ": " + msg);
}

inline std::string need_string(const json& j, const std::string& where, const std::string& field) {
    if (!j.contains(field) || !j.at(field).is_string())
        fail(where, field, "expected a string");
    return j.at(field).get<std::string>();
}

inline std::vector<std::string> need_string_array(const json& j, const std::string& where,
                                                  const std::string& field) {
    if (!j.contains(field) || !j.at(field).is_array())
        fail(where, field, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& el : j.at(field)) {
        if (!el.is_string()) fail(where, field, "expected an array of strings");
        out.push_back(el.get<std::string>());
    }
    return out;
}

} // namespace detail

inline void validate_case(const CaseSpec& c, const std::string& where) {
    if (c.case_id.empty()) detail::fail(where, "case_id", "must be non-empty");
    if (c.narrative.empty()) detail::fail(where, "narrative", "must be non-empty");
    std::set<std::string> unit_ids;
    for (size_t i = 0; i < c.narrative.size(); ++i) {
        const auto& u = c.narrative[i];
        if (u.id.empty()) detail::fail(where, "narrative", "unit id must be non-empty");
        if (!unit_ids.insert(u.id).second)
            detail::fail(where, "narrative", "duplicate unit id '" + u.id + "'");
        if (u.ordinal != static_cast<int>(i))
            detail::fail(where, "narrative", "unit '" + u.id + "' out of order");
        if (util::is_blank(u.text))
            detail::fail(where, "narrative", "unit '" + u.id + "' has blank text");
    }
    if (c.task.dimensions.empty()) detail::fail(where, "task.dimensions", "must be non-empty");
    std::set<TaskDimension> dims;
    for (const auto& d : c.task.dimensions)
        if (!dims.insert(d).second)
            detail::fail(where, "task.dimensions", "duplicate dimension '" + d.name() + "'");

    if (c.mode == CaseMode::DP) {
        if (c.gold_suspect.name.empty())
            detail::fail(where, "gold.suspect", "required for DP cases");
        if (c.gold_motive_props.empty())
            detail::fail(where, "gold.motive_props", "required for DP cases");
        if (c.gold_modus_props.empty())
            detail::fail(where, "gold.modus_props", "required for DP cases");
        if (c.gold_critical_clues.empty())
            detail::fail(where, "gold.critical_clues", "required for DP cases");
        if (!c.gold_answers.empty() || !c.gold_support.empty())
            detail::fail(where, "gold.answers", "QA gold fields present in a DP case");
    } else {
        if (c.gold_answers.empty())
            detail::fail(where, "gold.answers", "required for QA cases");
        if (!c.gold_suspect.name.empty() || !c.gold_motive_props.empty() ||
            !c.gold_modus_props.empty() || !c.gold_critical_clues.empty())
            detail::fail(where, "gold.suspect", "DP gold fields present in a QA case");
    }
}

inline json case_to_json(const CaseSpec& c) {
    json narrative = json::array();
    for (const auto& u : c.narrative)
        narrative.push_back(json{{"id", u.id}, {"text", u.text}});
    json dims = json::array();
    for (const auto& d : c.task.dimensions) dims.push_back(d.name());
    json gold{{"suspect", {{"name", c.gold_suspect.name}, {"aliases", c.gold_suspect.aliases}}},
              {"motive_props", c.gold_motive_props},
              {"modus_props", c.gold_modus_props},
              {"critical_clues", c.gold_critical_clues},
              {"answers", c.gold_answers},
              {"support", c.gold_support}};
    return json{{"schema_version", 1},
                {"case_id", c.case_id},
                {"mode", to_string(c.mode)},
                {"difficulty", to_string(c.difficulty)},
                {"narrative", narrative},
                {"task", {{"instruction", c.task.instruction}, {"dimensions", dims}}},
                {"gold", gold}};
}

inline CaseSpec case_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) detail::fail(where, "(root)", "expected an object");
    if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer() ||
        j.at("schema_version").get<int>() != 1)
        detail::fail(where, "schema_version", "expected 1");

    CaseSpec c;
    c.case_id = detail::need_string(j, where, "case_id");
    auto mode = parse_case_mode(detail::need_string(j, where, "mode"));
    if (!mode) detail::fail(where, "mode", "expected DP or QA");
    c.mode = *mode;
    auto diff = parse_difficulty(detail::need_string(j, where, "difficulty"));
    if (!diff) detail::fail(where, "difficulty", "expected Easy, Medium, Complex, or NA");
    c.difficulty = *diff;

    if (!j.contains("narrative") || !j.at("narrative").is_array())
        detail::fail(where, "narrative", "expected an array");
    int ordinal = 0;
    for (const auto& u : j.at("narrative")) {
        if (!u.is_object()) detail::fail(where, "narrative", "units must be objects");
        NarrativeUnit unit;
        unit.id = detail::need_string(u, where, "id");
        unit.text = detail::need_string(u, where, "text");
        unit.ordinal = ordinal++;
        c.narrative.push_back(std::move(unit));
    }

    if (!j.contains("task") || !j.at("task").is_object())
        detail::fail(where, "task", "expected an object");
    const auto& t = j.at("task");
    c.task.instruction = detail::need_string(t, where, "instruction");
    for (const auto& name : detail::need_string_array(t, where, "dimensions"))
        c.task.dimensions.push_back(TaskDimension::parse(name));

    if (!j.contains("gold") || !j.at("gold").is_object())
        detail::fail(where, "gold", "expected an object");
    const auto& g = j.at("gold");
    if (g.contains("suspect")) {
        if (!g.at("suspect").is_object()) detail::fail(where, "gold.suspect", "expected an object");
        c.gold_suspect.name = detail::need_string(g.at("suspect"), where, "name");
        c.gold_suspect.aliases = detail::need_string_array(g.at("suspect"), where, "aliases");
    }
    if (g.contains("motive_props"))
        c.gold_motive_props = detail::need_string_array(g, where, "motive_props");
    if (g.contains("modus_props"))
        c.gold_modus_props = detail::need_string_array(g, where, "modus_props");
    if (g.contains("critical_clues"))
        c.gold_critical_clues = detail::need_string_array(g, where, "critical_clues");
    if (g.contains("answers")) c.gold_answers = detail::need_string_array(g, where, "answers");
    if (g.contains("support")) c.gold_support = detail::need_string_array(g, where, "support");

    validate_case(c, where);
    return c;
}

inline json manifest_to_json(const CorpusManifest& m) {
    json counts = json::object();
    for (const auto& [diff, n] : m.counts)
        if (n != 0) counts[to_string(diff)] = n;
    return json{{"schema_version", 1},
                {"name", m.name},
                {"mode", to_string(m.mode)},
                {"cases", m.case_paths},
                {"counts", counts}};
}

inline CorpusManifest manifest_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) detail::fail(where, "(root)", "expected an object");
    if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer() ||
        j.at("schema_version").get<int>() != 1)
        detail::fail(where, "schema_version", "expected 1");
    CorpusManifest m;
    m.name = detail::need_string(j, where, "name");
    auto mode = parse_corpus_mode(detail::need_string(j, where, "mode"));
    if (!mode) detail::fail(where, "mode", "expected DP, QA, or ChoiceAccuracy");
    m.mode = *mode;
    m.case_paths = detail::need_string_array(j, where, "cases");
    if (!j.contains("counts") || !j.at("counts").is_object())
        detail::fail(where, "counts", "expected an object");
    for (const auto& [key, value] : j.at("counts").items()) {
        auto diff = parse_difficulty(key);
        if (!diff) detail::fail(where, "counts", "unknown difficulty '" + key + "'");
        if (!value.is_number_integer() || value.get<int>() < 0)
            detail::fail(where, "counts", "count for '" + key + "' must be a non-negative integer");
        m.counts[*diff] = value.get<int>();
    }
    return m;
}

// Canonical file bytes: two-space indent, sorted keys, trailing newline.
inline std::string canonical_bytes(const json& j) { return j.dump(2) + "\n"; }

inline json parse_json_file(const std::filesystem::path& path) {
    std::string text = util::read_file(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw Error(ErrorClass::DatasetValidation, path.string() + ": not valid JSON");
    return j;
}

struct Corpus {
    CorpusManifest manifest;
    std::vector<CaseSpec> cases;
};

inline Corpus load_corpus(const std::filesystem::path& manifest_path) {
    Corpus out;
    out.manifest = manifest_from_json(parse_json_file(manifest_path), manifest_path.string());
    const auto base = manifest_path.parent_path();

    std::set<std::string> seen_ids;
    std::map<Difficulty, int> observed;
    for (const auto& rel : out.manifest.case_paths) {
        const auto path = base / rel;
        if (!std::filesystem::exists(path))
            throw Error(ErrorClass::DatasetValidation,
                        manifest_path.string() + ": cases: missing case file '" + rel + "'");
        CaseSpec c = case_from_json(parse_json_file(path), path.string());
        if (!seen_ids.insert(c.case_id).second)
            throw Error(ErrorClass::DatasetValidation,
                        path.string() + ": case_id: duplicate '" + c.case_id + "'");
        if (out.manifest.mode == CorpusMode::DP && c.mode != CaseMode::DP)
            throw Error(ErrorClass::DatasetValidation,
                        path.string() + ": mode: QA case in a DP corpus");
        if (out.manifest.mode != CorpusMode::DP && c.mode != CaseMode::QA)
            throw Error(ErrorClass::DatasetValidation,
                        path.string() + ": mode: DP case in a " +
                            std::string(to_string(out.manifest.mode)) + " corpus");
        observed[c.difficulty] += 1;
        out.cases.push_back(std::move(c));
    }

    for (auto diff : {Difficulty::Easy, Difficulty::Medium, Difficulty::Complex, Difficulty::NA}) {
        int declared = 0;
        if (auto it = out.manifest.counts.find(diff); it != out.manifest.counts.end())
            declared = it->second;
        int actual = 0;
        if (auto it = observed.find(diff); it != observed.end()) actual = it->second;
        if (declared != actual)
            throw Error(ErrorClass::DatasetValidation,
                        manifest_path.string() + ": counts: " + to_string(diff) + " declares " +
                            std::to_string(declared) + " but " + std::to_string(actual) +
                            " case(s) present");
    }
    return out;
}

inline void save_case(const CaseSpec& c, const std::filesystem::path& path) {
    validate_case(c, path.string());
    util::write_file_atomic(path, canonical_bytes(case_to_json(c)));
}

inline void save_manifest(const CorpusManifest& m, const std::filesystem::path& path) {
    util::write_file_atomic(path, canonical_bytes(manifest_to_json(m)));
}

// Maps a multi-hop QA record (hotpot-style context, or a flat facts list) onto
// the case schema: passages become narrative units, the task carries a single
// Answer dimension, and supporting-fact ids are preserved as "<title>#<index>".
inline CaseSpec adapt_qa(const json& record) {
    if (!record.is_object())
        throw Error(ErrorClass::AdapterError, "QA record must be an object");

    auto get_id = [&]() -> std::string {
        for (const char* key : {"_id", "id", "qid"})
            if (record.contains(key) && record.at(key).is_string())
                return record.at(key).get<std::string>();
        throw Error(ErrorClass::AdapterError, "QA record has no _id/id/qid");
    };

    if (!record.contains("question") || !record.at("question").is_string() ||
        util::is_blank(record.at("question").get<std::string>()))
        throw Error(ErrorClass::AdapterError, "QA record missing question");
    if (!record.contains("answer"))
        throw Error(ErrorClass::AdapterError, "QA record missing answer");

    CaseSpec c;
    c.case_id = get_id();
    c.mode = CaseMode::QA;
    c.difficulty = Difficulty::NA;
    c.task.instruction = record.at("question").get<std::string>();
    c.task.dimensions.push_back(TaskDimension::answer());

    const auto& answer = record.at("answer");
    if (answer.is_boolean())
        c.gold_answers.push_back(answer.get<bool>() ? "yes" : "no");
    else if (answer.is_string())
        c.gold_answers.push_back(answer.get<std::string>());
    else if (answer.is_array())
        for (const auto& a : answer) {
            if (a.is_boolean()) c.gold_answers.push_back(a.get<bool>() ? "yes" : "no");
            else if (a.is_string()) c.gold_answers.push_back(a.get<std::string>());
            else throw Error(ErrorClass::AdapterError, "QA answers must be strings or booleans");
        }
    else
        throw Error(ErrorClass::AdapterError, "QA answer must be a string, boolean, or array");
    if (c.gold_answers.empty())
        throw Error(ErrorClass::AdapterError, "QA record missing answer");

    int ordinal = 0;
    if (record.contains("context") && record.at("context").is_array()) {
        for (const auto& passage : record.at("context")) {
            if (!passage.is_array() || passage.size() != 2 || !passage.at(0).is_string() ||
                !passage.at(1).is_array())
                throw Error(ErrorClass::AdapterError,
                            "context passages must be [title, [sentences]] pairs");
            const std::string title = passage.at(0).get<std::string>();
            int idx = 0;
            for (const auto& sentence : passage.at(1)) {
                if (!sentence.is_string())
                    throw Error(ErrorClass::AdapterError, "context sentences must be strings");
                NarrativeUnit u;
                u.id = title + "#" + std::to_string(idx++);
                u.text = sentence.get<std::string>();
                u.ordinal = ordinal++;
                c.narrative.push_back(std::move(u));
            }
        }
    } else if (record.contains("facts") && record.at("facts").is_array()) {
        int idx = 0;
        for (const auto& fact : record.at("facts")) {
            if (!fact.is_string())
                throw Error(ErrorClass::AdapterError, "facts must be strings");
            NarrativeUnit u;
            u.id = "fact#" + std::to_string(idx++);
            u.text = fact.get<std::string>();
            u.ordinal = ordinal++;
            c.narrative.push_back(std::move(u));
        }
    }
    if (c.narrative.empty())
        throw Error(ErrorClass::AdapterError, "QA record has no context passages");

    if (record.contains("supporting_facts")) {
        if (!record.at("supporting_facts").is_array())
            throw Error(ErrorClass::AdapterError, "supporting_facts must be an array");
        for (const auto& sf : record.at("supporting_facts")) {
            if (!sf.is_array() || sf.size() != 2 || !sf.at(0).is_string() ||
                !sf.at(1).is_number_integer())
                throw Error(ErrorClass::AdapterError,
                            "supporting_facts entries must be [title, index] pairs");
            c.gold_support.push_back(sf.at(0).get<std::string>() + "#" +
                                     std::to_string(sf.at(1).get<int>()));
        }
    }

    validate_case(c, "adapt_qa(" + c.case_id + ")");
    return c;
}

} // namespace saba::data
