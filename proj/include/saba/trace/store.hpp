#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saba/core/serde.hpp"
#include "saba/core/types.hpp"
#include "saba/data/dataset.hpp"
#include "saba/errors.hpp"
#include "saba/util.hpp"

namespace saba::trace {

using nlohmann::json;

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string config_hash(const std::string& case_id, const RunConfig& config) {
    json j = config;
    return util::content_hash(case_id + "\x1f" + j.dump());
}

struct RunEnvelope {
    std::string run_id;
    std::string case_id;
    data::Difficulty difficulty = data::Difficulty::NA;
    int run_index = 0;
    RunConfig config;
    std::string config_hash;
    std::string started_at;
    std::string finished_at;
    std::vector<TraceRecord> records;
    std::optional<RunResult> result;  // empty means the run aborted
    std::string abort_reason;

    bool aborted() const { return !result.has_value(); }
};

// One writer per run. The header and every record are flushed as they are
// appended, so a crash leaves a replayable prefix; the result file appears
// only on clean completion.
class TraceWriter {
public:
    TraceWriter(std::filesystem::path root, std::string run_id, const std::string& case_id,
                data::Difficulty difficulty, int run_index, const RunConfig& config)
        : dir_(root / "runs" / run_id), run_id_(std::move(run_id)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec)
            throw Error(ErrorClass::StorageError,
                        "cannot create run directory " + dir_.string() + ": " + ec.message());
        out_.open(dir_ / "trace.jsonl", std::ios::out | std::ios::trunc);
        if (!out_)
            throw Error(ErrorClass::StorageError,
                        "cannot open " + (dir_ / "trace.jsonl").string() + " for writing");
        json header{{"schema_version", 1},
                    {"type", "header"},
                    {"run_id", run_id_},
                    {"case_id", case_id},
                    {"difficulty", data::to_string(difficulty)},
                    {"run_index", run_index},
                    {"config", config},
                    {"config_hash", config_hash(case_id, config)},
                    {"started_at", utc_timestamp()}};
        write_line(header);
    }

    const std::filesystem::path& dir() const { return dir_; }

    void append(const TraceRecord& record) {
        const int expected = next_round_;
        if (record.round != expected)
            throw Error(ErrorClass::SequencingError,
                        "trace record round " + std::to_string(record.round) + ", expected " +
                            std::to_string(expected));
        json line{{"type", "record"}, {"record", record}};
        write_line(line);
        next_round_ = record.round + 1;
    }

    void finish(const RunResult& result) {
        json j{{"schema_version", 1},
               {"run_id", run_id_},
               {"result", result},
               {"finished_at", utc_timestamp()}};
        util::write_file_atomic(dir_ / "result.json", j.dump(2) + "\n");
    }

    void finish_abort(const std::string& reason) {
        json j{{"schema_version", 1},
               {"run_id", run_id_},
               {"aborted", true},
               {"reason", reason},
               {"finished_at", utc_timestamp()}};
        util::write_file_atomic(dir_ / "result.json", j.dump(2) + "\n");
    }

private:
    void write_line(const json& j) {
        out_ << j.dump() << "\n";
        out_.flush();
        if (!out_)
            throw Error(ErrorClass::StorageError, "write failed in " + dir_.string());
    }

    std::filesystem::path dir_;
    std::string run_id_;
    std::ofstream out_;
    int next_round_ = 0;
};

// Replays one run directory. A truncated final line (crash mid-append) is
// tolerated; a missing or aborted result file yields an abort-marked envelope.
inline RunEnvelope load_envelope(const std::filesystem::path& run_dir) {
    const auto trace_path = run_dir / "trace.jsonl";
    if (!std::filesystem::exists(trace_path))
        throw Error(ErrorClass::StorageError, "no trace file in " + run_dir.string());

    std::ifstream in(trace_path);
    if (!in) throw Error(ErrorClass::StorageError, "cannot read " + trace_path.string());

    RunEnvelope env;
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    if (lines.empty())
        throw Error(ErrorClass::StorageError, trace_path.string() + " is empty");

    for (size_t i = 0; i < lines.size(); ++i) {
        json j = json::parse(lines[i], nullptr, false);
        if (j.is_discarded()) {
            if (i + 1 == lines.size()) break;  // torn tail from a crash
            throw Error(ErrorClass::StorageError,
                        trace_path.string() + ": malformed line " + std::to_string(i + 1));
        }
        const std::string type = j.value("type", std::string{});
        if (i == 0) {
            if (type != "header" || j.value("schema_version", 0) != 1)
                throw Error(ErrorClass::StorageError,
                            trace_path.string() + ": first line is not a version-1 header");
            env.run_id = j.value("run_id", std::string{});
            env.case_id = j.value("case_id", std::string{});
            auto diff = data::parse_difficulty(j.value("difficulty", std::string{"NA"}));
            env.difficulty = diff.value_or(data::Difficulty::NA);
            env.run_index = j.value("run_index", 0);
            env.config = j.value("config", RunConfig{});
            env.config_hash = j.value("config_hash", std::string{});
            env.started_at = j.value("started_at", std::string{});
            continue;
        }
        if (type != "record")
            throw Error(ErrorClass::StorageError,
                        trace_path.string() + ": unexpected line type '" + type + "'");
        TraceRecord rec = j.at("record").get<TraceRecord>();
        const int expected = env.records.empty() ? 0 : env.records.back().round + 1;
        if (rec.round != expected)
            throw Error(ErrorClass::SequencingError,
                        trace_path.string() + ": record round " + std::to_string(rec.round) +
                            ", expected " + std::to_string(expected));
        env.records.push_back(std::move(rec));
    }

    const auto result_path = run_dir / "result.json";
    if (std::filesystem::exists(result_path)) {
        json j = json::parse(util::read_file(result_path), nullptr, false);
        if (!j.is_discarded() && !j.value("aborted", false) && j.contains("result")) {
            RunResult r = j.at("result").get<RunResult>();
            r.trace = env.records;
            env.result = std::move(r);
            env.finished_at = j.value("finished_at", std::string{});
        } else if (!j.is_discarded()) {
            env.abort_reason = j.value("reason", std::string{"aborted"});
            env.finished_at = j.value("finished_at", std::string{});
        } else {
            env.abort_reason = "unreadable result file";
        }
    } else {
        env.abort_reason = "no result file (crash or abort before completion)";
    }
    return env;
}

inline std::vector<RunEnvelope> load_all_envelopes(const std::filesystem::path& root) {
    const auto runs_dir = root / "runs";
    std::vector<RunEnvelope> out;
    if (!std::filesystem::exists(runs_dir)) return out;
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(runs_dir))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) out.push_back(load_envelope(d));
    return out;
}

struct DiffReport {
    std::vector<std::string> differences;
    bool empty() const { return differences.empty(); }
};

namespace detail {

// Strips fields that vary across behaviorally identical runs: wall-clock
// latency and cache residency. Token counts stay, since cache hits preserve
// the original counts.
inline json scrub_call(const ModelCall& c) {
    json j = c;
    j.erase("latency_ms");
    j.erase("cache_hit");
    return j;
}

inline void diff_json(const std::string& label, const json& a, const json& b,
                      std::vector<std::string>& out) {
    if (a != b) out.push_back(label + ": " + a.dump() + " != " + b.dump());
}

template <typename T>
void diff_items(const std::string& where, const char* noun, const std::vector<T>& a,
                const std::vector<T>& b, std::vector<std::string>& out) {
    if (a.size() != b.size()) {
        out.push_back(where + ": " + noun + " count " + std::to_string(a.size()) + " != " +
                      std::to_string(b.size()));
        return;
    }
    for (size_t i = 0; i < a.size(); ++i) {
        json ja = a[i];
        json jb = b[i];
        if (ja == jb) continue;
        std::string id = ja.value("id", std::to_string(i + 1));
        for (const auto& [key, value] : ja.items()) {
            if (!jb.contains(key))
                out.push_back(where + ": " + noun + " " + id + ": field " + key + " missing in golden");
            else if (jb.at(key) != value)
                out.push_back(where + ": " + noun + " " + id + ": field " + key + " differs");
        }
        for (const auto& [key, value] : jb.items())
            if (!ja.contains(key))
                out.push_back(where + ": " + noun + " " + id + ": field " + key + " only in golden");
    }
}

} // namespace detail

// Field-level behavioral diff between a run and its golden reference.
// Identical envelopes produce an empty report; mismatched case or
// configuration makes the pair incomparable rather than "fully different".
inline DiffReport compare_golden(const RunEnvelope& actual, const RunEnvelope& golden) {
    if (actual.case_id != golden.case_id)
        throw Error(ErrorClass::Incomparable,
                    "case mismatch: " + actual.case_id + " vs " + golden.case_id);
    if (actual.config_hash != golden.config_hash)
        throw Error(ErrorClass::Incomparable,
                    "config hash mismatch for case " + actual.case_id);

    DiffReport report;
    auto& out = report.differences;

    if (actual.aborted() != golden.aborted())
        out.push_back(std::string("abort state: ") + (actual.aborted() ? "aborted" : "completed") +
                      " != " + (golden.aborted() ? "aborted" : "completed"));
    if (!actual.aborted() && !golden.aborted()) {
        const auto& ra = *actual.result;
        const auto& rg = *golden.result;
        if (ra.termination_reason != rg.termination_reason)
            out.push_back(std::string("termination_reason: ") + to_string(ra.termination_reason) +
                          " != " + to_string(rg.termination_reason));
        if (ra.rounds_executed != rg.rounds_executed)
            out.push_back("rounds_executed: " + std::to_string(ra.rounds_executed) + " != " +
                          std::to_string(rg.rounds_executed));
        detail::diff_json("conclusion", json(ra.conclusion), json(rg.conclusion), out);
    }

    if (actual.records.size() != golden.records.size()) {
        out.push_back("record count: " + std::to_string(actual.records.size()) + " != " +
                      std::to_string(golden.records.size()));
        return report;
    }
    for (size_t i = 0; i < actual.records.size(); ++i) {
        const auto& a = actual.records[i];
        const auto& g = golden.records[i];
        const std::string where = "round " + std::to_string(a.round);
        if (a.round != g.round) {
            out.push_back("record " + std::to_string(i) + ": round " + std::to_string(a.round) +
                          " != " + std::to_string(g.round));
            continue;
        }
        detail::diff_items(where, "obstacle", a.obstacles, g.obstacles, out);
        detail::diff_items(where, "query", a.queries_added, g.queries_added, out);
        detail::diff_items(where, "hypothesis", a.hypotheses_added, g.hypotheses_added, out);
        detail::diff_json(where + ": state_size_after", json(a.state_size_after),
                          json(g.state_size_after), out);
        if (a.model_calls.size() != g.model_calls.size()) {
            out.push_back(where + ": model call count " + std::to_string(a.model_calls.size()) +
                          " != " + std::to_string(g.model_calls.size()));
            continue;
        }
        for (size_t k = 0; k < a.model_calls.size(); ++k)
            detail::diff_json(where + ": model call " + std::to_string(k + 1),
                              detail::scrub_call(a.model_calls[k]),
                              detail::scrub_call(g.model_calls[k]), out);
    }
    return report;
}

} // namespace saba::trace
