#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "saba/backend/cache.hpp"
#include "saba/backend/cost.hpp"
#include "saba/backend/embedding.hpp"
#include "saba/backend/http.hpp"
#include "saba/backend/mock.hpp"
#include "saba/backend/provider.hpp"
#include "saba/core/serde.hpp"
#include "saba/data/dataset.hpp"
#include "saba/errors.hpp"
#include "saba/eval/reliability.hpp"
#include "saba/eval/scoring.hpp"
#include "saba/prompts/templates.hpp"
#include "saba/qsr/engine.hpp"
#include "saba/trace/store.hpp"

namespace saba::cli {

using nlohmann::json;

inline constexpr int kExitUsage = 2;
inline constexpr int kExitBatchPartial = 30;

// ---------------------------------------------------------------------------
// Settings and precedence: flags > config file > environment > defaults
// ---------------------------------------------------------------------------

struct Settings {
    std::string backend = "mock";
    std::string fixtures;
    std::string variant = "full";
    int t_max = 3;
    int gate_x = 0;
    int gate_y = 0;
    double temperature = 0.0;
    double threshold = 0.5;
    int parallel = 1;
    int runs = 1;
    bool no_cache = false;
    std::string cache_dir;
    std::string templates_dir;
    std::string out = "out";
    int beam_width = 1;
    bool batched_verify = false;
    std::string http_url;
    std::string http_model = "default";

    RunConfig run_config() const {
        RunConfig config;
        auto v = parse_variant(variant);
        if (!v) throw Error(ErrorClass::InputValidation, "unknown variant '" + variant + "'");
        config.variant = *v;
        config.t_max = t_max;
        config.gate_conflict_threshold = gate_x;
        config.gate_doubt_threshold = gate_y;
        config.temperature = temperature;
        config.beam_width = beam_width;
        config.batched_verify = batched_verify;
        config.validate();
        return config;
    }
};

namespace detail {

inline int parse_int(const std::string& raw, const std::string& what) {
    try {
        size_t pos = 0;
        int value = std::stoi(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return value;
    } catch (const std::exception&) {
        throw Error(ErrorClass::InputValidation, what + ": '" + raw + "' is not an integer");
    }
}

inline double parse_double(const std::string& raw, const std::string& what) {
    try {
        size_t pos = 0;
        double value = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return value;
    } catch (const std::exception&) {
        throw Error(ErrorClass::InputValidation, what + ": '" + raw + "' is not a number");
    }
}

inline bool parse_bool(const std::string& raw, const std::string& what) {
    if (raw == "1" || raw == "true" || raw == "yes" || raw == "on") return true;
    if (raw == "0" || raw == "false" || raw == "no" || raw == "off") return false;
    throw Error(ErrorClass::InputValidation, what + ": '" + raw + "' is not a boolean");
}

inline void apply_env(Settings& s) {
    auto text = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (v == nullptr || *v == '\0') return std::nullopt;
        return std::string(v);
    };
    if (auto v = text("SABA_BACKEND")) s.backend = *v;
    if (auto v = text("SABA_FIXTURES")) s.fixtures = *v;
    if (auto v = text("SABA_VARIANT")) s.variant = *v;
    if (auto v = text("SABA_T_MAX")) s.t_max = parse_int(*v, "SABA_T_MAX");
    if (auto v = text("SABA_GATE_X")) s.gate_x = parse_int(*v, "SABA_GATE_X");
    if (auto v = text("SABA_GATE_Y")) s.gate_y = parse_int(*v, "SABA_GATE_Y");
    if (auto v = text("SABA_TEMPERATURE")) s.temperature = parse_double(*v, "SABA_TEMPERATURE");
    if (auto v = text("SABA_THRESHOLD")) s.threshold = parse_double(*v, "SABA_THRESHOLD");
    if (auto v = text("SABA_PARALLEL")) s.parallel = parse_int(*v, "SABA_PARALLEL");
    if (auto v = text("SABA_RUNS")) s.runs = parse_int(*v, "SABA_RUNS");
    if (auto v = text("SABA_NO_CACHE")) s.no_cache = parse_bool(*v, "SABA_NO_CACHE");
    if (auto v = text("SABA_CACHE_DIR")) s.cache_dir = *v;
    if (auto v = text("SABA_TEMPLATES")) s.templates_dir = *v;
    if (auto v = text("SABA_OUT")) s.out = *v;
    if (auto v = text("SABA_BEAM_WIDTH")) s.beam_width = parse_int(*v, "SABA_BEAM_WIDTH");
    if (auto v = text("SABA_BATCHED_VERIFY"))
        s.batched_verify = parse_bool(*v, "SABA_BATCHED_VERIFY");
    if (auto v = text("SABA_HTTP_URL")) s.http_url = *v;
    if (auto v = text("SABA_HTTP_MODEL")) s.http_model = *v;
}

inline void apply_config_file(Settings& s, const std::filesystem::path& path) {
    json j = json::parse(util::read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error(ErrorClass::InputValidation, path.string() + ": config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        auto str = [&](const char* what) -> std::string {
            if (!value.is_string())
                throw Error(ErrorClass::InputValidation,
                            path.string() + ": " + what + " must be a string");
            return value.get<std::string>();
        };
        auto num = [&](const char* what) -> int {
            if (!value.is_number_integer())
                throw Error(ErrorClass::InputValidation,
                            path.string() + ": " + what + " must be an integer");
            return value.get<int>();
        };
        auto dbl = [&](const char* what) -> double {
            if (!value.is_number())
                throw Error(ErrorClass::InputValidation,
                            path.string() + ": " + what + " must be a number");
            return value.get<double>();
        };
        auto flag = [&](const char* what) -> bool {
            if (!value.is_boolean())
                throw Error(ErrorClass::InputValidation,
                            path.string() + ": " + what + " must be a boolean");
            return value.get<bool>();
        };
        if (key == "backend") s.backend = str("backend");
        else if (key == "fixtures") s.fixtures = str("fixtures");
        else if (key == "variant") s.variant = str("variant");
        else if (key == "t_max") s.t_max = num("t_max");
        else if (key == "gate_x") s.gate_x = num("gate_x");
        else if (key == "gate_y") s.gate_y = num("gate_y");
        else if (key == "temperature") s.temperature = dbl("temperature");
        else if (key == "threshold") s.threshold = dbl("threshold");
        else if (key == "parallel") s.parallel = num("parallel");
        else if (key == "runs") s.runs = num("runs");
        else if (key == "no_cache") s.no_cache = flag("no_cache");
        else if (key == "cache_dir") s.cache_dir = str("cache_dir");
        else if (key == "templates") s.templates_dir = str("templates");
        else if (key == "out") s.out = str("out");
        else if (key == "beam_width") s.beam_width = num("beam_width");
        else if (key == "batched_verify") s.batched_verify = flag("batched_verify");
        else if (key == "http_url") s.http_url = str("http_url");
        else if (key == "http_model") s.http_model = str("http_model");
        else
            throw Error(ErrorClass::InputValidation,
                        path.string() + ": unknown config key '" + key + "'");
    }
}

// Raw flag values plus presence marks, bound to CLI11 options; presence decides
// whether a flag overrides lower-precedence sources.
struct FlagBag {
    std::string config_path;
    Settings flags;
    CLI::App* sub = nullptr;

    void attach(CLI::App* cmd) {
        sub = cmd;
        cmd->add_option("--config", config_path, "JSON config file (flags still win)");
        cmd->add_option("--backend", flags.backend, "Model backend: mock or http");
        cmd->add_option("--fixtures", flags.fixtures, "Scripted fixture file for the mock backend");
        cmd->add_option("--variant", flags.variant,
                        "full, no-if, self-assessment-only, no-awareness, direct, cot");
        cmd->add_option("--t-max", flags.t_max, "Maximum reasoning rounds");
        cmd->add_option("--gate-x", flags.gate_x, "Conflict threshold for the adaptive gate");
        cmd->add_option("--gate-y", flags.gate_y, "Doubt threshold for the adaptive gate");
        cmd->add_option("--temperature", flags.temperature, "Sampling temperature");
        cmd->add_option("--threshold", flags.threshold, "Semantic match threshold");
        cmd->add_option("--parallel", flags.parallel, "Concurrent case runs");
        cmd->add_option("--runs", flags.runs, "Independent runs per case");
        cmd->add_flag("--no-cache", flags.no_cache, "Disable the response cache");
        cmd->add_option("--cache-dir", flags.cache_dir, "Persist the response cache here");
        cmd->add_option("--templates", flags.templates_dir, "Prompt template override directory");
        cmd->add_option("--out", flags.out, "Output directory for traces and reports");
        cmd->add_option("--beam-width", flags.beam_width, "Hypotheses generated per query");
        cmd->add_flag("--batched-verify", flags.batched_verify,
                      "One verification call for all units");
        cmd->add_option("--http-url", flags.http_url, "Base URL for the http backend");
        cmd->add_option("--http-model", flags.http_model, "Model name for the http backend");
    }

    Settings resolve() const {
        Settings s;
        apply_env(s);
        if (sub->count("--config") > 0) apply_config_file(s, config_path);
        auto take = [&](const char* name, auto member) {
            if (sub->count(name) > 0) s.*member = flags.*member;
        };
        take("--backend", &Settings::backend);
        take("--fixtures", &Settings::fixtures);
        take("--variant", &Settings::variant);
        take("--t-max", &Settings::t_max);
        take("--gate-x", &Settings::gate_x);
        take("--gate-y", &Settings::gate_y);
        take("--temperature", &Settings::temperature);
        take("--threshold", &Settings::threshold);
        take("--parallel", &Settings::parallel);
        take("--runs", &Settings::runs);
        take("--no-cache", &Settings::no_cache);
        take("--cache-dir", &Settings::cache_dir);
        take("--templates", &Settings::templates_dir);
        take("--out", &Settings::out);
        take("--beam-width", &Settings::beam_width);
        take("--batched-verify", &Settings::batched_verify);
        take("--http-url", &Settings::http_url);
        take("--http-model", &Settings::http_model);
        return s;
    }
};

inline std::shared_ptr<backend::Provider> build_provider(const Settings& s) {
    if (s.backend == "mock") {
        if (s.fixtures.empty())
            throw Error(ErrorClass::InputValidation,
                        "the mock backend needs --fixtures <script.json>");
        return std::make_shared<backend::MockProvider>(
            backend::MockProvider::from_file(s.fixtures));
    }
    if (s.backend == "http") {
        if (s.http_url.empty())
            throw Error(ErrorClass::InputValidation, "the http backend needs --http-url");
        backend::HttpOptions options;
        options.base_url = s.http_url;
        options.model = s.http_model;
        return std::make_shared<backend::HttpProvider>(options);
    }
    throw Error(ErrorClass::InputValidation, "unknown backend '" + s.backend + "'");
}

inline backend::ModelClient build_client(const Settings& s) {
    backend::ClientOptions options;
    options.cache_enabled = !s.no_cache;
    auto cache = std::make_shared<backend::ResponseCache>(
        s.cache_dir.empty() ? std::filesystem::path{} : std::filesystem::path(s.cache_dir));
    return backend::ModelClient(build_provider(s), options, std::move(cache));
}

inline std::string sanitize_id(const std::string& raw) {
    std::string out;
    for (char ch : raw)
        out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' ||
                ch == '.')
                   ? ch
                   : '-';
    return out;
}

inline std::string make_run_id(const std::string& case_id, const std::string& variant,
                               int run_index) {
    return sanitize_id(case_id) + "--" + variant + "--r" + std::to_string(run_index);
}

// ---------------------------------------------------------------------------
// Shared run execution and scoring
// ---------------------------------------------------------------------------

struct RunOutcome {
    std::string run_id;
    std::string case_id;
    data::Difficulty difficulty = data::Difficulty::NA;
    data::CaseMode mode = data::CaseMode::DP;
    int run_index = 0;
    std::optional<RunResult> result;
    std::string error;
    std::optional<ErrorClass> error_class;
    std::vector<std::string> warnings;
};

inline RunOutcome execute_case(backend::ModelClient& client,
                               const prompts::TemplateRegistry& templates,
                               const data::CaseSpec& c, const RunConfig& config,
                               const std::filesystem::path& out_root, int run_index) {
    RunOutcome outcome;
    outcome.case_id = c.case_id;
    outcome.difficulty = c.difficulty;
    outcome.mode = c.mode;
    outcome.run_index = run_index;
    outcome.run_id = make_run_id(c.case_id, to_string(config.variant), run_index);

    trace::TraceWriter writer(out_root, outcome.run_id, c.case_id, c.difficulty, run_index,
                              config);
    qsr::RunHooks hooks;
    hooks.on_record = [&writer](const TraceRecord& r) { writer.append(r); };
    hooks.on_warning = [&outcome](const std::string& msg) { outcome.warnings.push_back(msg); };
    try {
        outcome.result = qsr::run(client, templates, c, config, hooks);
        writer.finish(*outcome.result);
    } catch (const Error& e) {
        writer.finish_abort(std::string(to_string(e.error_class())) + ": " + e.message());
        outcome.error = e.message();
        outcome.error_class = e.error_class();
    } catch (const std::exception& e) {
        writer.finish_abort(std::string("unexpected: ") + e.what());
        outcome.error = e.what();
    }
    return outcome;
}

struct MetricRow {
    std::string case_id;
    data::Difficulty difficulty = data::Difficulty::NA;
    std::string variant;
    int run_index = 0;
    data::CaseMode mode = data::CaseMode::DP;
    std::map<std::string, double> metrics;  // percent scale
    long cost_tokens = 0;
    bool aborted = false;
    std::string error;
};

inline MetricRow score_run(const RunResult& result, const data::CaseSpec& gold,
                           const eval::MatchConfig& mc, backend::EmbeddingProvider& embedder,
                           const eval::WarnFn& warn = {}) {
    MetricRow row;
    row.case_id = gold.case_id;
    row.difficulty = gold.difficulty;
    row.mode = gold.mode;
    if (gold.mode == data::CaseMode::DP) {
        auto cs = eval::score_case(result, gold, mc, embedder, eval::rule_splitter(), warn);
        row.metrics["SA"] = cs.suspect_correct ? 100.0 : 0.0;
        row.metrics["R-M"] = 100.0 * cs.motive_recall;
        row.metrics["R-O"] = 100.0 * cs.modus_recall;
        row.metrics["CCR"] = 100.0 * cs.clue_coverage;
        row.cost_tokens = cs.cost_tokens;
    } else {
        const std::string* answer = result.conclusion.answer_for(TaskDimension::answer());
        auto qs = eval::score_qa(answer ? *answer : std::string{}, gold.gold_answers,
                                 gold.gold_support, result.conclusion.support_ids);
        row.metrics["EM"] = qs.exact_match ? 100.0 : 0.0;
        row.metrics["SF"] = 100.0 * qs.support_f1;
        row.cost_tokens = backend::cost_summary(result.trace).total_tokens();
    }
    return row;
}

struct Agg {
    double mean = 0.0;
    double sd = 0.0;
    size_t n = 0;
};

inline Agg aggregate(const std::vector<double>& xs) {
    Agg a;
    a.n = xs.size();
    if (xs.empty()) return a;
    double sum = 0.0;
    for (double x : xs) sum += x;
    a.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return a;
}

inline double round1(double x) { return std::round(x * 10.0) / 10.0; }

inline std::string fmt1(double x) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.1f", x);
    return buf;
}

// Per-metric mean over cases within each run, then mean and sample standard
// deviation over runs. Aborted rows are excluded; callers report them apart.
inline std::map<std::string, Agg> summarize(const std::vector<MetricRow>& rows) {
    std::map<std::string, std::map<int, std::vector<double>>> per_metric_run;
    for (const auto& row : rows) {
        if (row.aborted) continue;
        for (const auto& [name, value] : row.metrics)
            per_metric_run[name][row.run_index].push_back(value);
    }
    std::map<std::string, Agg> out;
    for (const auto& [name, by_run] : per_metric_run) {
        std::vector<double> run_means;
        for (const auto& [run, values] : by_run) run_means.push_back(aggregate(values).mean);
        out[name] = aggregate(run_means);
    }
    return out;
}

inline void print_metric_table(std::ostream& os, const std::string& title,
                               const std::map<std::string, Agg>& aggs) {
    os << title << "\n";
    for (const auto& [name, agg] : aggs)
        os << "  " << std::left << std::setw(6) << name << " " << fmt1(round1(agg.mean))
           << " +/- " << fmt1(round1(agg.sd)) << "\n";
}

inline json summary_json(const std::map<std::string, std::map<std::string, Agg>>& by_variant,
                         const std::map<std::string, double>& cost_table) {
    json variants = json::object();
    for (const auto& [variant, aggs] : by_variant) {
        json metrics = json::object();
        for (const auto& [name, agg] : aggs)
            metrics[name] = json{{"mean", round1(agg.mean)}, {"sd", round1(agg.sd)}};
        variants[variant] = json{{"metrics", metrics}};
    }
    json out{{"schema_version", 1}, {"variants", variants}};
    if (!cost_table.empty()) {
        json cost = json::object();
        for (const auto& [variant, t] : cost_table) cost[variant] = round1(t);
        out["normalized_cost"] = cost;
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline int cmd_run(const std::string& case_path, const Settings& settings) {
    auto c = data::case_from_json(data::parse_json_file(case_path), case_path);
    auto config = settings.run_config();
    auto client = detail::build_client(settings);
    prompts::TemplateRegistry templates(settings.templates_dir.empty()
                                            ? std::filesystem::path{}
                                            : std::filesystem::path(settings.templates_dir));

    auto outcome = detail::execute_case(client, templates, c, config, settings.out, 1);
    for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << "\n";
    if (!outcome.error.empty())
        throw Error(outcome.error_class.value_or(ErrorClass::BackendUnavailable),
                    outcome.error);

    const auto& result = *outcome.result;
    auto cost = backend::cost_summary(result.trace);
    std::cout << "case " << c.case_id << ": " << to_string(result.termination_reason)
              << ", rounds " << result.rounds_executed << ", calls " << cost.total_calls
              << ", tokens " << cost.total_tokens() << "\n";
    std::cout << "trace: "
              << (std::filesystem::path(settings.out) / "runs" / outcome.run_id).string() << "\n";
    return 0;
}

inline int cmd_batch(const std::string& corpus_path, const Settings& settings) {
    auto corpus = data::load_corpus(corpus_path);
    auto config = settings.run_config();
    auto client = detail::build_client(settings);
    prompts::TemplateRegistry templates(settings.templates_dir.empty()
                                            ? std::filesystem::path{}
                                            : std::filesystem::path(settings.templates_dir));
    if (settings.runs < 1)
        throw Error(ErrorClass::InputValidation, "--runs must be >= 1");
    if (settings.parallel < 1)
        throw Error(ErrorClass::InputValidation, "--parallel must be >= 1");

    struct Job {
        const data::CaseSpec* spec = nullptr;
        int run_index = 0;
    };
    std::vector<Job> jobs;
    for (int r = 1; r <= settings.runs; ++r)
        for (const auto& c : corpus.cases) jobs.push_back({&c, r});

    std::vector<detail::RunOutcome> outcomes(jobs.size());
    std::atomic<size_t> cursor{0};
    auto worker = [&]() {
        while (true) {
            const size_t i = cursor.fetch_add(1);
            if (i >= jobs.size()) break;
            outcomes[i] = detail::execute_case(client, templates, *jobs[i].spec, config,
                                               settings.out, jobs[i].run_index);
        }
    };
    const int threads = std::min<int>(settings.parallel, static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    backend::HashEmbedding embedder;
    eval::MatchConfig mc{settings.threshold};
    mc.validate();

    std::vector<detail::MetricRow> rows;
    int failures = 0;
    std::map<std::string, const data::CaseSpec*> by_id;
    for (const auto& c : corpus.cases) by_id[c.case_id] = &c;

    for (const auto& outcome : outcomes) {
        for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << "\n";
        if (!outcome.result) {
            ++failures;
            std::cerr << "case " << outcome.case_id << " run " << outcome.run_index
                      << " aborted: " << outcome.error << "\n";
            continue;
        }
        auto row = detail::score_run(*outcome.result, *by_id.at(outcome.case_id), mc, embedder);
        row.variant = to_string(config.variant);
        row.run_index = outcome.run_index;
        rows.push_back(std::move(row));
    }

    auto aggs = detail::summarize(rows);
    std::cout << corpus.manifest.name << ": " << corpus.cases.size() << " case(s) x "
              << settings.runs << " run(s), variant " << to_string(config.variant) << "\n";
    detail::print_metric_table(std::cout, "metrics (mean +/- sd over runs):", aggs);

    std::vector<double> run_costs;
    {
        std::map<int, double> cost_by_run;
        for (const auto& row : rows) cost_by_run[row.run_index] += static_cast<double>(row.cost_tokens);
        for (const auto& [run, total] : cost_by_run) run_costs.push_back(total);
    }
    auto cost_agg = detail::aggregate(run_costs);
    std::cout << "  tokens " << detail::fmt1(detail::round1(cost_agg.mean)) << " +/- "
              << detail::fmt1(detail::round1(cost_agg.sd)) << " per run\n";
    if (failures > 0) std::cout << failures << " run(s) aborted\n";

    std::map<std::string, std::map<std::string, detail::Agg>> by_variant;
    by_variant[to_string(config.variant)] = aggs;
    util::write_file_atomic(std::filesystem::path(settings.out) / "summary.json",
                            detail::summary_json(by_variant, {}).dump(2) + "\n");
    return failures > 0 ? kExitBatchPartial : 0;
}

inline int cmd_eval(const std::string& traces_root, const std::string& corpus_path,
                    const Settings& settings) {
    auto corpus = data::load_corpus(corpus_path);
    std::map<std::string, const data::CaseSpec*> by_id;
    for (const auto& c : corpus.cases) by_id[c.case_id] = &c;

    auto envelopes = trace::load_all_envelopes(traces_root);
    if (envelopes.empty())
        throw Error(ErrorClass::InputValidation, "no runs under " + traces_root);

    backend::HashEmbedding embedder;
    eval::MatchConfig mc{settings.threshold};
    mc.validate();

    std::vector<detail::MetricRow> rows;
    std::ostringstream lines;
    for (const auto& env : envelopes) {
        auto it = by_id.find(env.case_id);
        if (it == by_id.end())
            throw Error(ErrorClass::DatasetValidation,
                        "run " + env.run_id + " references case '" + env.case_id +
                            "' absent from the corpus");
        detail::MetricRow row;
        if (env.aborted()) {
            row.case_id = env.case_id;
            row.difficulty = env.difficulty;
            row.mode = it->second->mode;
            row.aborted = true;
            row.error = env.abort_reason;
        } else {
            row = detail::score_run(*env.result, *it->second, mc, embedder);
        }
        row.variant = to_string(env.config.variant);
        row.run_index = env.run_index;

        json line{{"schema_version", 1},
                  {"run_id", env.run_id},
                  {"case_id", env.case_id},
                  {"difficulty", data::to_string(env.difficulty)},
                  {"variant", row.variant},
                  {"run_index", row.run_index},
                  {"mode", data::to_string(row.mode)},
                  {"aborted", row.aborted}};
        if (row.aborted) {
            line["error"] = row.error;
        } else {
            json metrics = json::object();
            for (const auto& [name, value] : row.metrics) metrics[name] = value;
            line["metrics"] = metrics;
            line["cost_tokens"] = row.cost_tokens;
        }
        lines << line.dump() << "\n";
        rows.push_back(std::move(row));
    }

    const auto out_dir = std::filesystem::path(settings.out);
    std::filesystem::create_directories(out_dir);
    util::write_file_atomic(out_dir / "scores.jsonl", lines.str());

    std::map<std::string, std::vector<detail::MetricRow>> rows_by_variant;
    for (auto& row : rows) rows_by_variant[row.variant].push_back(row);

    std::map<std::string, std::map<std::string, detail::Agg>> by_variant;
    for (const auto& [variant, vrows] : rows_by_variant) {
        by_variant[variant] = detail::summarize(vrows);
        detail::print_metric_table(std::cout, "variant " + variant + ":", by_variant[variant]);
    }

    // Cost ratios need a direct-baseline run set with matching run indices.
    std::map<std::string, double> cost_table;
    {
        std::map<std::string, std::map<int, double>> tokens;
        for (const auto& row : rows)
            if (!row.aborted) tokens[row.variant][row.run_index] += static_cast<double>(row.cost_tokens);
        auto base = tokens.find(to_string(Variant::Direct));
        if (base != tokens.end()) {
            std::map<std::string, std::vector<double>> method_costs;
            for (const auto& [variant, by_run] : tokens) {
                bool same_runs = by_run.size() == base->second.size();
                for (const auto& [run, total] : by_run)
                    if (!base->second.count(run)) same_runs = false;
                if (!same_runs) {
                    std::cerr << "note: variant " << variant
                              << " skipped in the cost table (run indices differ from direct)\n";
                    continue;
                }
                std::vector<double> totals;
                for (const auto& [run, total] : by_run) totals.push_back(total);
                method_costs[variant] = std::move(totals);
            }
            cost_table = eval::normalized_cost(method_costs, to_string(Variant::Direct));
            std::cout << "normalized cost (direct = 1.0):\n";
            for (const auto& [variant, t] : cost_table)
                std::cout << "  " << std::left << std::setw(22) << variant << " "
                          << detail::fmt1(detail::round1(t)) << "\n";
        }
    }

    util::write_file_atomic(out_dir / "summary.json",
                            detail::summary_json(by_variant, cost_table).dump(2) + "\n");
    std::cout << "scores: " << (out_dir / "scores.jsonl").string() << "\n";
    return 0;
}

inline int cmd_audit(const std::string& traces_root) {
    auto envelopes = trace::load_all_envelopes(traces_root);
    if (envelopes.empty())
        throw Error(ErrorClass::InputValidation, "no runs under " + traces_root);

    std::map<data::Difficulty, std::vector<RunResult>> by_difficulty;
    std::vector<RunResult> all;
    for (const auto& env : envelopes) {
        RunResult r;
        r.trace = env.records;  // audit needs records only; aborted runs count
        by_difficulty[env.difficulty].push_back(r);
        all.push_back(std::move(r));
    }

    auto print_row = [](const std::string& label, const eval::ReliabilityReport& report) {
        std::cout << "  " << std::left << std::setw(10) << label << std::right << std::setw(8)
                  << report.total_hypotheses << std::setw(14)
                  << eval::format_rate(report.unsupported_rate) << std::setw(10)
                  << eval::format_rate(report.flagged_rate) << std::setw(12)
                  << eval::format_rate(report.correction_within_flagged_rate) << "\n";
    };

    std::cout << "hypothesis reliability (percent):\n";
    std::cout << "  " << std::left << std::setw(10) << "split" << std::right << std::setw(8)
              << "hyps" << std::setw(14) << "unsupported" << std::setw(10) << "flagged"
              << std::setw(12) << "correction" << "\n";
    for (const auto& [difficulty, results] : by_difficulty)
        print_row(data::to_string(difficulty), eval::reliability_audit(results));
    print_row("overall", eval::reliability_audit(all));
    return 0;
}

inline int cmd_validate(const std::string& corpus_path) {
    auto corpus = data::load_corpus(corpus_path);
    std::cout << corpus.manifest.name << ": " << corpus.cases.size() << " case(s), mode "
              << data::to_string(corpus.manifest.mode) << "\n";
    std::map<data::Difficulty, int> counts;
    for (const auto& c : corpus.cases) counts[c.difficulty] += 1;
    for (const auto& [difficulty, n] : counts)
        std::cout << "  " << std::left << std::setw(8) << data::to_string(difficulty) << " " << n
                  << "\n";
    std::cout << "ok\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline int dispatch(int argc, const char* const* argv) {
    CLI::App app{"saba: auditable reasoning orchestration over narrative cases"};
    app.require_subcommand(1);

    std::string case_path, corpus_path, traces_root;

    auto* run = app.add_subcommand("run", "Run one case end to end");
    run->add_option("--case", case_path, "Case file")->required();
    detail::FlagBag run_flags;
    run_flags.attach(run);

    auto* batch = app.add_subcommand("batch", "Run a corpus, several independent runs per case");
    batch->add_option("--corpus", corpus_path, "Corpus manifest")->required();
    detail::FlagBag batch_flags;
    batch_flags.attach(batch);

    auto* eval_cmd = app.add_subcommand("eval", "Score stored runs against gold annotations");
    eval_cmd->add_option("--traces", traces_root, "Directory holding runs/")->required();
    eval_cmd->add_option("--corpus", corpus_path, "Corpus manifest")->required();
    detail::FlagBag eval_flags;
    eval_flags.attach(eval_cmd);

    auto* audit = app.add_subcommand("audit", "Reliability audit over stored traces");
    audit->add_option("--traces", traces_root, "Directory holding runs/")->required();

    auto* validate = app.add_subcommand("validate", "Validate a corpus without running inference");
    validate->add_option("--corpus", corpus_path, "Corpus manifest")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(case_path, run_flags.resolve());
        if (batch->parsed()) return cmd_batch(corpus_path, batch_flags.resolve());
        if (eval_cmd->parsed()) return cmd_eval(traces_root, corpus_path, eval_flags.resolve());
        if (audit->parsed()) return cmd_audit(traces_root);
        if (validate->parsed()) return cmd_validate(corpus_path);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.error_class()) << "]: " << e.message() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}

} // namespace saba::cli
