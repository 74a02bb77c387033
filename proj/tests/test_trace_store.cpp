#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "support/support.hpp"

#include "saba/trace/store.hpp"

using namespace saba;
using namespace saba::trace;
using nlohmann::json;

namespace {

RunConfig test_config() { return testsupport::config_for(Variant::Full); }

TraceRecord record_for_round(int round) {
    TraceRecord r;
    r.round = round;
    if (round == 0) {
        r.baseline = BaselineState{};
        r.state_size_after = {2, 0, 0};
        r.model_calls.push_back({PromptKind::ExtractStructure, 40, 20, false, "estimator", 3});
    } else {
        Obstacle o;
        o.id = ids::obstacle(round, 1);
        o.type = ObstacleType::parse("MissingLink");
        o.dimension = TaskDimension::motive();
        o.requirement = "gap " + std::to_string(round);
        o.round = round;
        r.obstacles.push_back(o);
        QueryItem q;
        q.id = ids::query(round, 1);
        q.obstacle_id = o.id;
        q.question = "what fills gap " + std::to_string(round) + "?";
        q.round = round;
        r.queries_added.push_back(q);
        r.state_size_after = {2, round, 0};
        r.model_calls.push_back({PromptKind::Aware, 30, 10, false, "estimator", 2});
    }
    return r;
}

RunResult result_with(std::vector<TraceRecord> records) {
    RunResult res;
    res.conclusion.answers.emplace_back(TaskDimension::suspect(), "the porter");
    res.conclusion.rationale = "keys and opportunity";
    res.conclusion.support_ids = {"evt-1"};
    res.trace = std::move(records);
    res.termination_reason = TerminationReason::LogicalClosure;
    res.rounds_executed = static_cast<int>(res.trace.size()) - 1;
    return res;
}

std::filesystem::path write_run(const std::filesystem::path& root, const std::string& run_id,
                                int rounds, bool finish) {
    TraceWriter w(root, run_id, "case-x", data::Difficulty::Medium, 1, test_config());
    std::vector<TraceRecord> recs;
    for (int r = 0; r <= rounds; ++r) {
        recs.push_back(record_for_round(r));
        w.append(recs.back());
    }
    if (finish) w.finish(result_with(recs));
    return w.dir();
}

} // namespace

TEST_CASE("a written run replays into an identical envelope") {
    testsupport::TempDir tmp;
    auto dir = write_run(tmp.path(), "case-x--full--r1", 2, true);

    auto env = load_envelope(dir);
    CHECK(env.run_id == "case-x--full--r1");
    CHECK(env.case_id == "case-x");
    CHECK(env.difficulty == data::Difficulty::Medium);
    CHECK(env.run_index == 1);
    CHECK(env.config_hash == config_hash("case-x", test_config()));
    CHECK(json(env.config) == json(test_config()));
    CHECK_FALSE(env.started_at.empty());
    CHECK_FALSE(env.finished_at.empty());
    REQUIRE(env.records.size() == 3);
    CHECK(env.records[0].baseline.has_value());
    CHECK_FALSE(env.records[1].baseline.has_value());
    CHECK(env.records[2].queries_added[0].id == "qry-2-1");
    REQUIRE_FALSE(env.aborted());
    CHECK(env.result->termination_reason == TerminationReason::LogicalClosure);
    CHECK(env.result->rounds_executed == 2);
    CHECK(env.result->trace.size() == 3);
    CHECK(env.result->conclusion.support_ids == std::vector<std::string>{"evt-1"});
}

TEST_CASE("the writer refuses out-of-order rounds") {
    testsupport::TempDir tmp;
    TraceWriter w(tmp.path(), "seq", "case-x", data::Difficulty::NA, 1, test_config());
    w.append(record_for_round(0));
    auto skipped = record_for_round(2);
    try {
        w.append(skipped);
        FAIL("expected a sequencing error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::SequencingError);
    }
}

TEST_CASE("a torn final line is tolerated, an interior one is not") {
    testsupport::TempDir tmp;
    auto dir = write_run(tmp.path(), "torn", 1, true);
    auto trace_path = dir / "trace.jsonl";

    SECTION("garbage appended by a crash is dropped") {
        std::ofstream(trace_path, std::ios::app) << "{\"type\":\"record\",\"rec";
        auto env = load_envelope(dir);
        CHECK(env.records.size() == 2);
        CHECK_FALSE(env.aborted());
    }
    SECTION("a corrupt interior line fails loudly") {
        auto raw = util::read_file(trace_path);
        auto pos = raw.find('\n');
        REQUIRE(pos != std::string::npos);
        raw.insert(pos + 1, "not json\n");
        util::write_file_atomic(trace_path, raw);
        CHECK_THROWS_AS(load_envelope(dir), Error);
    }
}

TEST_CASE("missing or abort-marked results read back as aborted runs") {
    testsupport::TempDir tmp;

    SECTION("no result file at all") {
        auto dir = write_run(tmp.path(), "crashed", 1, false);
        auto env = load_envelope(dir);
        CHECK(env.aborted());
        CHECK_THAT(env.abort_reason, Catch::Matchers::ContainsSubstring("no result file"));
        CHECK(env.records.size() == 2);
    }
    SECTION("an explicit abort marker") {
        TraceWriter w(tmp.path(), "halted", "case-x", data::Difficulty::NA, 1, test_config());
        w.append(record_for_round(0));
        w.finish_abort("backend gave out");
        auto env = load_envelope(w.dir());
        CHECK(env.aborted());
        CHECK(env.abort_reason == "backend gave out");
    }
    SECTION("an empty run directory") {
        std::filesystem::create_directories(tmp.path() / "runs" / "hollow");
        CHECK_THROWS_AS(load_envelope(tmp.path() / "runs" / "hollow"), Error);
    }
}

TEST_CASE("load_all_envelopes walks run directories in name order") {
    testsupport::TempDir tmp;
    write_run(tmp.path(), "b-run", 0, true);
    write_run(tmp.path(), "a-run", 1, true);
    write_run(tmp.path(), "c-run", 0, false);
    auto all = load_all_envelopes(tmp.path());
    REQUIRE(all.size() == 3);
    CHECK(all[0].run_id == "a-run");
    CHECK(all[1].run_id == "b-run");
    CHECK(all[2].run_id == "c-run");
    CHECK(all[2].aborted());
    CHECK(load_all_envelopes(tmp.path() / "nowhere").empty());
}

TEST_CASE("golden comparison ignores latency and cache residency") {
    testsupport::TempDir tmp;
    auto dir = write_run(tmp.path(), "golden", 2, true);
    auto golden = load_envelope(dir);

    auto actual = golden;
    CHECK(compare_golden(actual, golden).empty());

    actual.records[0].model_calls[0].latency_ms = 9999;
    actual.records[1].model_calls[0].cache_hit = true;
    CHECK(compare_golden(actual, golden).empty());
}

TEST_CASE("golden comparison names behavioral differences") {
    testsupport::TempDir tmp;
    auto dir = write_run(tmp.path(), "golden", 2, true);
    auto golden = load_envelope(dir);

    SECTION("a drifted obstacle requirement") {
        auto actual = golden;
        actual.records[1].obstacles[0].requirement = "something else";
        auto report = compare_golden(actual, golden);
        REQUIRE(report.differences.size() == 1);
        CHECK_THAT(report.differences[0],
                   Catch::Matchers::ContainsSubstring("obstacle obs-1-1"));
        CHECK_THAT(report.differences[0],
                   Catch::Matchers::ContainsSubstring("requirement"));
    }
    SECTION("a changed state size") {
        auto actual = golden;
        actual.records[2].state_size_after.hypotheses = 7;
        auto report = compare_golden(actual, golden);
        REQUIRE(report.differences.size() == 1);
        CHECK_THAT(report.differences[0],
                   Catch::Matchers::ContainsSubstring("round 2: state_size_after"));
    }
    SECTION("a different conclusion") {
        auto actual = golden;
        actual.result->conclusion.rationale = "changed";
        auto report = compare_golden(actual, golden);
        REQUIRE(report.differences.size() == 1);
        CHECK_THAT(report.differences[0], Catch::Matchers::ContainsSubstring("conclusion"));
    }
    SECTION("token counts still count") {
        auto actual = golden;
        actual.records[0].model_calls[0].completion_tokens += 5;
        CHECK_FALSE(compare_golden(actual, golden).empty());
    }
    SECTION("diverging record counts short-circuit") {
        auto actual = golden;
        actual.records.pop_back();
        auto report = compare_golden(actual, golden);
        REQUIRE_FALSE(report.empty());
        CHECK_THAT(report.differences.back(),
                   Catch::Matchers::ContainsSubstring("record count"));
    }
    SECTION("an aborted run against a completed golden") {
        auto actual = golden;
        actual.result.reset();
        auto report = compare_golden(actual, golden);
        REQUIRE_FALSE(report.empty());
        CHECK_THAT(report.differences[0], Catch::Matchers::ContainsSubstring("abort state"));
    }
}

TEST_CASE("mismatched runs are incomparable, not merely different") {
    testsupport::TempDir tmp;
    auto golden = load_envelope(write_run(tmp.path(), "golden", 1, true));

    SECTION("different case") {
        auto actual = golden;
        actual.case_id = "case-y";
        try {
            compare_golden(actual, golden);
            FAIL("expected incomparable");
        } catch (const Error& e) {
            CHECK(e.error_class() == ErrorClass::Incomparable);
        }
    }
    SECTION("different configuration") {
        auto actual = golden;
        auto other = test_config();
        other.t_max = 9;
        actual.config_hash = config_hash("case-x", other);
        CHECK_THROWS_AS(compare_golden(actual, golden), Error);
    }
}

TEST_CASE("an engine run written to disk survives the round trip") {
    testsupport::TempDir tmp;
    auto result = testsupport::run_fixture("manor-medium", Variant::Full);

    auto config = testsupport::config_for(Variant::Full);
    TraceWriter w(tmp.path(), "manor", "manor-medium", data::Difficulty::Medium, 1, config);
    for (const auto& rec : result.trace) w.append(rec);
    w.finish(result);

    auto env = load_envelope(w.dir());
    REQUIRE_FALSE(env.aborted());
    CHECK(env.records.size() == result.trace.size());
    CHECK(json(env.result->conclusion) == json(result.conclusion));
    CHECK(json(env.records[0]) == json(result.trace[0]));

    auto report = compare_golden(env, env);
    CHECK(report.empty());
}
