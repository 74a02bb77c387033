#include <catch2/catch_amalgamated.hpp>

#include "support/support.hpp"

#include "saba/qsr/engine.hpp"

using namespace saba;
using nlohmann::json;

namespace {

int calls_of_kind(const RunResult& r, PromptKind kind) {
    int n = 0;
    for (const auto& rec : r.trace)
        for (const auto& call : rec.model_calls)
            if (call.kind == kind) ++n;
    return n;
}

} // namespace

TEST_CASE("the gate is inclusive on both thresholds") {
    RunConfig config = testsupport::config_for(Variant::Full);

    CHECK(qsr::should_gate(0, 0, config));
    CHECK(!qsr::should_gate(1, 0, config));
    CHECK(!qsr::should_gate(0, 1, config));

    config.gate_conflict_threshold = 2;
    config.gate_doubt_threshold = 3;
    CHECK(qsr::should_gate(2, 3, config));
    CHECK(!qsr::should_gate(3, 3, config));
    CHECK(!qsr::should_gate(2, 4, config));

    CHECK_THROWS_AS(qsr::should_gate(-1, 0, config), Error);
}

TEST_CASE("a clean narrative is gated past the reasoning loop") {
    auto result = testsupport::run_fixture("gallery-easy", Variant::Full);

    CHECK(result.termination_reason == TerminationReason::GatedBypass);
    CHECK(result.rounds_executed == 0);
    REQUIRE(result.trace.size() == 1);
    REQUIRE(result.trace[0].baseline.has_value());
    CHECK(result.trace[0].baseline->pairs.size() == 3);
    CHECK(result.trace[0].state_size_after.baseline_units == 3);

    CHECK(calls_of_kind(result, PromptKind::Aware) == 0);
    CHECK(calls_of_kind(result, PromptKind::Decompose) == 0);
    CHECK(calls_of_kind(result, PromptKind::Hypothesize) == 0);
    CHECK(calls_of_kind(result, PromptKind::Synthesize) == 1);
    CHECK(calls_of_kind(result, PromptKind::Verify) == 3);

    REQUIRE(result.conclusion.answer_for(TaskDimension::suspect()) != nullptr);
    CHECK(*result.conclusion.answer_for(TaskDimension::suspect()) == "Edwin Hale");
}

TEST_CASE("a contested narrative reasons to logical closure") {
    auto result = testsupport::run_fixture("manor-medium", Variant::Full);

    CHECK(result.termination_reason == TerminationReason::LogicalClosure);
    CHECK(result.rounds_executed == 2);
    REQUIRE(result.trace.size() == 3);

    const auto& r1 = result.trace[1];
    CHECK(r1.round == 1);
    CHECK(r1.obstacles.size() == 1);
    CHECK(r1.obstacles[0].id == "obs-1-1");
    CHECK(r1.queries_added.size() == 2);
    CHECK(r1.queries_added[1].id == "qry-1-2");
    CHECK(r1.hypotheses_added.size() == 2);
    CHECK(r1.hypotheses_added[0].status == SupportStatus::Supported);
    CHECK(r1.hypotheses_added[1].status == SupportStatus::Unsupported);
    CHECK(r1.state_size_after.queries == 2);
    CHECK(r1.state_size_after.hypotheses == 2);

    const auto& r2 = result.trace[2];
    CHECK(r2.round == 2);
    CHECK(r2.obstacles.empty());
    CHECK(r2.queries_added.empty());
    CHECK(r2.hypotheses_added.empty());
    CHECK(r2.state_size_after == r1.state_size_after);
    // Closure still costs the check plus the synthesis.
    REQUIRE(r2.model_calls.size() == 2);
    CHECK(r2.model_calls[0].kind == PromptKind::Aware);
    CHECK(r2.model_calls[1].kind == PromptKind::Synthesize);
}

TEST_CASE("an unresolvable narrative stops at the depth bound") {
    auto result = testsupport::run_fixture("harbor-complex", Variant::Full);

    CHECK(result.termination_reason == TerminationReason::MaxDepth);
    CHECK(result.rounds_executed == 3);
    REQUIRE(result.trace.size() == 4);

    REQUIRE(result.trace[1].hypotheses_added.size() == 1);
    CHECK(result.trace[1].hypotheses_added[0].id == "hyp-1-1");
    CHECK(result.trace[1].hypotheses_added[0].status == SupportStatus::Flagged);

    REQUIRE(result.trace[2].hypotheses_added.size() == 1);
    const auto& revision = result.trace[2].hypotheses_added[0];
    CHECK(revision.status == SupportStatus::Supported);
    CHECK(revision.supersedes.value() == "hyp-1-1");

    const auto& last = result.trace.back();
    CHECK(last.model_calls.back().kind == PromptKind::Synthesize);
    CHECK(last.state_size_after.hypotheses == 3);
}

TEST_CASE("state size never shrinks across a run") {
    for (const char* name : {"manor-medium", "harbor-complex", "willow-distractor"}) {
        auto result = testsupport::run_fixture(name, Variant::Full);
        int prev = 0;
        for (const auto& rec : result.trace) {
            CHECK(rec.state_size_after.total() >= prev);
            prev = rec.state_size_after.total();
        }
    }
}

TEST_CASE("direct and cot are single-call runs with distinct prompts") {
    auto direct = testsupport::run_fixture("manor-medium", Variant::Direct);
    CHECK(direct.termination_reason == TerminationReason::GatedBypass);
    CHECK(direct.rounds_executed == 0);
    REQUIRE(direct.trace.size() == 1);
    REQUIRE(direct.trace[0].model_calls.size() == 1);
    CHECK(direct.trace[0].model_calls[0].kind == PromptKind::DirectAnswer);
    CHECK(!direct.trace[0].baseline.has_value());
    CHECK(*direct.conclusion.answer_for(TaskDimension::suspect()) == "the groom");

    auto cot = testsupport::run_fixture("manor-medium", Variant::CoT);
    REQUIRE(cot.trace.size() == 1);
    CHECK(*cot.conclusion.answer_for(TaskDimension::suspect()) == "Clara Wren");
}

TEST_CASE("ablations reshape the trace the way they should") {
    SECTION("no-awareness fuses and answers without a loop") {
        auto r = testsupport::run_fixture("manor-medium", Variant::NoAwareness);
        CHECK(r.termination_reason == TerminationReason::GatedBypass);
        CHECK(r.rounds_executed == 0);
        REQUIRE(r.trace.size() == 1);
        CHECK(calls_of_kind(r, PromptKind::ExtractStructure) == 1);
        CHECK(calls_of_kind(r, PromptKind::Aware) == 0);
        CHECK(calls_of_kind(r, PromptKind::Synthesize) == 1);
    }

    SECTION("self-assessment-only sees obstacles but derives nothing") {
        auto r = testsupport::run_fixture("manor-medium", Variant::SelfAssessmentOnly);
        CHECK(r.termination_reason == TerminationReason::LogicalClosure);
        CHECK(r.rounds_executed == 2);
        REQUIRE(r.trace.size() == 3);
        CHECK(r.trace[1].obstacles.size() == 1);
        CHECK(r.trace[1].queries_added.empty());
        CHECK(r.trace[1].hypotheses_added.empty());
        CHECK(r.trace[1].state_size_after.total() ==
              r.trace[0].state_size_after.total());
        CHECK(calls_of_kind(r, PromptKind::Decompose) == 0);
        CHECK(calls_of_kind(r, PromptKind::Hypothesize) == 0);
    }

    SECTION("no-if always reasons, over the raw narrative") {
        auto r = testsupport::run_fixture("manor-medium", Variant::NoIF);
        CHECK(r.termination_reason == TerminationReason::LogicalClosure);
        CHECK(calls_of_kind(r, PromptKind::ExtractStructure) == 0);
        CHECK(calls_of_kind(r, PromptKind::Verify) == 0);
        REQUIRE(r.trace[0].baseline.has_value());
        CHECK(r.trace[0].baseline->pairs.size() == 4);  // one per narrative unit
        CHECK(r.trace[0].state_size_after.baseline_units == 4);
        CHECK(r.rounds_executed == 2);
    }
}

TEST_CASE("records stream through hooks as they complete") {
    auto client = testsupport::fixture_client();
    prompts::TemplateRegistry templates;
    auto c = testsupport::load_fixture_case("manor-medium");

    std::vector<int> seen_rounds;
    qsr::RunHooks hooks;
    hooks.on_record = [&](const TraceRecord& r) { seen_rounds.push_back(r.round); };
    auto result = qsr::run(client, templates, c, testsupport::config_for(Variant::Full), hooks);
    CHECK(seen_rounds == std::vector<int>{0, 1, 2});
    CHECK(result.trace.size() == 3);
}

TEST_CASE("a mid-run failure still leaves the earlier records with the caller") {
    // Strip the round-2 closure check out of the script so round 2 hits a gap.
    auto raw = json::parse(util::read_file(testsupport::fixture_path("mock_script.json")));
    raw.at("cases").at("manor-medium").erase("Aware/2/");
    auto provider = std::make_shared<backend::MockProvider>(raw);
    backend::ModelClient client(provider, {}, std::make_shared<backend::ResponseCache>());
    prompts::TemplateRegistry templates;
    auto c = testsupport::load_fixture_case("manor-medium");

    std::vector<int> seen_rounds;
    qsr::RunHooks hooks;
    hooks.on_record = [&](const TraceRecord& r) { seen_rounds.push_back(r.round); };
    try {
        qsr::run(client, templates, c, testsupport::config_for(Variant::Full), hooks);
        FAIL("expected a missing fixture");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::MissingFixture);
    }
    CHECK(seen_rounds == std::vector<int>{0, 1});
}

TEST_CASE("engine repairs and warns instead of dying on soft faults") {
    json script{
        {"schema_version", 1},
        {"cases",
         {{"soft",
           {{"ExtractStructure/0/",
             {{"response",
               {{"events", json::array({{{"description", "a theft happened"},
                                         {"source_units", {"u1"}}}})},
                {"attributes", json::array()}}}}},
            {"Align/0/", {{"response", {{"alignment", json::array()}}}}},
            {"Verify/0/evt-1",
             {{"response",
               {{"verdict", "Conflict"}, {"note", "the account contradicts itself"}}}}},
            {"Aware/1/",
             {{"response",
               {{"obstacles", json::array({{{"type", "odd-kind"},
                                            {"dimension", "Timeline"},
                                            {"requirement", "order the evening"}}})}}}}},
            {"Decompose/1/obs-1-1", {{"response", {{"queries", json::array()}}}}},
            {"Hypothesize/1/qry-1-1",
             {{"response",
               {{"statement", "the order is knowable"},
                {"evidence", {"ghost-9"}},
                {"flag", false}}}}},
            {"Aware/2/", {{"response", {{"obstacles", json::array()}}}}},
            {"Synthesize/2/",
             {{"response",
               {{"answers",
                 {{"Suspect", "nobody"}, {"Motive", "none"}, {"ModusOperandi", "none"}}}}}}}}}}}};
    auto provider = std::make_shared<backend::MockProvider>(script);
    backend::ModelClient client(provider, {}, std::make_shared<backend::ResponseCache>());
    prompts::TemplateRegistry templates;

    data::CaseSpec c;
    c.case_id = "soft";
    c.mode = data::CaseMode::DP;
    c.difficulty = data::Difficulty::NA;
    c.narrative = {{"u1", "a theft happened at the inn", 0}};
    c.task.instruction = "solve it";
    c.task.dimensions = {TaskDimension::suspect(), TaskDimension::motive(),
                         TaskDimension::modus_operandi()};
    c.gold_suspect.name = "nobody";
    c.gold_motive_props = {"none"};
    c.gold_modus_props = {"none"};
    c.gold_critical_clues = {"none"};

    std::vector<std::string> warnings;
    qsr::RunHooks hooks;
    hooks.on_warning = [&](const std::string& w) { warnings.push_back(w); };
    auto result = qsr::run(client, templates, c, testsupport::config_for(Variant::Full), hooks);

    // Undeclared dimension and unknown citation both warn; the run completes.
    REQUIRE(warnings.size() == 2);
    CHECK_THAT(warnings[0], Catch::Matchers::ContainsSubstring("Timeline"));
    CHECK_THAT(warnings[1], Catch::Matchers::ContainsSubstring("ghost-9"));

    const auto& r1 = result.trace.at(1);
    CHECK(r1.obstacles.at(0).dimension.name() == "Timeline");
    CHECK(r1.obstacles.at(0).type.name() == "odd-kind");
    // No queries from the model: the requirement itself became the query.
    REQUIRE(r1.queries_added.size() == 1);
    CHECK(r1.queries_added[0].question == "order the evening");
    CHECK(r1.hypotheses_added.at(0).status == SupportStatus::Unsupported);
}
