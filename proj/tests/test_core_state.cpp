#include <catch2/catch_amalgamated.hpp>

#include "saba/core/serde.hpp"
#include "saba/core/state.hpp"

using namespace saba;

namespace {

BaselineState tiny_baseline() {
    BaselineState b;
    for (int k = 1; k <= 2; ++k) {
        BaselinePair p;
        p.unit.event.id = ids::event(k);
        p.unit.event.ordinal = k - 1;
        p.unit.event.description = "event " + std::to_string(k);
        p.comment.unit_id = p.unit.event.id;
        p.comment.verdict = Verdict::Consistent;
        b.pairs.push_back(std::move(p));
    }
    return b;
}

Obstacle obstacle_at(int round, int k) {
    Obstacle ob;
    ob.id = ids::obstacle(round, k);
    ob.type = ObstacleType::parse("MissingLink");
    ob.dimension = TaskDimension::motive();
    ob.requirement = "pin down the missing step";
    ob.round = round;
    return ob;
}

QueryItem query_at(int round, int k, const std::string& obstacle_id) {
    QueryItem q;
    q.id = ids::query(round, k);
    q.obstacle_id = obstacle_id;
    q.question = "what fills the gap?";
    q.round = round;
    return q;
}

HypothesisItem hypothesis_at(int round, int k, const std::string& query_id) {
    HypothesisItem h;
    h.id = ids::hypothesis(round, k);
    h.query_id = query_id;
    h.statement = "a worked answer";
    h.status = SupportStatus::Supported;
    h.round = round;
    return h;
}

} // namespace

TEST_CASE("deterministic ids are 1-based and round-scoped") {
    CHECK(ids::event(1) == "evt-1");
    CHECK(ids::attribute(3) == "att-3");
    CHECK(ids::obstacle(2, 1) == "obs-2-1");
    CHECK(ids::query(1, 2) == "qry-1-2");
    CHECK(ids::hypothesis(3, 1) == "hyp-3-1");
}

TEST_CASE("initial state wraps a validated baseline at round zero") {
    auto state = initial_state(tiny_baseline());
    CHECK(state.round == 0);
    CHECK(state.size().baseline_units == 2);
    CHECK(state.size().queries == 0);
    CHECK(state.size().hypotheses == 0);
    CHECK(state.item_ids().count("evt-1") == 1);
}

TEST_CASE("baseline validation rejects structural faults") {
    SECTION("empty baseline") {
        CHECK_THROWS_MATCHES(initial_state(BaselineState{}), Error,
                             Catch::Matchers::Predicate<Error>([](const Error& e) {
                                 return e.error_class() == ErrorClass::StructuralValidation;
                             }));
    }
    SECTION("comment on the wrong unit") {
        auto b = tiny_baseline();
        b.pairs[1].comment.unit_id = "evt-1";
        CHECK_THROWS_AS(initial_state(b), Error);
    }
    SECTION("conflict without a note") {
        auto b = tiny_baseline();
        b.pairs[0].comment.verdict = Verdict::Conflict;
        CHECK_THROWS_AS(initial_state(b), Error);
    }
    SECTION("ordinal order broken") {
        auto b = tiny_baseline();
        std::swap(b.pairs[0], b.pairs[1]);
        CHECK_THROWS_AS(initial_state(b), Error);
    }
}

TEST_CASE("enrich grows the state append-only and bumps the round") {
    auto s0 = initial_state(tiny_baseline());
    auto ob = obstacle_at(1, 1);
    auto q = query_at(1, 1, ob.id);
    auto h = hypothesis_at(1, 1, q.id);

    auto s1 = enrich(s0, {ob}, {q}, {h});
    CHECK(s1.round == 1);
    CHECK(s1.size().queries == 1);
    CHECK(s1.size().hypotheses == 1);
    CHECK(s0.size().queries == 0);  // input untouched
    CHECK(s1.find_hypothesis("hyp-1-1") != nullptr);

    // A later round can supersede an earlier hypothesis.
    auto ob2 = obstacle_at(2, 1);
    auto q2 = query_at(2, 1, ob2.id);
    auto h2 = hypothesis_at(2, 1, q2.id);
    h2.supersedes = "hyp-1-1";
    auto s2 = enrich(s1, {ob2}, {q2}, {h2});
    CHECK(s2.round == 2);
    CHECK(s2.find_hypothesis("hyp-2-1")->supersedes.value() == "hyp-1-1");
}

TEST_CASE("enrich rejects bad rounds, links, and id reuse") {
    auto s0 = initial_state(tiny_baseline());
    auto ob = obstacle_at(1, 1);
    auto q = query_at(1, 1, ob.id);
    auto h = hypothesis_at(1, 1, q.id);

    SECTION("stale round on a new item") {
        auto bad = q;
        bad.round = 0;
        CHECK_THROWS_AS(enrich(s0, {ob}, {bad}, {}), Error);
    }
    SECTION("query pointing at an unregistered obstacle") {
        auto bad = q;
        bad.obstacle_id = "obs-9-9";
        try {
            enrich(s0, {ob}, {bad}, {});
            FAIL("expected a link error");
        } catch (const Error& e) {
            CHECK(e.error_class() == ErrorClass::LinkError);
        }
    }
    SECTION("hypothesis pointing at an unknown query") {
        auto bad = h;
        bad.query_id = "qry-9-9";
        CHECK_THROWS_AS(enrich(s0, {ob}, {q}, {bad}), Error);
    }
    SECTION("id collision with an existing item") {
        auto bad = q;
        bad.id = "evt-1";
        try {
            enrich(s0, {ob}, {bad}, {});
            FAIL("expected an id collision");
        } catch (const Error& e) {
            CHECK(e.error_class() == ErrorClass::IdCollision);
        }
    }
    SECTION("supersedes must name an earlier-round hypothesis") {
        auto h_bad = h;
        h_bad.supersedes = "hyp-1-9";
        CHECK_THROWS_AS(enrich(s0, {ob}, {q}, {h_bad}), Error);

        // Same-round sibling is also rejected: the target is not in the prior state.
        auto sibling = hypothesis_at(1, 2, q.id);
        sibling.supersedes = h.id;
        CHECK_THROWS_AS(enrich(s0, {ob}, {q}, {h, sibling}), Error);
    }
}

TEST_CASE("core serde round-trips every structure") {
    auto ob = obstacle_at(1, 1);
    nlohmann::json j = ob;
    auto back = j.get<Obstacle>();
    CHECK(back.id == ob.id);
    CHECK(back.type == ob.type);
    CHECK(back.requirement == ob.requirement);

    HypothesisItem h = hypothesis_at(2, 1, "qry-2-1");
    h.supersedes = "hyp-1-1";
    nlohmann::json hj = h;
    auto hback = hj.get<HypothesisItem>();
    CHECK(hback.supersedes.value() == "hyp-1-1");
    CHECK(hback.status == SupportStatus::Supported);

    TraceRecord rec;
    rec.round = 0;
    rec.baseline = tiny_baseline();
    rec.state_size_after = StateSize{2, 0, 0};
    ModelCall call;
    call.kind = PromptKind::Verify;
    call.prompt_tokens = 11;
    call.completion_tokens = 4;
    rec.model_calls.push_back(call);
    nlohmann::json rj = rec;
    auto rback = rj.get<TraceRecord>();
    REQUIRE(rback.baseline.has_value());
    CHECK(rback.baseline->pairs.size() == 2);
    CHECK(rback.model_calls.at(0).prompt_tokens == 11);
    CHECK(rback.state_size_after == rec.state_size_after);

    TraceRecord plain;
    plain.round = 2;
    nlohmann::json pj = plain;
    CHECK(!pj.contains("baseline"));
    CHECK(!pj.get<TraceRecord>().baseline.has_value());

    Conclusion c;
    c.answers.emplace_back(TaskDimension::suspect(), "the porter");
    c.support_ids = {"evt-1"};
    nlohmann::json cj = c;
    auto cback = cj.get<Conclusion>();
    CHECK(cback.support_ids == std::vector<std::string>{"evt-1"});
    REQUIRE(cback.answer_for(TaskDimension::suspect()) != nullptr);
}

TEST_CASE("label parsers fall back instead of failing") {
    CHECK(TaskDimension::parse("Motive") == TaskDimension::motive());
    CHECK(TaskDimension::parse("Timeline").name() == "Timeline");
    CHECK(ObstacleType::parse("Ambiguity").name() == "Ambiguity");
    CHECK(ObstacleType::parse("odd-kind").name() == "odd-kind");
    CHECK(!parse_verdict("Sure").has_value());
    CHECK(parse_verdict("Doubt").value() == Verdict::Doubt);
    CHECK(!parse_variant("fancy").has_value());
    CHECK(parse_variant("self-assessment-only").value() == Variant::SelfAssessmentOnly);
}
