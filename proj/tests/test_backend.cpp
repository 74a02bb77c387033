#include <catch2/catch_amalgamated.hpp>

#include "support/support.hpp"

#include "saba/backend/cost.hpp"
#include "saba/backend/embedding.hpp"
#include "saba/backend/mock.hpp"
#include "saba/backend/provider.hpp"
#include "saba/fusion/fusion.hpp"

using namespace saba;
using nlohmann::json;

namespace {

backend::ModelClient client_over(const json& script, bool cache_enabled = true) {
    auto provider = std::make_shared<backend::MockProvider>(script);
    backend::ClientOptions options;
    options.cache_enabled = cache_enabled;
    return backend::ModelClient(provider, options, std::make_shared<backend::ResponseCache>());
}

backend::ModelRequest request_for(const std::string& case_id, const std::string& disc = "d") {
    backend::ModelRequest req;
    req.kind = PromptKind::DirectAnswer;
    req.rendered_prompt = "prompt body";
    req.temperature = 0.0;
    req.case_id = case_id;
    req.round = 0;
    req.discriminator = disc;
    return req;
}

backend::Validator accept_any() {
    return [](const json&) { return std::nullopt; };
}

} // namespace

TEST_CASE("mock provider replays scripted responses and fails loudly on gaps") {
    json script{{"schema_version", 1},
                {"cases", {{"c1", {{"DirectAnswer/0/d", {{"response", {{"ok", true}}}}}}}}}};
    auto client = client_over(script);

    auto resp = client.complete(request_for("c1"), accept_any(), ErrorClass::QsrParse);
    CHECK(resp.parsed.at("ok") == true);
    CHECK(resp.token_source == "estimator");
    CHECK(resp.prompt_tokens > 0);

    try {
        auto req = request_for("c1", "other");
        req.rendered_prompt = "a different prompt body";  // distinct content, no cache reuse
        client.complete(req, accept_any(), ErrorClass::QsrParse);
        FAIL("expected a missing-fixture error");
    } catch (const Error& e) {
        CHECK(e.error_class() == ErrorClass::MissingFixture);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("c1/DirectAnswer/0/other"));
    }
}

TEST_CASE("retry budget covers transport and schema failures alike") {
    SECTION("succeeds on the third attempt, charging the failed ones") {
        json script{{"schema_version", 1},
                    {"cases",
                     {{"c1",
                       {{"DirectAnswer/0/d",
                         {{"attempts",
                           json::array({{{"transport_error", "connection refused"}},
                                        {{"raw_text", "not json at all"}},
                                        {{"response", {{"ok", 1}}},
                                         {"prompt_tokens", 10},
                                         {"completion_tokens", 5}}})}}}}}}}};
        auto client = client_over(script);
        auto resp = client.complete(request_for("c1"), accept_any(), ErrorClass::QsrParse);
        CHECK(resp.parsed.at("ok") == 1);
        CHECK(resp.failed_attempts.size() == 2);
        CHECK(resp.token_source == "provider");

        auto call = fusion::to_model_call(PromptKind::DirectAnswer, resp);
        CHECK(call.prompt_tokens > 10);  // failed attempts folded in
    }

    SECTION("three schema failures exhaust the budget") {
        json script{{"schema_version", 1},
                    {"cases",
                     {{"c1", {{"DirectAnswer/0/d", {{"raw_text", "still not json"}}}}}}}};
        auto client = client_over(script);
        try {
            client.complete(request_for("c1"), accept_any(), ErrorClass::FusionParse);
            FAIL("expected parse exhaustion");
        } catch (const backend::ParseExhausted& e) {
            CHECK(e.error_class() == ErrorClass::FusionParse);
            CHECK(e.attempts().size() == 3);
        }
    }

    SECTION("validator rejections burn attempts too") {
        json script{{"schema_version", 1},
                    {"cases", {{"c1", {{"DirectAnswer/0/d", {{"response", {{"ok", 1}}}}}}}}}};
        auto client = client_over(script, false);
        int calls = 0;
        auto validator = [&calls](const json&) -> std::optional<std::string> {
            ++calls;
            return "always wrong";
        };
        CHECK_THROWS_AS(client.complete(request_for("c1"), validator, ErrorClass::QsrParse),
                        backend::ParseExhausted);
        CHECK(calls == 3);
    }

    SECTION("pure transport failure maps to backend unavailability") {
        json script{{"schema_version", 1},
                    {"cases",
                     {{"c1", {{"DirectAnswer/0/d", {{"transport_error", "refused"}}}}}}}};
        auto client = client_over(script);
        try {
            client.complete(request_for("c1"), accept_any(), ErrorClass::QsrParse);
            FAIL("expected transport exhaustion");
        } catch (const backend::TransportExhausted& e) {
            CHECK(e.error_class() == ErrorClass::BackendUnavailable);
        }
    }
}

TEST_CASE("identical requests hit the cache with token counts preserved") {
    json script{{"schema_version", 1},
                {"cases",
                 {{"c1",
                   {{"DirectAnswer/0/d",
                     {{"response", {{"ok", 1}}},
                      {"prompt_tokens", 40},
                      {"completion_tokens", 7}}}}}}}};
    auto client = client_over(script);

    auto first = client.complete(request_for("c1"), accept_any(), ErrorClass::QsrParse);
    CHECK(!first.cache_hit);
    auto second = client.complete(request_for("c1"), accept_any(), ErrorClass::QsrParse);
    CHECK(second.cache_hit);
    CHECK(second.prompt_tokens == 40);
    CHECK(second.completion_tokens == 7);

    // A different temperature is a different cache entry.
    auto warm = request_for("c1");
    warm.temperature = 0.7;
    auto third = client.complete(warm, accept_any(), ErrorClass::QsrParse);
    CHECK(!third.cache_hit);
}

TEST_CASE("the persistent cache survives a new client over the same directory") {
    testsupport::TempDir tmp;
    json script{{"schema_version", 1},
                {"cases",
                 {{"c1",
                   {{"DirectAnswer/0/d",
                     {{"response", {{"ok", 1}}},
                      {"prompt_tokens", 12},
                      {"completion_tokens", 3}}}}}}}};
    auto provider = std::make_shared<backend::MockProvider>(script);
    backend::ClientOptions options;
    {
        backend::ModelClient client(provider, options,
                                    std::make_shared<backend::ResponseCache>(tmp.path()));
        CHECK(!client.complete(request_for("c1"), [](const json&) { return std::nullopt; },
                               ErrorClass::QsrParse)
                   .cache_hit);
    }
    backend::ModelClient fresh(provider, options,
                               std::make_shared<backend::ResponseCache>(tmp.path()));
    auto resp = fresh.complete(request_for("c1"), [](const json&) { return std::nullopt; },
                               ErrorClass::QsrParse);
    CHECK(resp.cache_hit);
    CHECK(resp.prompt_tokens == 12);
}

TEST_CASE("cost summary distinguishes fresh tokens from cache-hit tokens") {
    std::vector<TraceRecord> trace(1);
    ModelCall fresh;
    fresh.prompt_tokens = 100;
    fresh.completion_tokens = 20;
    ModelCall hit = fresh;
    hit.cache_hit = true;
    trace[0].model_calls = {fresh, hit};

    auto all = backend::cost_summary(trace, backend::CostMode::IncludeCacheHits);
    CHECK(all.total_tokens() == 240);
    CHECK(all.total_calls == 2);
    CHECK(all.cache_hits == 1);

    auto fresh_only = backend::cost_summary(trace, backend::CostMode::FreshOnly);
    CHECK(fresh_only.total_tokens() == 120);
    CHECK(fresh_only.total_calls == 2);
}

TEST_CASE("hash embedding is deterministic, unit-norm, and order-sensitive") {
    backend::HashEmbedding embedder;
    auto a = embedder.embed({"the cellar key never left the house"});
    auto b = embedder.embed({"the cellar key never left the house"});
    REQUIRE(a.size() == 1);
    CHECK(backend::cosine(a[0], b[0]) == Catch::Approx(1.0));

    double norm = 0.0;
    for (double x : a[0].values) norm += x * x;
    CHECK(norm == Catch::Approx(1.0).epsilon(1e-9));

    auto c = embedder.embed({"a completely different sentence about harbors"});
    CHECK(backend::cosine(a[0], c[0]) < 0.9);
}
