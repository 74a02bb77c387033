#include <catch2/catch_amalgamated.hpp>

#include "support/support.hpp"

#include "saba/eval/reliability.hpp"

using namespace saba;
using namespace saba::eval;

namespace {

HypothesisItem hyp(int round, int k, SupportStatus status,
                   std::optional<std::string> supersedes = std::nullopt) {
    HypothesisItem h;
    h.id = ids::hypothesis(round, k);
    h.query_id = ids::query(round, k);
    h.statement = "hypothesis " + h.id;
    h.status = status;
    h.supersedes = std::move(supersedes);
    h.round = round;
    return h;
}

// One synthetic run whose rounds carry exactly the given hypotheses.
RunResult run_with(std::vector<std::vector<HypothesisItem>> rounds) {
    RunResult r;
    r.trace.emplace_back();  // round-0 record with no hypotheses
    int round = 1;
    for (auto& hs : rounds) {
        TraceRecord rec;
        rec.round = round++;
        rec.hypotheses_added = std::move(hs);
        r.trace.push_back(std::move(rec));
    }
    return r;
}

} // namespace

TEST_CASE("audit sums per-trace counts across runs") {
    auto run_a = run_with({{hyp(1, 1, SupportStatus::Flagged),
                            hyp(1, 2, SupportStatus::Unsupported)},
                           {hyp(2, 1, SupportStatus::Supported, std::string("hyp-1-1"))}});
    auto run_b = run_with({{hyp(1, 1, SupportStatus::Supported),
                            hyp(1, 2, SupportStatus::Unsupported)}});

    auto report = reliability_audit({run_a, run_b});
    CHECK(report.total_hypotheses == 5);
    CHECK(report.unsupported_count == 2);
    CHECK(report.flagged_count == 1);
    CHECK(report.corrected_count == 1);
    CHECK(report.unsupported_rate.value() == Catch::Approx(40.0));
    CHECK(report.flagged_rate.value() == Catch::Approx(20.0));
    CHECK(report.correction_within_flagged_rate.value() == Catch::Approx(100.0));
}

TEST_CASE("rates reproduce a known distribution to one decimal") {
    // 100 hypotheses: 22 unsupported, 27 flagged, 16 of the flagged corrected.
    std::vector<RunResult> runs;
    std::vector<HypothesisItem> first;
    std::vector<HypothesisItem> second;
    int k = 1;
    for (int i = 0; i < 22; ++i) first.push_back(hyp(1, k++, SupportStatus::Unsupported));
    for (int i = 0; i < 27; ++i) first.push_back(hyp(1, k++, SupportStatus::Flagged));
    for (int i = 0; i < 35; ++i) first.push_back(hyp(1, k++, SupportStatus::Supported));
    // 16 corrections in round 2 (each also Supported, adding to the total).
    for (int i = 0; i < 16; ++i)
        second.push_back(hyp(2, i + 1, SupportStatus::Supported,
                             ids::hypothesis(1, 23 + i)));
    runs.push_back(run_with({std::move(first), std::move(second)}));

    auto report = reliability_audit(runs);
    CHECK(report.total_hypotheses == 100);
    CHECK(report.unsupported_rate.value() == Catch::Approx(22.0));
    CHECK(report.flagged_rate.value() == Catch::Approx(27.0));
    CHECK(report.correction_within_flagged_rate.value() == Catch::Approx(59.259).margin(0.001));
    CHECK(format_rate(report.correction_within_flagged_rate) == "59.3");
}

TEST_CASE("zero denominators report absent rates, not zeros") {
    auto empty = reliability_audit({});
    CHECK(empty.total_hypotheses == 0);
    CHECK(!empty.unsupported_rate.has_value());
    CHECK(!empty.flagged_rate.has_value());
    CHECK(!empty.correction_within_flagged_rate.has_value());
    CHECK(format_rate(empty.unsupported_rate) == "-");

    // Hypotheses but none flagged: the correction rate alone stays absent.
    auto no_flags = reliability_audit({run_with({{hyp(1, 1, SupportStatus::Supported)}})});
    CHECK(no_flags.unsupported_rate.value() == Catch::Approx(0.0));
    CHECK(!no_flags.correction_within_flagged_rate.has_value());
}

TEST_CASE("supersedes links do not leak across runs") {
    // Run A flags hyp-1-1; run B supersedes an id of the same name. The
    // correction must not count because the link lives in a different trace.
    auto run_a = run_with({{hyp(1, 1, SupportStatus::Flagged)}});
    auto run_b = run_with({{hyp(1, 1, SupportStatus::Supported)},
                           {hyp(2, 1, SupportStatus::Supported, std::string("hyp-1-1"))}});
    auto report = reliability_audit({run_a, run_b});
    CHECK(report.flagged_count == 1);
    CHECK(report.corrected_count == 0);

    // Inside one trace the same shape does count.
    auto run_c = run_with({{hyp(1, 1, SupportStatus::Flagged)},
                           {hyp(2, 1, SupportStatus::Supported, std::string("hyp-1-1"))}});
    CHECK(reliability_audit({run_c}).corrected_count == 1);
}

TEST_CASE("the depth-bound fixture audits as one corrected flag") {
    auto result = testsupport::run_fixture("harbor-complex", Variant::Full);
    auto report = reliability_audit({result});
    CHECK(report.total_hypotheses == 3);
    CHECK(report.unsupported_count == 1);
    CHECK(report.flagged_count == 1);
    CHECK(report.corrected_count == 1);
    CHECK(report.correction_within_flagged_rate.value() == Catch::Approx(100.0));
}
