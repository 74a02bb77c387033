#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "saba/core/types.hpp"
#include "saba/util.hpp"

namespace saba::eval {

struct ReliabilityReport {
    long total_hypotheses = 0;
    long unsupported_count = 0;
    long flagged_count = 0;
    long corrected_count = 0;  // flagged hypotheses later superseded

    // Percentages; absent when the denominator is zero rather than 0.0.
    std::optional<double> unsupported_rate;
    std::optional<double> flagged_rate;
    std::optional<double> correction_within_flagged_rate;
};

namespace detail {

struct ReliabilityCounts {
    long total = 0;
    long unsupported = 0;
    long flagged = 0;
    long corrected = 0;
};

// Supersedes links only resolve within one run's trace, so counting happens
// per trace and aggregates by summation.
inline ReliabilityCounts count_trace(const std::vector<TraceRecord>& records) {
    ReliabilityCounts c;
    std::set<std::string> flagged_ids;
    std::set<std::string> superseded_ids;
    for (const auto& rec : records) {
        for (const auto& h : rec.hypotheses_added) {
            ++c.total;
            if (h.status == SupportStatus::Unsupported) ++c.unsupported;
            if (h.status == SupportStatus::Flagged) {
                ++c.flagged;
                flagged_ids.insert(h.id);
            }
            if (h.supersedes) superseded_ids.insert(*h.supersedes);
        }
    }
    for (const auto& id : flagged_ids)
        if (superseded_ids.count(id)) ++c.corrected;
    return c;
}

} // namespace detail

inline ReliabilityReport reliability_audit(const std::vector<RunResult>& traces) {
    detail::ReliabilityCounts total;
    for (const auto& t : traces) {
        auto c = detail::count_trace(t.trace);
        total.total += c.total;
        total.unsupported += c.unsupported;
        total.flagged += c.flagged;
        total.corrected += c.corrected;
    }

    ReliabilityReport report;
    report.total_hypotheses = total.total;
    report.unsupported_count = total.unsupported;
    report.flagged_count = total.flagged;
    report.corrected_count = total.corrected;
    if (total.total > 0) {
        report.unsupported_rate = 100.0 * static_cast<double>(total.unsupported) /
                                  static_cast<double>(total.total);
        report.flagged_rate =
            100.0 * static_cast<double>(total.flagged) / static_cast<double>(total.total);
    }
    if (total.flagged > 0)
        report.correction_within_flagged_rate =
            100.0 * static_cast<double>(total.corrected) / static_cast<double>(total.flagged);
    return report;
}

inline std::string format_rate(const std::optional<double>& rate) {
    if (!rate) return "-";
    return util::format_pct(*rate);
}

} // namespace saba::eval
