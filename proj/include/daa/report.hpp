#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "daa/diagnostics.hpp"

namespace daa {

/// Analyses over a metric log. A missing fit or correlation means the
/// input was degenerate (too few points, constant series).
struct RunReport {
    std::vector<MetricRecord> records;
    std::optional<ScalingFit> likelihood_win;       // x = better_mean_llh, y = win_prob
    std::optional<Correlation> likelihood_length;  // better_mean_llh vs mean_output_tokens
};

/// Throws DegenerateInputError on an empty log.
RunReport build_report(const std::vector<MetricRecord>& records);

/// Tab-separated tables keyed by file name (curves.tsv, likelihood_win.tsv,
/// likelihood_length.tsv, heatmap.tsv, summary.tsv).
std::vector<std::pair<std::string, std::string>> render_report(const RunReport& report);

/// Writes render_report into `dir`, creating it.
void write_report(const RunReport& report, const std::filesystem::path& dir);

}  // namespace daa
