#pragma once

#include "dmldeep/eval.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace dmldeep {

std::string report_csv(const BenchmarkReport& r);
// Rows r2(Y, l_hat), r2(D, m_hat), theta_hat; one column per model in roster order.
std::string report_markdown(const BenchmarkReport& r);

std::string trace_csv(const EpochTrace& t);
// Line chart of theta_hat per epoch over its CI band, with an optional dashed reference level.
std::string trace_svg(const EpochTrace& t, std::optional<double> reference = std::nullopt);

// Writes report.csv and report.md into `dir`.
void render_report(const BenchmarkReport& r, const std::filesystem::path& dir);
// Writes trace.csv and trace.svg into `dir`.
void render_trace(const EpochTrace& t, const std::filesystem::path& dir, std::optional<double> reference = std::nullopt);

}  // namespace dmldeep
