#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "linc/harness.hpp"

namespace linc {

inline constexpr const char* kToolVersion = "0.1.0";

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const GridReport& report);

/// Flat table, one row per cell:
/// experiment,method,seed,k,template,proportion,permutation,n_validation,
/// accuracy,mean_entropy,raw_mean_entropy,ece,error
std::string report_csv(const EvalReport& report);

enum class ReportFormat { json, csv };

/// Writes {dir}/report.json or {dir}/report.csv. The JSON form also brings
/// {dir}/entropy_{method}_{seed}{tag}.csv per cell and {dir}/run_info.json.
/// Returns the paths written.
std::vector<std::filesystem::path> emit_report(const EvalReport& report,
                                               const std::filesystem::path& dir,
                                               ReportFormat format);

std::filesystem::path emit_grid_report(const GridReport& report, const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& content);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace linc
