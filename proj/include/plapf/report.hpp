#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace plapf {

/// Tabular experiment output. The CSV body is a pure function of
/// (config, seed); volatile data (elapsed time) lives in the JSON summary.
struct RunReport {
  std::string task;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  nlohmann::json summary;
  bool passed = true;
};

/// %.12g, stable across runs.
std::string format_number(double v);

std::string report_csv_string(const RunReport& report);

/// Writes <task>_report.csv and <task>_summary.json under out_dir.
void write_report(const RunReport& report, const std::filesystem::path& out_dir);

}  // namespace plapf
