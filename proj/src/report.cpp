#include "plapf/report.hpp"

#include <cstdio>
#include <fstream>

#include "plapf/errors.hpp"

namespace plapf {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string report_csv_string(const RunReport& report) {
  std::string out;
  for (std::size_t c = 0; c < report.columns.size(); ++c) {
    if (c) out += ',';
    out += report.columns[c];
  }
  out += '\n';
  for (const auto& row : report.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += row[c];
    }
    out += '\n';
  }
  return out;
}

void write_report(const RunReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / (report.task + "_report.csv"), std::ios::binary);
    if (!out) throw Error((out_dir / (report.task + "_report.csv")).string() +
                          ": cannot open for writing");
    out << report_csv_string(report);
  }
  {
    std::ofstream out(out_dir / (report.task + "_summary.json"));
    out << report.summary.dump(2) << '\n';
  }
}

}  // namespace plapf
