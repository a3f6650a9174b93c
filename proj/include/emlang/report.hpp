#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "emlang/run.hpp"

namespace emlang {

struct ReportSummary {
  std::vector<std::filesystem::path> files;
  int runs = 0;
  int failed_runs = 0;
};

// Pure function of the record files: emits per-metric (bits x params) grid
// CSVs (best/worst/mean/std over seeds), an efficacy table, per-cell
// histogram panels, best-over-seeds heatmaps, and the entropy-vs-overfitting
// scatter. Never mutates the records.
ReportSummary write_report(const std::vector<RunRecord>& records,
                           const std::filesystem::path& out_dir);

ReportSummary write_report_from_dir(const std::filesystem::path& records_dir,
                                    const std::filesystem::path& out_dir);

}  // namespace emlang
