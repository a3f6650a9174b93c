#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "emlang/config.hpp"
#include "emlang/run.hpp"

namespace emlang {

struct SweepCell {
  RunConfig config;
  std::string digest;
  std::string status;  // planned | ok | skipped | failed | duplicate
  std::int64_t param_count = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  int executed = 0;
  int skipped = 0;
  int failed = 0;
  int duplicates = 0;
};

// Runs every (bits, alpha, seed) combination of the grid over the base
// config. Cells run in isolation, optionally across `jobs` threads; a failed
// cell is recorded and the sweep continues. Completed digests are skipped,
// so re-invoking a finished sweep performs zero new runs. With dry_run the
// grid is only validated (dims, parameter counts, split feasibility) and
// nothing executes.
SweepResult sweep(const RunConfig& base, const SweepGrid& grid,
                  const std::filesystem::path& out_dir, int jobs,
                  bool dry_run);

std::string sweep_plan_text(const SweepResult& result);

}  // namespace emlang
