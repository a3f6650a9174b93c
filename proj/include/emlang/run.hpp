#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emlang/config.hpp"
#include "emlang/metrics.hpp"
#include "emlang/model.hpp"

namespace emlang {

struct RunRecord {
  std::string digest;
  std::string family;
  int latent_bits = 0;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  long step = 0;
  std::string status = "ok";  // ok | failed
  double loss = 0.0;
  double elbo = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  std::int64_t param_count = 0;
  bool final_record = false;
  std::optional<MetricsReport> metrics;
};

std::string record_to_json_line(const RunRecord& record);
RunRecord record_from_json_line(const std::string& line);

void append_record(const std::filesystem::path& path, const RunRecord& record);
std::vector<RunRecord> load_records(const std::filesystem::path& path);
std::vector<RunRecord> load_records_dir(const std::filesystem::path& dir);

struct TrainResult {
  std::vector<RunRecord> records;
  std::filesystem::path records_path;
  std::filesystem::path checkpoint_path;
  double wall_seconds = 0.0;  // reported in summaries, never persisted
  bool skipped_existing = false;
};

// Trains one configuration to completion, appending one JSON record per eval
// point to <out>/records/<digest>.jsonl and writing the checkpoint to
// <out>/checkpoints/<digest>.ckpt. Fully deterministic given the config; if a
// completed record file already exists the run is skipped and reloaded.
TrainResult train_run(const RunConfig& config,
                      const std::filesystem::path& out_dir);

// Builds the model + dataset for a config and evaluates metrics on a frozen
// checkpoint (the `eval` subcommand).
MetricsReport evaluate_checkpoint(const RunConfig& config,
                                  const std::filesystem::path& checkpoint);

// Metric evaluation shared by training and eval; seeded independently of the
// training stream.
MetricsReport evaluate_metrics(const RunConfig& config, VaeModel& model,
                               const DatasetBundle& bundle, long step);

}  // namespace emlang
