#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emlang/ad/adam.hpp"
#include "emlang/datasets.hpp"
#include "emlang/grammar.hpp"
#include "emlang/model_config.hpp"

namespace emlang {

// Split configuration before resolution; -1 means "auto" (values drawn from
// data_seed, sizes from the candidate counts).
struct SplitConfig {
  int pos1 = 0;
  int pos2 = 1;
  int val_val1 = -1;
  int val_val2 = -1;
  int test_val1 = -1;
  int test_val2 = -1;
  std::int64_t n_train = -1;
  std::int64_t n_val = -1;
  std::int64_t n_test = -1;
  std::uint64_t data_seed = 1;
};

struct TrainConfig {
  long steps = 20000;
  int batch = 64;
  long eval_every = 1000;
  std::uint64_t seed = 1;
  // Latent draws averaged in the reconstruction term.
  int recon_samples = 1;
  // Linear KL-weight ramp 0 -> 1 over this many leading steps (0 = off).
  long kl_warmup_steps = 0;
  // When positive, stop once train accuracy reaches this at an eval point.
  double early_stop_train_acc = -1.0;
};

struct MetricsConfig {
  long precision_samples = 10000;
  int recall_k = 1;
  std::string recall_split = "test";  // train|val|test
  std::string entropy_split = "test";
  std::string entropy_strategy = "auto";  // auto|exhaustive|greedy
};

struct RunConfig {
  GrammarSpec grammar{3, 4};
  SplitConfig split;
  ModelConfig model;
  ad::AdamConfig optim;
  TrainConfig train;
  MetricsConfig metrics;
};

struct SweepGrid {
  std::vector<int> bits;
  std::vector<double> alphas;
  std::vector<std::uint64_t> seeds;
};

struct FullConfig {
  std::string profile = "desk";
  RunConfig run;
  SweepGrid sweep;
};

FullConfig desk_profile();
FullConfig paper_profile();
FullConfig profile_by_name(const std::string& name);

// Fills in auto values (held-out pair values from data_seed, sizes from the
// candidate counts) and validates feasibility.
SplitSpec resolve_split(const GrammarSpec& grammar, const SplitConfig& split);

// Canonical flat key/value text with sections; identical configs serialize to
// identical bytes, so the digest is stable.
std::string to_config_text(const FullConfig& config);
FullConfig parse_config_text(const std::string& text);
FullConfig load_config_file(const std::filesystem::path& path);
void save_config_file(const std::filesystem::path& path,
                      const FullConfig& config);

// Overlays every key present in `text` onto `base`.
FullConfig overlay_config_text(const FullConfig& base, const std::string& text);

// FNV-1a over the canonical serialization of the run section (the sweep grid
// and profile name do not identify a cell).
std::string config_digest(const RunConfig& config);

}  // namespace emlang
