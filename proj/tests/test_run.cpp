#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "emlang/run.hpp"

using namespace emlang;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// grammar(2,3), l = 4, 50 steps: finishes in well under a second.
RunConfig smoke_config() {
  RunConfig config;
  config.grammar = GrammarSpec(2, 3);
  config.model = ModelConfig{ModelFamily::D, 0.25, 4, true};
  config.train = TrainConfig{50, 8, 10, 3, 1, 0, -1.0};
  config.metrics.precision_samples = 200;
  config.metrics.recall_k = 1;
  return config;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("smoke run emits the expected record cadence") {
  const auto dir = fresh_dir("emlang_test_run_smoke");
  const RunConfig config = smoke_config();
  const TrainResult result = train_run(config, dir);
  // Records at steps 0, 10, 20, 30, 40, 50 = ceil(50/10) + 1.
  REQUIRE(result.records.size() == 6);
  CHECK(result.records.front().step == 0);
  CHECK(result.records.back().step == 50);
  CHECK(result.records.back().final_record);
  for (std::size_t i = 0; i + 1 < result.records.size(); ++i) {
    CHECK_FALSE(result.records[i].final_record);
    CHECK(result.records[i].step < result.records[i + 1].step);
    CHECK(result.records[i].metrics.has_value());
  }
  CHECK(std::filesystem::exists(result.records_path));
  CHECK(std::filesystem::exists(result.checkpoint_path));

  // Uneven cadence: 50 steps every 20 -> 0, 20, 40, 50.
  const auto dir2 = fresh_dir("emlang_test_run_smoke2");
  RunConfig uneven = smoke_config();
  uneven.train.eval_every = 20;
  CHECK(train_run(uneven, dir2).records.size() == 4);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("initial loss sits near the uniform-decoder baseline") {
  const auto dir = fresh_dir("emlang_test_run_loss0");
  const RunConfig config = smoke_config();
  const TrainResult result = train_run(config, dir);
  const RunRecord& first = result.records.front();
  const double expected =
      -(config.grammar.num_concepts *
            std::log(1.0 / config.grammar.alphabet_size()) -
        first.kl);
  CHECK(std::abs(first.loss - expected) < 0.1 * std::abs(expected));
  std::filesystem::remove_all(dir);
}

TEST_CASE("identical configs produce bitwise-identical artifacts") {
  const auto dir_a = fresh_dir("emlang_test_run_det_a");
  const auto dir_b = fresh_dir("emlang_test_run_det_b");
  const RunConfig config = smoke_config();
  const TrainResult a = train_run(config, dir_a);
  const TrainResult b = train_run(config, dir_b);
  CHECK(slurp(a.records_path) == slurp(b.records_path));
  CHECK(slurp(a.checkpoint_path) == slurp(b.checkpoint_path));
  CHECK(!slurp(a.checkpoint_path).empty());
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("completed runs are skipped on re-invocation") {
  const auto dir = fresh_dir("emlang_test_run_skip");
  const RunConfig config = smoke_config();
  const TrainResult first = train_run(config, dir);
  CHECK_FALSE(first.skipped_existing);
  const auto bytes = slurp(first.records_path);
  const TrainResult second = train_run(config, dir);
  CHECK(second.skipped_existing);
  CHECK(slurp(second.records_path) == bytes);
  CHECK(second.records.size() == first.records.size());
  std::filesystem::remove_all(dir);
}

TEST_CASE("early stopping marks the last record final") {
  const auto dir = fresh_dir("emlang_test_run_early");
  RunConfig config = smoke_config();
  config.train.early_stop_train_acc = 0.0;  // any accuracy stops immediately
  config.train.early_stop_train_acc = 1e-9;
  const TrainResult result = train_run(config, dir);
  CHECK(result.records.back().final_record);
  CHECK(result.records.back().step <= 50);
  const auto reloaded = load_records(result.records_path);
  CHECK(reloaded.back().final_record);
  std::filesystem::remove_all(dir);
}

TEST_CASE("NaN parameters abort with a failed diagnostic record") {
  const auto dir = fresh_dir("emlang_test_run_nan");
  RunConfig config = smoke_config();
  config.optim.lr = std::nan("");  // first adam step poisons the parameters
  CHECK_THROWS_AS(train_run(config, dir), numerical_error);
  const auto records = load_records(dir / "records" /
                                    (config_digest(config) + ".jsonl"));
  REQUIRE(!records.empty());
  CHECK(records.back().status == "failed");
  CHECK(records.back().final_record);
  std::filesystem::remove_all(dir);
}

TEST_CASE("record lines round trip through json") {
  RunRecord r;
  r.digest = "abc";
  r.family = "D";
  r.latent_bits = 6;
  r.alpha = 0.7;
  r.seed = 11;
  r.step = 40;
  r.loss = 1.25;
  r.elbo = -1.25;
  r.recon = -1.0;
  r.kl = 0.25;
  r.param_count = 1234;
  r.final_record = true;
  MetricsReport m;
  m.precision = 0.9;
  m.recall = -4.0;
  m.partition = {0, 1, 1, 0, 2, 2};
  r.metrics = m;
  const RunRecord back = record_from_json_line(record_to_json_line(r));
  CHECK(back.digest == r.digest);
  CHECK(back.step == r.step);
  CHECK(back.loss == r.loss);
  CHECK(back.metrics->precision == 0.9);
  CHECK(back.metrics->partition == m.partition);
  CHECK(back.final_record);
}

TEST_CASE("evaluate_checkpoint reproduces the recorded final metrics") {
  const auto dir = fresh_dir("emlang_test_run_eval");
  const RunConfig config = smoke_config();
  const TrainResult result = train_run(config, dir);
  const MetricsReport metrics =
      evaluate_checkpoint(config, result.checkpoint_path);
  // The eval stream is seeded by step, so only deterministic quantities are
  // compared exactly.
  CHECK(metrics.acc_train == result.records.back().metrics->acc_train);
  CHECK(metrics.acc_val == result.records.back().metrics->acc_val);
  CHECK(metrics.acc_test == result.records.back().metrics->acc_test);
  CHECK(metrics.residual_entropy ==
        result.records.back().metrics->residual_entropy);
  std::filesystem::remove_all(dir);
}
