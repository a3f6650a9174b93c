#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "emlang/config.hpp"
#include "emlang/report.hpp"
#include "emlang/run.hpp"
#include "emlang/sweep.hpp"

namespace {

using namespace emlang;

struct CommonArgs {
  std::string config_path;
  std::string profile = "desk";
  std::string out_dir = "out";
  std::int64_t seed = -1;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_jobs) {
  cmd->add_option("--config", args.config_path, "config file overlay");
  cmd->add_option("--profile", args.profile, "base profile (desk|paper)")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "override the run seed");
  if (with_jobs)
    cmd->add_option("--jobs", args.jobs, "parallel runs")->check(CLI::PositiveNumber);
}

FullConfig assemble_config(const CommonArgs& args) {
  FullConfig config = profile_by_name(args.profile);
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw io_error("cannot open config file " + args.config_path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    config = overlay_config_text(config, buffer.str());
  }
  if (args.seed >= 0)
    config.run.train.seed = static_cast<std::uint64_t>(args.seed);
  return config;
}

void print_metrics(const MetricsReport& m) {
  std::cout << "precision = " << m.precision << " (se " << m.precision_se
            << ", n " << m.n_precision << ")\n";
  std::cout << "recall = " << m.recall << " nats/string (M " << m.m_recall
            << ", K " << m.k_recall << ")\n";
  std::cout << "accuracy train/val/test = " << m.acc_train << " / " << m.acc_val
            << " / " << m.acc_test << "\n";
  std::cout << "residual entropy = " << m.residual_entropy << "\n";
}

int run_gen_data(const CommonArgs& args) {
  const FullConfig config = assemble_config(args);
  const SplitSpec split = resolve_split(config.run.grammar, config.run.split);
  Rng rng = derive_rng(split.seed, {0x05});
  const DatasetBundle bundle = build_splits(config.run.grammar, split, rng);
  const auto dir = std::filesystem::path(args.out_dir) / "data";
  save_bundle(dir, bundle);
  std::cout << "wrote " << bundle.train.size() << "/" << bundle.val.size()
            << "/" << bundle.test.size() << " train/val/test strings to " << dir
            << "\n";
  return 0;
}

int run_train(const CommonArgs& args) {
  const FullConfig config = assemble_config(args);
  const TrainResult result = train_run(config.run, args.out_dir);
  if (result.skipped_existing) {
    std::cout << "run " << config_digest(config.run)
              << " already complete, skipped\n";
  } else {
    std::cout << "trained " << config_digest(config.run) << " in "
              << result.wall_seconds << " s\n";
  }
  std::cout << "records: " << result.records_path << "\n";
  std::cout << "checkpoint: " << result.checkpoint_path << "\n";
  if (!result.records.empty() && result.records.back().metrics)
    print_metrics(*result.records.back().metrics);
  return 0;
}

int run_eval(const CommonArgs& args, const std::string& checkpoint) {
  const FullConfig config = assemble_config(args);
  const MetricsReport metrics = evaluate_checkpoint(config.run, checkpoint);
  print_metrics(metrics);
  return 0;
}

int run_sweep(const CommonArgs& args, bool dry_run) {
  const FullConfig config = assemble_config(args);
  const SweepResult result =
      sweep(config.run, config.sweep, args.out_dir, args.jobs, dry_run);
  std::cout << sweep_plan_text(result);
  return 0;
}

int run_report(const CommonArgs& args, const std::string& records_dir) {
  const std::filesystem::path records =
      records_dir.empty() ? std::filesystem::path(args.out_dir) / "records"
                          : std::filesystem::path(records_dir);
  const ReportSummary summary =
      write_report_from_dir(records, std::filesystem::path(args.out_dir) / "report");
  std::cout << "report over " << summary.runs << " completed runs ("
            << summary.failed_runs << " failed) -> " << summary.files.size()
            << " files\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-bottleneck emergent-language laboratory"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, sweep_args, report_args;
  std::string checkpoint_path, records_dir;
  bool dry_run = false;

  CLI::App* gen = app.add_subcommand("gen-data", "build and save dataset splits");
  add_common(gen, gen_args, false);
  CLI::App* train = app.add_subcommand("train", "train one configuration");
  add_common(train, train_args, false);
  CLI::App* eval = app.add_subcommand("eval", "evaluate a frozen checkpoint");
  add_common(eval, eval_args, false);
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "run the (bits x alpha x seeds) grid");
  add_common(sweep_cmd, sweep_args, true);
  sweep_cmd->add_flag("--dry-run", dry_run, "validate the grid, run nothing");
  CLI::App* report_cmd =
      app.add_subcommand("report", "emit CSV/SVG views of run records");
  add_common(report_cmd, report_args, false);
  report_cmd->add_option("--records", records_dir,
                         "records directory (default <out>/records)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen_args);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args, checkpoint_path);
    if (sweep_cmd->parsed()) return run_sweep(sweep_args, dry_run);
    if (report_cmd->parsed()) return run_report(report_args, records_dir);
    return 1;
  } catch (const emlang::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const emlang::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
