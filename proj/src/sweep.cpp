#include "emlang/sweep.hpp"

#include <atomic>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace emlang {

SweepResult sweep(const RunConfig& base, const SweepGrid& grid,
                  const std::filesystem::path& out_dir, int jobs,
                  bool dry_run) {
  if (grid.bits.empty() || grid.alphas.empty() || grid.seeds.empty())
    throw std::invalid_argument("sweep: grid must list bits, alphas, and seeds");
  if (jobs < 1) throw std::invalid_argument("sweep: jobs must be >= 1");

  SweepResult result;
  std::set<std::string> seen;
  for (int bits : grid.bits) {
    for (double alpha : grid.alphas) {
      for (std::uint64_t seed : grid.seeds) {
        SweepCell cell;
        cell.config = base;
        cell.config.model.latent_bits = bits;
        cell.config.model.alpha = alpha;
        cell.config.train.seed = seed;
        cell.digest = config_digest(cell.config);
        cell.param_count =
            param_count(cell.config.model, cell.config.grammar).total;
        if (!seen.insert(cell.digest).second) {
          cell.status = "duplicate";
          ++result.duplicates;
        } else {
          cell.status = "planned";
        }
        result.cells.push_back(std::move(cell));
      }
    }
  }

  if (dry_run) {
    // Validate what a run would build, without building it.
    for (SweepCell& cell : result.cells) {
      if (cell.status != "planned") continue;
      resolve_dims(cell.config.model.family, cell.config.model.alpha);
      const SplitSpec split =
          resolve_split(cell.config.grammar, cell.config.split);
      const SplitCounts counts = split_counts(cell.config.grammar, split);
      if (split.n_train > counts.candidates_train ||
          split.n_val > counts.candidates_val ||
          split.n_test > counts.candidates_test)
        throw std::invalid_argument("sweep: infeasible split sizes for digest " +
                                    cell.digest);
      if (cell.config.model.latent_bits < 1 || cell.config.train.steps < 1)
        throw std::invalid_argument("sweep: invalid cell config for digest " +
                                    cell.digest);
    }
    return result;
  }

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= result.cells.size()) return;
      SweepCell& cell = result.cells[i];
      if (cell.status == "duplicate") continue;
      try {
        const TrainResult run = train_run(cell.config, out_dir);
        std::lock_guard<std::mutex> lock(mu);
        if (run.skipped_existing) {
          cell.status = "skipped";
          ++result.skipped;
        } else {
          cell.status = "ok";
          ++result.executed;
        }
      } catch (const numerical_error&) {
        std::lock_guard<std::mutex> lock(mu);
        cell.status = "failed";
        ++result.failed;
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return result;
}

std::string sweep_plan_text(const SweepResult& result) {
  std::ostringstream out;
  for (const SweepCell& cell : result.cells) {
    out << cell.digest << "  bits=" << cell.config.model.latent_bits
        << " alpha=" << cell.config.model.alpha
        << " seed=" << cell.config.train.seed
        << " params=" << cell.param_count << " status=" << cell.status << "\n";
  }
  out << "cells=" << result.cells.size() << " executed=" << result.executed
      << " skipped=" << result.skipped << " failed=" << result.failed
      << " duplicates=" << result.duplicates << "\n";
  return out.str();
}

}  // namespace emlang
