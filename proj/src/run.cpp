#include "emlang/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "emlang/ad/adam.hpp"
#include "emlang/checkpoint.hpp"

namespace emlang {

namespace {

using nlohmann::json;

constexpr std::uint64_t kInitStream = 0x01;
constexpr std::uint64_t kTrainStream = 0x02;
constexpr std::uint64_t kEvalStream = 0x03;
constexpr std::uint64_t kProbeStream = 0x04;
constexpr std::uint64_t kDataStream = 0x05;

// NaN serializes as JSON null; map it back on read.
double get_double(const json& j, const char* key) {
  const auto& v = j.at(key);
  return v.is_null() ? std::nan("") : v.get<double>();
}

json metrics_to_json(const MetricsReport& m) {
  return json{{"precision", m.precision},
              {"precision_se", m.precision_se},
              {"recall", m.recall},
              {"acc_train", m.acc_train},
              {"acc_val", m.acc_val},
              {"acc_test", m.acc_test},
              {"residual_entropy", m.residual_entropy},
              {"partition", m.partition},
              {"n_precision", m.n_precision},
              {"m_recall", m.m_recall},
              {"k_recall", m.k_recall}};
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport m;
  m.precision = get_double(j, "precision");
  m.precision_se = get_double(j, "precision_se");
  m.recall = get_double(j, "recall");
  m.acc_train = get_double(j, "acc_train");
  m.acc_val = get_double(j, "acc_val");
  m.acc_test = get_double(j, "acc_test");
  m.residual_entropy = get_double(j, "residual_entropy");
  m.partition = j.at("partition").get<std::vector<int>>();
  m.n_precision = j.at("n_precision").get<long>();
  m.m_recall = j.at("m_recall").get<long>();
  m.k_recall = j.at("k_recall").get<int>();
  return m;
}

const std::vector<ConceptString>& split_by_name(const DatasetBundle& bundle,
                                                const std::string& name) {
  if (name == "train") return bundle.train;
  if (name == "val") return bundle.val;
  if (name == "test") return bundle.test;
  throw std::invalid_argument("unknown split '" + name +
                              "' (expected train, val, or test)");
}

PartitionStrategy pick_strategy(const MetricsConfig& cfg, int num_concepts,
                                int latent_bits) {
  if (cfg.entropy_strategy == "exhaustive") return PartitionStrategy::exhaustive;
  if (cfg.entropy_strategy == "greedy") return PartitionStrategy::greedy;
  if (cfg.entropy_strategy != "auto")
    throw std::invalid_argument("unknown entropy_strategy '" +
                                cfg.entropy_strategy + "'");
  double assignments = 1.0;
  for (int t = 0; t < latent_bits; ++t) assignments *= num_concepts;
  return (latent_bits <= 20 && assignments <= 1e7)
             ? PartitionStrategy::exhaustive
             : PartitionStrategy::greedy;
}

}  // namespace

std::string record_to_json_line(const RunRecord& r) {
  json j{{"digest", r.digest},
         {"family", r.family},
         {"latent_bits", r.latent_bits},
         {"alpha", r.alpha},
         {"seed", r.seed},
         {"step", r.step},
         {"status", r.status},
         {"loss", r.loss},
         {"elbo", r.elbo},
         {"recon", r.recon},
         {"kl", r.kl},
         {"param_count", r.param_count},
         {"final", r.final_record}};
  if (r.metrics) j["metrics"] = metrics_to_json(*r.metrics);
  return j.dump();
}

RunRecord record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  RunRecord r;
  r.digest = j.at("digest").get<std::string>();
  r.family = j.at("family").get<std::string>();
  r.latent_bits = j.at("latent_bits").get<int>();
  r.alpha = get_double(j, "alpha");
  r.seed = j.at("seed").get<std::uint64_t>();
  r.step = j.at("step").get<long>();
  r.status = j.at("status").get<std::string>();
  r.loss = get_double(j, "loss");
  r.elbo = get_double(j, "elbo");
  r.recon = get_double(j, "recon");
  r.kl = get_double(j, "kl");
  r.param_count = j.at("param_count").get<std::int64_t>();
  r.final_record = j.at("final").get<bool>();
  if (j.contains("metrics")) r.metrics = metrics_from_json(j.at("metrics"));
  return r;
}

void append_record(const std::filesystem::path& path, const RunRecord& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw io_error("cannot append to record file " + path.string());
  out << record_to_json_line(record) << "\n";
  if (!out) throw io_error("write failed for record file " + path.string());
}

std::vector<RunRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open record file " + path.string());
  std::vector<RunRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(record_from_json_line(line));
  }
  return records;
}

std::vector<RunRecord> load_records_dir(const std::filesystem::path& dir) {
  std::vector<RunRecord> all;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files)
    for (auto& r : load_records(f)) all.push_back(std::move(r));
  return all;
}

MetricsReport evaluate_metrics(const RunConfig& config, VaeModel& model,
                               const DatasetBundle& bundle, long step) {
  Rng rng = derive_rng(config.train.seed,
                       {kEvalStream, static_cast<std::uint64_t>(step)});
  MetricsReport m;
  m.acc_train = accuracy(model.speaker, model.listener, config.grammar,
                         bundle.train);
  m.acc_val = accuracy(model.speaker, model.listener, config.grammar, bundle.val);
  m.acc_test =
      accuracy(model.speaker, model.listener, config.grammar, bundle.test);

  const PrecisionEstimate precision =
      precision_mc(model.prior, model.listener, config.grammar,
                   config.metrics.precision_samples, rng);
  m.precision = precision.value;
  m.precision_se = precision.std_error;
  m.n_precision = precision.n_samples;

  const auto& recall_strings = split_by_name(bundle, config.metrics.recall_split);
  m.k_recall = config.metrics.recall_k;
  m.m_recall = static_cast<long>(recall_strings.size());
  m.recall = recall_mc(model.speaker, model.listener, model.prior,
                       config.grammar, recall_strings, config.metrics.recall_k,
                       rng);

  const auto& entropy_strings =
      split_by_name(bundle, config.metrics.entropy_split);
  const ResidualEntropyResult entropy = residual_entropy(
      model.speaker, config.grammar, entropy_strings,
      pick_strategy(config.metrics, config.grammar.num_concepts,
                    config.model.latent_bits));
  m.residual_entropy = entropy.value;
  m.partition = entropy.bit_to_concept;
  return m;
}

TrainResult train_run(const RunConfig& config,
                      const std::filesystem::path& out_dir) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::string digest = config_digest(config);
  const auto records_dir = out_dir / "records";
  const auto ckpt_dir = out_dir / "checkpoints";
  std::filesystem::create_directories(records_dir);
  std::filesystem::create_directories(ckpt_dir);

  TrainResult result;
  result.records_path = records_dir / (digest + ".jsonl");
  result.checkpoint_path = ckpt_dir / (digest + ".ckpt");

  if (std::filesystem::exists(result.records_path)) {
    auto existing = load_records(result.records_path);
    if (!existing.empty() && existing.back().final_record) {
      result.records = std::move(existing);
      result.skipped_existing = true;
      return result;
    }
    std::filesystem::remove(result.records_path);  // incomplete leftover
  }

  const SplitSpec split = resolve_split(config.grammar, config.split);
  Rng data_rng = derive_rng(split.seed, {kDataStream});
  const DatasetBundle bundle = build_splits(config.grammar, split, data_rng);

  VaeModel model(config.grammar, config.model);
  Rng init_rng = derive_rng(config.train.seed, {kInitStream});
  model.init_params(init_rng);
  auto params = model.params();
  ad::AdamState adam(params, config.optim);
  Rng train_rng = derive_rng(config.train.seed, {kTrainStream});

  const std::int64_t n_params = param_count(config.model, config.grammar).total;

  RunRecord base;
  base.digest = digest;
  base.family = to_string(config.model.family);
  base.latent_bits = config.model.latent_bits;
  base.alpha = config.model.alpha;
  base.seed = config.train.seed;
  base.param_count = n_params;

  auto emit = [&](long step, bool final_record) {
    RunRecord r = base;
    r.step = step;
    r.final_record = final_record;
    // The recorded loss is a probe forward over a fixed train prefix with its
    // own stream, so records stay independent of the training draws.
    ad::Tape tape;
    Rng probe_rng = derive_rng(config.train.seed,
                               {kProbeStream, static_cast<std::uint64_t>(step)});
    const std::size_t n = std::min<std::size_t>(
        bundle.train.size(), static_cast<std::size_t>(config.train.batch));
    const std::vector<ConceptString> probe(bundle.train.begin(),
                                           bundle.train.begin() + n);
    const ElboResult elbo = elbo_loss(tape, model, probe, probe_rng);
    r.loss = tape.scalar(elbo.loss);
    r.elbo = elbo.elbo;
    r.recon = elbo.recon;
    r.kl = elbo.kl;
    tape.reset();
    r.metrics = evaluate_metrics(config, model, bundle, step);
    append_record(result.records_path, r);
    save_checkpoint(result.checkpoint_path, digest,
                    {params.begin(), params.end()});
    result.records.push_back(std::move(r));
    return result.records.back().metrics->acc_train;
  };

  try {
    emit(0, config.train.steps == 0);
    ad::Tape tape;
    for (long step = 1; step <= config.train.steps; ++step) {
      std::vector<ConceptString> batch;
      batch.reserve(config.train.batch);
      for (int b = 0; b < config.train.batch; ++b)
        batch.push_back(bundle.train[train_rng.below(bundle.train.size())]);

      ad::zero_grads(params);
      const double kl_weight =
          config.train.kl_warmup_steps > 0
              ? std::min(1.0, static_cast<double>(step) /
                                  static_cast<double>(config.train.kl_warmup_steps))
              : 1.0;
      const ElboResult elbo =
          elbo_loss(tape, model, batch, train_rng, LatentMode::hard_st,
                    config.train.recon_samples, kl_weight);
      tape.backward(elbo.loss);
      adam.step();
      // Keep the learned temperature inside its live range.
      model.speaker.tau.value(0, 0) = std::clamp(
          model.speaker.tau.value(0, 0), kTauFloor, kTauCeiling);

      const bool last = step == config.train.steps;
      if (last || step % config.train.eval_every == 0) {
        const double acc_train = emit(step, last);
        if (!last && config.train.early_stop_train_acc > 0.0 &&
            acc_train >= config.train.early_stop_train_acc) {
          result.records.back().final_record = true;
          // Rewrite the tail record with the final flag set.
          auto records = result.records;
          std::filesystem::remove(result.records_path);
          for (const auto& r : records) append_record(result.records_path, r);
          break;
        }
      }
    }
    if (!result.records.back().final_record) {
      result.records.back().final_record = true;
      auto records = result.records;
      std::filesystem::remove(result.records_path);
      for (const auto& r : records) append_record(result.records_path, r);
    }
  } catch (const numerical_error& err) {
    RunRecord failed = base;
    failed.step = result.records.empty() ? 0 : result.records.back().step;
    failed.status = "failed";
    failed.final_record = true;
    failed.loss = std::nan("");
    failed.elbo = std::nan("");
    failed.recon = std::nan("");
    failed.kl = std::nan("");
    append_record(result.records_path, failed);
    throw;
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return result;
}

MetricsReport evaluate_checkpoint(const RunConfig& config,
                                  const std::filesystem::path& checkpoint) {
  const SplitSpec split = resolve_split(config.grammar, config.split);
  Rng data_rng = derive_rng(split.seed, {kDataStream});
  const DatasetBundle bundle = build_splits(config.grammar, split, data_rng);

  VaeModel model(config.grammar, config.model);
  auto params = model.params();
  load_checkpoint(checkpoint, config_digest(config), params);
  return evaluate_metrics(config, model, bundle, /*step=*/-1);
}

}  // namespace emlang
