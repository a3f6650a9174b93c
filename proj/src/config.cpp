#include "emlang/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "emlang/rng.hpp"

namespace emlang {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string format_auto(std::int64_t v) {
  return v < 0 ? "auto" : std::to_string(v);
}

std::string format_auto_value(int v) {
  return v < 0 ? "auto" : std::to_string(v);
}

std::int64_t parse_auto(const std::string& s, const std::string& key) {
  if (s == "auto") return -1;
  try {
    return std::stoll(s);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad value '" + s + "' for " + key);
  }
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number '" + s + "' for " + key);
  }
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("config: bad boolean '" + s + "' for " + key);
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& s, Parse parse) {
  std::vector<T> out;
  std::istringstream stream(s);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

template <typename T, typename Format>
std::string format_list(const std::vector<T>& xs, Format format) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += format(xs[i]);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

void serialize_run(std::ostream& out, const RunConfig& c) {
  out << "[grammar]\n";
  out << "num_concepts = " << c.grammar.num_concepts << "\n";
  out << "values_per_concept = " << c.grammar.values_per_concept << "\n";
  out << "\n[split]\n";
  out << "pos1 = " << c.split.pos1 << "\n";
  out << "pos2 = " << c.split.pos2 << "\n";
  out << "val_val1 = " << format_auto_value(c.split.val_val1) << "\n";
  out << "val_val2 = " << format_auto_value(c.split.val_val2) << "\n";
  out << "test_val1 = " << format_auto_value(c.split.test_val1) << "\n";
  out << "test_val2 = " << format_auto_value(c.split.test_val2) << "\n";
  out << "n_train = " << format_auto(c.split.n_train) << "\n";
  out << "n_val = " << format_auto(c.split.n_val) << "\n";
  out << "n_test = " << format_auto(c.split.n_test) << "\n";
  out << "data_seed = " << c.split.data_seed << "\n";
  out << "\n[model]\n";
  out << "family = " << to_string(c.model.family) << "\n";
  out << "alpha = " << format_double(c.model.alpha) << "\n";
  out << "latent_bits = " << c.model.latent_bits << "\n";
  out << "speaker_input_every_step = "
      << (c.model.speaker_input_every_step ? "true" : "false") << "\n";
  out << "\n[optimizer]\n";
  out << "lr = " << format_double(c.optim.lr) << "\n";
  out << "weight_decay = " << format_double(c.optim.weight_decay) << "\n";
  out << "beta1 = " << format_double(c.optim.beta1) << "\n";
  out << "beta2 = " << format_double(c.optim.beta2) << "\n";
  out << "eps = " << format_double(c.optim.eps) << "\n";
  out << "decoupled_weight_decay = "
      << (c.optim.decoupled_weight_decay ? "true" : "false") << "\n";
  out << "\n[train]\n";
  out << "steps = " << c.train.steps << "\n";
  out << "batch = " << c.train.batch << "\n";
  out << "eval_every = " << c.train.eval_every << "\n";
  out << "seed = " << c.train.seed << "\n";
  out << "recon_samples = " << c.train.recon_samples << "\n";
  out << "kl_warmup_steps = " << c.train.kl_warmup_steps << "\n";
  out << "early_stop_train_acc = " << format_double(c.train.early_stop_train_acc)
      << "\n";
  out << "\n[metrics]\n";
  out << "precision_samples = " << c.metrics.precision_samples << "\n";
  out << "recall_k = " << c.metrics.recall_k << "\n";
  out << "recall_split = " << c.metrics.recall_split << "\n";
  out << "entropy_split = " << c.metrics.entropy_split << "\n";
  out << "entropy_strategy = " << c.metrics.entropy_strategy << "\n";
}

using Setter = std::function<void(FullConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    auto add = [&m](const std::string& key, Setter fn) { m[key] = std::move(fn); };

    add("grammar.num_concepts", [](FullConfig& c, const std::string& v) {
      c.run.grammar.num_concepts = static_cast<int>(parse_auto(v, "num_concepts"));
    });
    add("grammar.values_per_concept", [](FullConfig& c, const std::string& v) {
      c.run.grammar.values_per_concept =
          static_cast<int>(parse_auto(v, "values_per_concept"));
    });

    add("split.pos1", [](FullConfig& c, const std::string& v) {
      c.run.split.pos1 = static_cast<int>(parse_auto(v, "pos1"));
    });
    add("split.pos2", [](FullConfig& c, const std::string& v) {
      c.run.split.pos2 = static_cast<int>(parse_auto(v, "pos2"));
    });
    add("split.val_val1", [](FullConfig& c, const std::string& v) {
      c.run.split.val_val1 = static_cast<int>(parse_auto(v, "val_val1"));
    });
    add("split.val_val2", [](FullConfig& c, const std::string& v) {
      c.run.split.val_val2 = static_cast<int>(parse_auto(v, "val_val2"));
    });
    add("split.test_val1", [](FullConfig& c, const std::string& v) {
      c.run.split.test_val1 = static_cast<int>(parse_auto(v, "test_val1"));
    });
    add("split.test_val2", [](FullConfig& c, const std::string& v) {
      c.run.split.test_val2 = static_cast<int>(parse_auto(v, "test_val2"));
    });
    add("split.n_train", [](FullConfig& c, const std::string& v) {
      c.run.split.n_train = parse_auto(v, "n_train");
    });
    add("split.n_val", [](FullConfig& c, const std::string& v) {
      c.run.split.n_val = parse_auto(v, "n_val");
    });
    add("split.n_test", [](FullConfig& c, const std::string& v) {
      c.run.split.n_test = parse_auto(v, "n_test");
    });
    add("split.data_seed", [](FullConfig& c, const std::string& v) {
      c.run.split.data_seed = static_cast<std::uint64_t>(parse_auto(v, "data_seed"));
    });

    add("model.family", [](FullConfig& c, const std::string& v) {
      c.run.model.family = model_family_from_string(v);
    });
    add("model.alpha", [](FullConfig& c, const std::string& v) {
      c.run.model.alpha = parse_double(v, "alpha");
    });
    add("model.latent_bits", [](FullConfig& c, const std::string& v) {
      c.run.model.latent_bits = static_cast<int>(parse_auto(v, "latent_bits"));
    });
    add("model.speaker_input_every_step", [](FullConfig& c, const std::string& v) {
      c.run.model.speaker_input_every_step =
          parse_bool(v, "speaker_input_every_step");
    });

    add("optimizer.lr", [](FullConfig& c, const std::string& v) {
      c.run.optim.lr = parse_double(v, "lr");
    });
    add("optimizer.weight_decay", [](FullConfig& c, const std::string& v) {
      c.run.optim.weight_decay = parse_double(v, "weight_decay");
    });
    add("optimizer.beta1", [](FullConfig& c, const std::string& v) {
      c.run.optim.beta1 = parse_double(v, "beta1");
    });
    add("optimizer.beta2", [](FullConfig& c, const std::string& v) {
      c.run.optim.beta2 = parse_double(v, "beta2");
    });
    add("optimizer.eps", [](FullConfig& c, const std::string& v) {
      c.run.optim.eps = parse_double(v, "eps");
    });
    add("optimizer.decoupled_weight_decay",
        [](FullConfig& c, const std::string& v) {
          c.run.optim.decoupled_weight_decay =
              parse_bool(v, "decoupled_weight_decay");
        });

    add("train.steps", [](FullConfig& c, const std::string& v) {
      c.run.train.steps = parse_auto(v, "steps");
    });
    add("train.batch", [](FullConfig& c, const std::string& v) {
      c.run.train.batch = static_cast<int>(parse_auto(v, "batch"));
    });
    add("train.eval_every", [](FullConfig& c, const std::string& v) {
      c.run.train.eval_every = parse_auto(v, "eval_every");
    });
    add("train.seed", [](FullConfig& c, const std::string& v) {
      c.run.train.seed = static_cast<std::uint64_t>(parse_auto(v, "seed"));
    });
    add("train.recon_samples", [](FullConfig& c, const std::string& v) {
      c.run.train.recon_samples = static_cast<int>(parse_auto(v, "recon_samples"));
    });
    add("train.kl_warmup_steps", [](FullConfig& c, const std::string& v) {
      c.run.train.kl_warmup_steps = parse_auto(v, "kl_warmup_steps");
    });
    add("train.early_stop_train_acc", [](FullConfig& c, const std::string& v) {
      c.run.train.early_stop_train_acc = parse_double(v, "early_stop_train_acc");
    });

    add("metrics.precision_samples", [](FullConfig& c, const std::string& v) {
      c.run.metrics.precision_samples = parse_auto(v, "precision_samples");
    });
    add("metrics.recall_k", [](FullConfig& c, const std::string& v) {
      c.run.metrics.recall_k = static_cast<int>(parse_auto(v, "recall_k"));
    });
    add("metrics.recall_split", [](FullConfig& c, const std::string& v) {
      c.run.metrics.recall_split = v;
    });
    add("metrics.entropy_split", [](FullConfig& c, const std::string& v) {
      c.run.metrics.entropy_split = v;
    });
    add("metrics.entropy_strategy", [](FullConfig& c, const std::string& v) {
      c.run.metrics.entropy_strategy = v;
    });

    add("sweep.bits", [](FullConfig& c, const std::string& v) {
      c.sweep.bits = parse_list<int>(v, [](const std::string& s) {
        return static_cast<int>(parse_auto(s, "sweep.bits"));
      });
    });
    add("sweep.alphas", [](FullConfig& c, const std::string& v) {
      c.sweep.alphas = parse_list<double>(v, [](const std::string& s) {
        return parse_double(s, "sweep.alphas");
      });
    });
    add("sweep.seeds", [](FullConfig& c, const std::string& v) {
      c.sweep.seeds = parse_list<std::uint64_t>(v, [](const std::string& s) {
        return static_cast<std::uint64_t>(parse_auto(s, "sweep.seeds"));
      });
    });
    return m;
  }();
  return table;
}

std::vector<std::pair<std::string, std::string>> tokenize(
    const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream stream(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: bad section header at line " +
                                    std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected 'key = value' at line " +
                                  std::to_string(line_no));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

FullConfig apply_entries(
    FullConfig base,
    const std::vector<std::pair<std::string, std::string>>& entries) {
  for (const auto& [key, value] : entries) {
    if (key == "profile") continue;  // consumed by the caller
    const auto it = setters().find(key);
    if (it == setters().end())
      throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second(base, value);
  }
  return base;
}

}  // namespace

FullConfig desk_profile() {
  FullConfig c;
  c.profile = "desk";
  c.run.grammar = GrammarSpec(3, 4);
  c.run.model = ModelConfig{ModelFamily::D, 1.0, 8, true};
  c.run.train = TrainConfig{20000, 64, 1000, 1, 1, 10000, -1.0};
  // The held-out-pair test split pins two concepts, which zeroes their
  // in-split entropy; the train split keeps all concepts informative.
  c.run.metrics.entropy_split = "train";
  c.sweep.bits = {4, 5, 6, 7, 8, 9, 10};
  c.sweep.alphas = {0.25, 0.4, 0.55, 0.7, 0.85, 1.0};
  c.sweep.seeds = {1, 2, 3, 4, 5};
  return c;
}

FullConfig paper_profile() {
  FullConfig c;
  c.profile = "paper";
  c.run.grammar = GrammarSpec(6, 10);
  c.run.model = ModelConfig{ModelFamily::A, 1.0, 20, true};
  c.run.train = TrainConfig{200000, 1000, 5000, 1, 1, 0, -1.0};
  c.sweep.bits = {19, 20, 21, 22, 23, 24, 25};
  c.sweep.alphas = {0.1, 0.25, 0.45, 0.65, 0.85, 1.0};
  c.sweep.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  return c;
}

FullConfig profile_by_name(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "paper") return paper_profile();
  throw std::invalid_argument("unknown profile '" + name +
                              "' (expected desk or paper)");
}

SplitSpec resolve_split(const GrammarSpec& grammar, const SplitConfig& split) {
  if (split.pos1 == split.pos2)
    throw std::invalid_argument("split: positions must be distinct");
  const int v = grammar.values_per_concept;
  Rng rng = derive_rng(split.data_seed, {0x5eedull, 0x11ull});

  SplitSpec spec;
  spec.seed = split.data_seed;
  spec.val_pair.pos1 = split.pos1;
  spec.val_pair.pos2 = split.pos2;
  spec.test_pair.pos1 = split.pos1;
  spec.test_pair.pos2 = split.pos2;

  auto value_or_draw = [&](int configured) {
    if (configured >= 0) return static_cast<std::int32_t>(configured);
    return static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(v)));
  };
  spec.val_pair.val1 = value_or_draw(split.val_val1);
  spec.val_pair.val2 = value_or_draw(split.val_val2);
  spec.test_pair.val1 = value_or_draw(split.test_val1);
  spec.test_pair.val2 = value_or_draw(split.test_val2);
  // Auto-drawn pairs must not collide with the val pair.
  while (split.test_val1 < 0 && split.test_val2 < 0 &&
         spec.test_pair == spec.val_pair) {
    spec.test_pair.val1 = static_cast<std::int32_t>(rng.below(v));
    spec.test_pair.val2 = static_cast<std::int32_t>(rng.below(v));
  }

  const SplitCounts counts = split_counts(grammar, spec);
  auto resolve_size = [](std::int64_t configured, std::uint64_t cap,
                         std::uint64_t available) {
    if (configured >= 0) return static_cast<std::uint64_t>(configured);
    return std::min(cap, available);
  };
  spec.n_train = resolve_size(split.n_train, 100'000, counts.candidates_train);
  spec.n_val = resolve_size(split.n_val, 10'000, counts.candidates_val);
  spec.n_test = resolve_size(split.n_test, 10'000, counts.candidates_test);
  return spec;
}

std::string to_config_text(const FullConfig& config) {
  std::ostringstream out;
  out << "profile = " << config.profile << "\n\n";
  serialize_run(out, config.run);
  out << "\n[sweep]\n";
  out << "bits = "
      << format_list(config.sweep.bits,
                     [](int b) { return std::to_string(b); })
      << "\n";
  out << "alphas = " << format_list(config.sweep.alphas, format_double) << "\n";
  out << "seeds = "
      << format_list(config.sweep.seeds,
                     [](std::uint64_t s) { return std::to_string(s); })
      << "\n";
  return out.str();
}

FullConfig parse_config_text(const std::string& text) {
  const auto entries = tokenize(text);
  FullConfig base = desk_profile();
  for (const auto& [key, value] : entries)
    if (key == "profile") base = profile_by_name(value);
  return apply_entries(std::move(base), entries);
}

FullConfig overlay_config_text(const FullConfig& base, const std::string& text) {
  const auto entries = tokenize(text);
  FullConfig start = base;
  for (const auto& [key, value] : entries)
    if (key == "profile") start = profile_by_name(value);
  return apply_entries(std::move(start), entries);
}

FullConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

void save_config_file(const std::filesystem::path& path,
                      const FullConfig& config) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write config file " + path.string());
  out << to_config_text(config);
  if (!out) throw io_error("write failed for " + path.string());
}

std::string config_digest(const RunConfig& config) {
  std::ostringstream text;
  serialize_run(text, config);
  std::uint64_t hash = 1469598103934665603ULL;
  for (const char ch : text.str()) {
    hash ^= static_cast<unsigned char>(ch);
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace emlang
