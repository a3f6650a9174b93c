#include "emlang/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace emlang {

namespace {

constexpr std::uint64_t kEnumerateCap = 10'000'000;

void validate_pair(const GrammarSpec& spec, const HeldPair& p,
                   const char* which) {
  if (p.pos1 == p.pos2)
    throw std::invalid_argument(std::string(which) +
                                ": positions within a pair must be distinct");
  for (int pos : {p.pos1, p.pos2})
    if (pos < 0 || pos >= spec.num_concepts)
      throw std::invalid_argument(std::string(which) + ": position " +
                                  std::to_string(pos) + " out of range");
  for (std::int32_t val : {p.val1, p.val2})
    if (val < 0 || val >= spec.values_per_concept)
      throw std::invalid_argument(std::string(which) + ": value " +
                                  std::to_string(val) + " out of range");
}

void validate_split(const GrammarSpec& spec, const SplitSpec& split) {
  validate_pair(spec, split.val_pair, "val_pair");
  validate_pair(spec, split.test_pair, "test_pair");
  if (split.val_pair == split.test_pair)
    throw std::invalid_argument("SplitSpec: val_pair and test_pair must differ");
  if (split.n_train < 1 || split.n_val < 1 || split.n_test < 1)
    throw std::invalid_argument("SplitSpec: all requested sizes must be >= 1");
  if (spec.num_concepts < 2)
    throw std::invalid_argument(
        "SplitSpec: held-out pairs need at least 2 concept positions");
}

std::uint64_t pow_u64(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// Count of strings satisfying a set of position->value constraints; zero when
// the constraints are inconsistent.
std::uint64_t constrained_count(const GrammarSpec& spec,
                                const std::map<int, std::int32_t>& fixed,
                                bool consistent) {
  if (!consistent) return 0;
  return pow_u64(static_cast<std::uint64_t>(spec.values_per_concept),
                 spec.num_concepts - static_cast<int>(fixed.size()));
}

std::pair<std::map<int, std::int32_t>, bool> merge_pairs(const HeldPair& a,
                                                         const HeldPair& b) {
  std::map<int, std::int32_t> fixed{{a.pos1, a.val1}, {a.pos2, a.val2}};
  bool consistent = true;
  for (auto [pos, val] : {std::pair{b.pos1, b.val1}, std::pair{b.pos2, b.val2}}) {
    auto it = fixed.find(pos);
    if (it == fixed.end())
      fixed.emplace(pos, val);
    else if (it->second != val)
      consistent = false;
  }
  return {fixed, consistent};
}

std::string pair_str(const HeldPair& p) {
  return std::to_string(p.pos1) + ":" + std::to_string(p.val1) + "," +
         std::to_string(p.pos2) + ":" + std::to_string(p.val2);
}

HeldPair parse_pair(const std::string& text) {
  HeldPair p;
  if (std::sscanf(text.c_str(), "%d:%d,%d:%d", &p.pos1, &p.val1, &p.pos2,
                  &p.val2) != 4)
    throw io_error("dataset header: bad held-out pair '" + text + "'");
  return p;
}

}  // namespace

bool matches_pair(const GrammarSpec& spec, const HeldPair& pair,
                  const ConceptString& s) {
  const auto values = concepts_of(spec, s);
  return values[pair.pos1] == pair.val1 && values[pair.pos2] == pair.val2;
}

SplitCounts split_counts(const GrammarSpec& spec, const SplitSpec& split) {
  const std::uint64_t total = language_size(spec);
  const std::uint64_t per_pair =
      pow_u64(static_cast<std::uint64_t>(spec.values_per_concept),
              spec.num_concepts - 2);
  auto [fixed, consistent] = merge_pairs(split.val_pair, split.test_pair);
  const std::uint64_t both = constrained_count(spec, fixed, consistent);

  SplitCounts counts;
  counts.candidates_val = per_pair;            // all strings matching val pair
  counts.candidates_test = per_pair - both;    // test excludes val
  counts.candidates_train = total - 2 * per_pair + both;
  return counts;
}

DatasetBundle build_splits(const GrammarSpec& grammar, const SplitSpec& split,
                           Rng& rng) {
  validate_split(grammar, split);

  const SplitCounts counts = split_counts(grammar, split);
  auto check = [](std::uint64_t requested, std::uint64_t available,
                  const char* name) {
    if (requested > available)
      throw std::invalid_argument(std::string("build_splits: requested ") +
                                  std::to_string(requested) + " " + name +
                                  " strings but only " +
                                  std::to_string(available) + " candidates");
  };
  check(split.n_train, counts.candidates_train, "train");
  check(split.n_val, counts.candidates_val, "val");
  check(split.n_test, counts.candidates_test, "test");

  std::vector<ConceptString> train_cand, val_cand, test_cand;
  for (auto& s : enumerate_language(grammar, kEnumerateCap)) {
    if (matches_pair(grammar, split.val_pair, s))
      val_cand.push_back(std::move(s));  // overlap rule: both pairs -> val
    else if (matches_pair(grammar, split.test_pair, s))
      test_cand.push_back(std::move(s));
    else
      train_cand.push_back(std::move(s));
  }

  DatasetBundle bundle;
  bundle.grammar = grammar;
  bundle.split = split;
  bundle.train = subsample(train_cand, split.n_train, rng);
  bundle.val = subsample(val_cand, split.n_val, rng);
  bundle.test = subsample(test_cand, split.n_test, rng);
  return bundle;
}

void save_split(const std::filesystem::path& path, const GrammarSpec& grammar,
                const SplitSpec& split, const std::string& split_name,
                const std::vector<ConceptString>& strings) {
  std::ofstream out(path);
  if (!out) throw io_error("save_split: cannot open " + path.string());
  out << "# emlang dataset\n";
  out << "# format = 1\n";
  out << "# num_concepts = " << grammar.num_concepts << "\n";
  out << "# values_per_concept = " << grammar.values_per_concept << "\n";
  out << "# split = " << split_name << "\n";
  out << "# n = " << strings.size() << "\n";
  out << "# seed = " << split.seed << "\n";
  out << "# val_pair = " << pair_str(split.val_pair) << "\n";
  out << "# test_pair = " << pair_str(split.test_pair) << "\n";
  for (const auto& s : strings) {
    for (std::size_t j = 0; j < s.tokens.size(); ++j) {
      if (j) out << ',';
      out << s.tokens[j];
    }
    out << '\n';
  }
  if (!out) throw io_error("save_split: write failed for " + path.string());
}

std::vector<ConceptString> load_split(const std::filesystem::path& path,
                                      const GrammarSpec& expected_grammar) {
  std::ifstream in(path);
  if (!in) throw io_error("load_split: cannot open " + path.string());

  std::vector<ConceptString> strings;
  GrammarSpec file_grammar;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key, eq, value;
      if (hs >> key >> eq >> value && eq == "=") {
        if (key == "num_concepts") file_grammar.num_concepts = std::stoi(value);
        if (key == "values_per_concept")
          file_grammar.values_per_concept = std::stoi(value);
      }
      continue;
    }
    ConceptString s;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ','))
      s.tokens.push_back(static_cast<std::int32_t>(std::stol(tok)));
    if (!is_member(expected_grammar, s))
      throw io_error("load_split: non-member string in " + path.string() +
                     ": '" + line + "'");
    strings.push_back(std::move(s));
  }
  if (file_grammar.num_concepts != expected_grammar.num_concepts ||
      file_grammar.values_per_concept != expected_grammar.values_per_concept)
    throw io_error("load_split: grammar header mismatch in " + path.string());
  return strings;
}

void save_bundle(const std::filesystem::path& dir, const DatasetBundle& bundle) {
  std::filesystem::create_directories(dir);
  save_split(dir / "train.txt", bundle.grammar, bundle.split, "train",
             bundle.train);
  save_split(dir / "val.txt", bundle.grammar, bundle.split, "val", bundle.val);
  save_split(dir / "test.txt", bundle.grammar, bundle.split, "test",
             bundle.test);
}

}  // namespace emlang
