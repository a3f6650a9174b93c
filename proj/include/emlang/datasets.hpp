#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emlang/grammar.hpp"
#include "emlang/rng.hpp"

namespace emlang {

// A held-out concept combination: two (position, value) constraints.
struct HeldPair {
  int pos1 = 0;
  std::int32_t val1 = 0;
  int pos2 = 1;
  std::int32_t val2 = 0;

  bool operator==(const HeldPair&) const = default;
};

struct SplitSpec {
  HeldPair val_pair;
  HeldPair test_pair;
  std::uint64_t n_train = 0;
  std::uint64_t n_val = 0;
  std::uint64_t n_test = 0;
  std::uint64_t seed = 0;
};

struct DatasetBundle {
  std::vector<ConceptString> train;
  std::vector<ConceptString> val;
  std::vector<ConceptString> test;
  GrammarSpec grammar;
  SplitSpec split;
};

bool matches_pair(const GrammarSpec& spec, const HeldPair& pair,
                  const ConceptString& s);

// Candidate-set sizes before subsampling, computed arithmetically so that
// feasibility can be checked without enumerating the language.
struct SplitCounts {
  std::uint64_t candidates_train = 0;
  std::uint64_t candidates_val = 0;
  std::uint64_t candidates_test = 0;
};
SplitCounts split_counts(const GrammarSpec& spec, const SplitSpec& split);

DatasetBundle build_splits(const GrammarSpec& grammar, const SplitSpec& split,
                           Rng& rng);

// Uniform n-subset without replacement; result order is the shuffled order.
template <typename T>
std::vector<T> subsample(const std::vector<T>& items, std::uint64_t n,
                         Rng& rng) {
  if (n > items.size())
    throw std::invalid_argument("subsample: requested " + std::to_string(n) +
                                " of " + std::to_string(items.size()) +
                                " items");
  std::vector<std::uint64_t> idx(items.size());
  for (std::uint64_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<T> out;
  out.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(items[idx[i]]);
  return out;
}

void save_split(const std::filesystem::path& path, const GrammarSpec& grammar,
                const SplitSpec& split, const std::string& split_name,
                const std::vector<ConceptString>& strings);
std::vector<ConceptString> load_split(const std::filesystem::path& path,
                                      const GrammarSpec& expected_grammar);
void save_bundle(const std::filesystem::path& dir, const DatasetBundle& bundle);

}  // namespace emlang
