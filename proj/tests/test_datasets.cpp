#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "emlang/datasets.hpp"

using namespace emlang;

namespace {

SplitSpec small_split() {
  SplitSpec split;
  split.val_pair = {0, 1, 1, 2};
  split.test_pair = {0, 2, 1, 3};
  split.n_train = 20;
  split.n_val = 4;
  split.n_test = 4;
  split.seed = 9;
  return split;
}

std::string bundle_text(const DatasetBundle& bundle) {
  std::ostringstream out;
  for (const auto* split : {&bundle.train, &bundle.val, &bundle.test}) {
    for (const auto& s : *split) {
      for (auto tok : s.tokens) out << tok << ',';
      out << ';';
    }
    out << '|';
  }
  return out.str();
}

}  // namespace

TEST_CASE("split candidate counts") {
  const GrammarSpec g64(3, 4);
  const SplitCounts counts = split_counts(g64, small_split());
  CHECK(counts.candidates_val == 4);
  CHECK(counts.candidates_test == 4);
  CHECK(counts.candidates_train == 64 - 4 - 4);

  // Reference grammar: fixing 2 of 6 concepts leaves 10^4 candidates.
  SplitSpec big = small_split();
  big.val_pair = {0, 1, 1, 2};
  big.test_pair = {0, 2, 1, 3};
  CHECK(split_counts(GrammarSpec(6, 10), big).candidates_val == 10'000);

  // Overlapping pairs on different positions share strings; the overlap is
  // counted once.
  SplitSpec cross;
  cross.val_pair = {0, 1, 1, 2};
  cross.test_pair = {1, 2, 2, 3};  // consistent with val at position 1
  cross.n_train = cross.n_val = cross.n_test = 1;
  const SplitCounts crossed = split_counts(g64, cross);
  CHECK(crossed.candidates_val == 4);
  CHECK(crossed.candidates_test == 4 - 1);
  CHECK(crossed.candidates_train == 64 - 4 - 4 + 1);
}

TEST_CASE("build_splits honors the exclusion invariants") {
  const GrammarSpec grammar(3, 4);
  const SplitSpec split = small_split();
  Rng rng(3);
  const DatasetBundle bundle = build_splits(grammar, split, rng);

  CHECK(bundle.train.size() == 20);
  CHECK(bundle.val.size() == 4);
  CHECK(bundle.test.size() == 4);

  for (const auto& s : bundle.train) {
    CHECK_FALSE(matches_pair(grammar, split.val_pair, s));
    CHECK_FALSE(matches_pair(grammar, split.test_pair, s));
  }
  for (const auto& s : bundle.val) CHECK(matches_pair(grammar, split.val_pair, s));
  for (const auto& s : bundle.test) {
    CHECK(matches_pair(grammar, split.test_pair, s));
    CHECK_FALSE(matches_pair(grammar, split.val_pair, s));
  }

  std::set<std::vector<std::int32_t>> seen;
  for (const auto* part : {&bundle.train, &bundle.val, &bundle.test})
    for (const auto& s : *part) CHECK(seen.insert(s.tokens).second);
}

TEST_CASE("build_splits partitions the full language when asked for everything") {
  const GrammarSpec grammar(3, 4);
  SplitSpec split = small_split();
  split.n_train = 56;
  split.n_val = 4;
  split.n_test = 4;
  Rng rng(11);
  const DatasetBundle bundle = build_splits(grammar, split, rng);

  std::set<std::vector<std::int32_t>> all;
  for (const auto* part : {&bundle.train, &bundle.val, &bundle.test})
    for (const auto& s : *part) all.insert(s.tokens);
  CHECK(all.size() == 64);
  // Brute-force reconstruction from enumerate.
  for (const auto& s : enumerate_language(grammar, 100))
    CHECK(all.count(s.tokens) == 1);
}

TEST_CASE("build_splits errors") {
  const GrammarSpec grammar(3, 4);
  SplitSpec split = small_split();
  split.n_val = 5;  // only 4 candidates
  Rng rng(1);
  CHECK_THROWS_WITH_AS(build_splits(grammar, split, rng),
                       doctest::Contains("only 4 candidates"),
                       std::invalid_argument);

  split = small_split();
  split.test_pair = split.val_pair;
  CHECK_THROWS_AS(build_splits(grammar, split, rng), std::invalid_argument);

  split = small_split();
  split.val_pair.pos2 = split.val_pair.pos1;
  CHECK_THROWS_AS(build_splits(grammar, split, rng), std::invalid_argument);
}

TEST_CASE("build_splits is deterministic") {
  const GrammarSpec grammar(3, 4);
  const SplitSpec split = small_split();
  Rng rng_a(5), rng_b(5);
  const DatasetBundle a = build_splits(grammar, split, rng_a);
  const DatasetBundle b = build_splits(grammar, split, rng_b);
  CHECK(bundle_text(a) == bundle_text(b));
}

TEST_CASE("subsample basics") {
  Rng rng(2);
  const std::vector<int> one{42};
  CHECK(subsample(one, 1, rng) == std::vector<int>{42});
  CHECK_THROWS_AS(subsample(one, 2, rng), std::invalid_argument);

  std::vector<int> items(64);
  for (int i = 0; i < 64; ++i) items[i] = i;
  const auto permuted = subsample(items, 64, rng);
  CHECK(std::set<int>(permuted.begin(), permuted.end()).size() == 64);
}

TEST_CASE("subsample inclusion frequencies are uniform") {
  std::vector<int> items(20);
  for (int i = 0; i < 20; ++i) items[i] = i;
  const int trials = 10'000;
  const std::uint64_t n = 5;
  std::vector<int> included(items.size(), 0);
  Rng rng(77);
  for (int trial = 0; trial < trials; ++trial)
    for (int x : subsample(items, n, rng)) ++included[x];
  const double p = static_cast<double>(n) / items.size();
  const double sigma = std::sqrt(p * (1 - p) / trials);
  for (int x = 0; x < 20; ++x) {
    const double freq = static_cast<double>(included[x]) / trials;
    CHECK(std::abs(freq - p) < 3.5 * sigma);
  }
}

TEST_CASE("dataset files round trip") {
  const GrammarSpec grammar(3, 4);
  const SplitSpec split = small_split();
  Rng rng(8);
  const DatasetBundle bundle = build_splits(grammar, split, rng);
  const auto dir =
      std::filesystem::temp_directory_path() / "emlang_test_dataset";
  std::filesystem::remove_all(dir);
  save_bundle(dir, bundle);

  CHECK(load_split(dir / "train.txt", grammar) == bundle.train);
  CHECK(load_split(dir / "val.txt", grammar) == bundle.val);
  CHECK(load_split(dir / "test.txt", grammar) == bundle.test);

  CHECK_THROWS_AS(load_split(dir / "train.txt", GrammarSpec(4, 4)), io_error);
  std::filesystem::remove_all(dir);
}
