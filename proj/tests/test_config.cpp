#include <doctest.h>

#include <filesystem>

#include "emlang/config.hpp"

using namespace emlang;

TEST_CASE("profiles expose the documented defaults") {
  const FullConfig desk = desk_profile();
  CHECK(desk.run.grammar.num_concepts == 3);
  CHECK(desk.run.grammar.values_per_concept == 4);
  CHECK(desk.run.model.family == ModelFamily::D);
  CHECK(desk.run.model.latent_bits == 8);
  CHECK(desk.run.optim.lr == doctest::Approx(3e-3));
  CHECK(desk.run.optim.weight_decay == doctest::Approx(1e-4));
  CHECK(desk.run.metrics.precision_samples == 10000);
  CHECK(desk.sweep.bits.size() == 7);
  CHECK(desk.sweep.alphas.size() == 6);
  CHECK(desk.sweep.seeds.size() == 5);

  const FullConfig paper = paper_profile();
  CHECK(paper.run.grammar.num_concepts == 6);
  CHECK(paper.run.grammar.values_per_concept == 10);
  CHECK(paper.run.model.family == ModelFamily::A);
  CHECK(paper.run.train.steps == 200000);
  CHECK(paper.run.train.batch == 1000);
  CHECK(paper.sweep.bits == std::vector<int>{19, 20, 21, 22, 23, 24, 25});
  CHECK(paper.sweep.seeds.size() == 10);

  CHECK_THROWS_AS(profile_by_name("galaxy"), std::invalid_argument);
}

TEST_CASE("config text round-trips exactly") {
  FullConfig config = desk_profile();
  config.run.model.alpha = 0.55;
  config.run.train.seed = 1234;
  config.run.split.val_val1 = 2;
  const std::string text = to_config_text(config);
  const FullConfig parsed = parse_config_text(text);
  CHECK(to_config_text(parsed) == text);
  CHECK(config_digest(parsed.run) == config_digest(config.run));
}

TEST_CASE("digest is stable and sensitive") {
  const FullConfig a = desk_profile();
  FullConfig b = desk_profile();
  CHECK(config_digest(a.run) == config_digest(b.run));
  b.run.train.seed = 999;
  CHECK(config_digest(a.run) != config_digest(b.run));
  b = desk_profile();
  b.run.model.alpha = 0.9999;
  CHECK(config_digest(a.run) != config_digest(b.run));
}

TEST_CASE("overlay keeps unmentioned keys") {
  const FullConfig base = desk_profile();
  const FullConfig over = overlay_config_text(base,
                                              "[train]\n"
                                              "steps = 500\n"
                                              "[model]\n"
                                              "latent_bits = 5\n");
  CHECK(over.run.train.steps == 500);
  CHECK(over.run.model.latent_bits == 5);
  CHECK(over.run.train.batch == base.run.train.batch);
  CHECK(over.sweep.bits == base.sweep.bits);
}

TEST_CASE("unknown keys and malformed lines are rejected") {
  CHECK_THROWS_WITH_AS(parse_config_text("[model]\nwidth = 3\n"),
                       doctest::Contains("unknown key"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[model\nalpha = 1\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("alpha 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[model]\nalpha = fast\n"),
                  std::invalid_argument);
}

TEST_CASE("profile key inside a file selects the base") {
  const FullConfig parsed =
      parse_config_text("profile = paper\n[train]\nsteps = 7\n");
  CHECK(parsed.run.grammar.num_concepts == 6);
  CHECK(parsed.run.train.steps == 7);
}

TEST_CASE("config files round-trip on disk") {
  const auto path =
      std::filesystem::temp_directory_path() / "emlang_test_config.cfg";
  FullConfig config = paper_profile();
  save_config_file(path, config);
  const FullConfig loaded = load_config_file(path);
  CHECK(to_config_text(loaded) == to_config_text(config));
  std::filesystem::remove(path);
}

TEST_CASE("resolve_split fills auto fields") {
  const GrammarSpec grammar(3, 4);
  SplitConfig split;  // all auto, data_seed 1
  const SplitSpec resolved = resolve_split(grammar, split);
  CHECK(resolved.val_pair.pos1 == 0);
  CHECK(resolved.val_pair.pos2 == 1);
  CHECK(resolved.val_pair.val1 >= 0);
  CHECK(resolved.val_pair.val1 < 4);
  CHECK_FALSE(resolved.test_pair == resolved.val_pair);
  CHECK(resolved.n_train == 64 - 4 - 4);
  CHECK(resolved.n_val == 4);
  CHECK(resolved.n_test == 4);

  // Same data_seed resolves identically; another seed may differ.
  const SplitSpec again = resolve_split(grammar, split);
  CHECK(again.val_pair == resolved.val_pair);
  CHECK(again.test_pair == resolved.test_pair);

  // Paper-scale sizes clamp to the documented caps.
  const SplitSpec paper = resolve_split(GrammarSpec(6, 10), split);
  CHECK(paper.n_train == 100'000);
  CHECK(paper.n_val == 10'000);
  CHECK(paper.n_test == 10'000);
}

TEST_CASE("explicit split values are honored") {
  const GrammarSpec grammar(3, 4);
  SplitConfig split;
  split.val_val1 = 1;
  split.val_val2 = 2;
  split.test_val1 = 0;
  split.test_val2 = 3;
  split.n_val = 2;
  const SplitSpec resolved = resolve_split(grammar, split);
  CHECK(resolved.val_pair.val1 == 1);
  CHECK(resolved.val_pair.val2 == 2);
  CHECK(resolved.test_pair.val1 == 0);
  CHECK(resolved.test_pair.val2 == 3);
  CHECK(resolved.n_val == 2);
}
