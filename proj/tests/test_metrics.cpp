#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "emlang/metrics.hpp"
#include "emlang/synthetic.hpp"

using namespace emlang;

namespace {

std::vector<Message> encode_all(const PerfectCodeModel& code,
                                const std::vector<ConceptString>& strings) {
  std::vector<Message> messages;
  for (const auto& s : strings) messages.push_back(code.encode_message(s));
  return messages;
}

}  // namespace

TEST_CASE("precision of constant decoders") {
  const GrammarSpec grammar(6, 10);
  const UniformPrior prior(5);
  Rng rng(51);

  const ConstantDecoder valid(grammar, {0, 10, 20, 30, 40, 50});
  CHECK(precision_mc(prior, valid, grammar, 500, rng).value == 1.0);

  const ConstantDecoder invalid(grammar, {0, 0, 0, 0, 0, 0});
  CHECK(precision_mc(prior, invalid, grammar, 500, rng).value == 0.0);
}

TEST_CASE("precision standard error follows the binomial formula") {
  const GrammarSpec grammar(2, 3);
  // A decoder that is valid only when bit 0 is set: precision ~ 0.5.
  PerfectCodeModel code(grammar);
  const UniformPrior prior(code.latent_bits());
  Rng rng(52);
  const auto est = precision_mc(prior, code, grammar, 2000, rng);
  CHECK(est.value == 1.0);  // perfect code decodes every pattern to a member
  CHECK(est.std_error == 0.0);
  CHECK(est.n_samples == 2000);
}

TEST_CASE("recall of an exactly uniform generative model is -ln |L*|") {
  const GrammarSpec grammar(3, 4);  // 64 strings, 6 bits
  PerfectCodeModel code(grammar);
  REQUIRE(code.latent_bits() == 6);
  const UniformPrior prior(6);
  const auto strings = enumerate_language(grammar, 100);
  Rng rng(53);
  const double recall = recall_mc(code, code, prior, grammar, strings, 50, rng);
  CHECK(std::abs(recall - (-std::log(64.0))) < 0.02);
}

TEST_CASE("recall proxy is non-positive") {
  const GrammarSpec grammar(2, 3);
  PerfectCodeModel code(grammar);
  const UniformPrior prior(code.latent_bits());
  const auto strings = enumerate_language(grammar, 100);
  Rng rng(54);
  for (int k : {1, 5}) {
    const double recall = recall_mc(code, code, prior, grammar, strings, k, rng);
    CHECK(recall <= 0.0);
  }
}

TEST_CASE("importance weighting does not fall below the single-sample bound") {
  // Noisy synthetic code: the K-sample estimate should dominate K = 1 in
  // expectation, so compare means over repeated draws.
  const GrammarSpec grammar(2, 3);
  RandomCodeEncoder code(grammar, 4, /*seed=*/7, /*eps=*/0.2);
  const UniformPrior prior(4);
  const auto strings = enumerate_language(grammar, 100);
  const ConstantDecoder decoder(grammar, {1, 4});
  Rng rng(55);
  double mean_k1 = 0.0, mean_k50 = 0.0;
  const int reps = 40;
  for (int rep = 0; rep < reps; ++rep) {
    mean_k1 += recall_mc(code, decoder, prior, grammar, strings, 1, rng);
    mean_k50 += recall_mc(code, decoder, prior, grammar, strings, 50, rng);
  }
  mean_k1 /= reps;
  mean_k50 /= reps;
  CHECK(mean_k50 >= mean_k1 - 0.05);
}

TEST_CASE("accuracy oracles") {
  const GrammarSpec grammar(3, 4);
  PerfectCodeModel code(grammar);
  const auto strings = enumerate_language(grammar, 100);
  CHECK(accuracy(code, code, grammar, strings) == 1.0);

  // Constant pipeline matching exactly one member.
  const ConstantEncoder enc(Message{{0, 0, 0, 0, 0, 0}});
  const ConstantDecoder dec(grammar, {0, 4, 8});
  CHECK(accuracy(enc, dec, grammar, strings) ==
        doctest::Approx(1.0 / 64).epsilon(1e-12));
  CHECK_THROWS_AS(accuracy(enc, dec, grammar, {}), std::invalid_argument);
}

TEST_CASE("conditional entropy basics") {
  // Messages carry concept value in bits (0,1); bit 2 is noise.
  std::vector<Message> messages;
  std::vector<int> values;
  for (int v = 0; v < 4; ++v) {
    for (int noise = 0; noise < 2; ++noise) {
      Message z;
      z.bits = {static_cast<std::uint8_t>(v & 1),
                static_cast<std::uint8_t>((v >> 1) & 1),
                static_cast<std::uint8_t>(noise)};
      messages.push_back(z);
      values.push_back(v);
    }
  }
  // Empty block: marginal entropy of a uniform 4-way value.
  CHECK(conditional_entropy(messages, values, {}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  // The value is a deterministic function of bits {0,1}.
  CHECK(conditional_entropy(messages, values, {0, 1}) == 0.0);
  // The noise bit alone explains nothing.
  CHECK(conditional_entropy(messages, values, {2}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(conditional_entropy({}, {}, {}), std::invalid_argument);
}

TEST_CASE("conditional entropy matches a hand-built joint table") {
  // Joint over (bit, value): p(z=0, v=0) = 3/8, p(z=0, v=1) = 1/8,
  // p(z=1, v=0) = 1/8, p(z=1, v=1) = 3/8.
  std::vector<Message> messages;
  std::vector<int> values;
  auto push = [&](int bit, int value, int copies) {
    for (int i = 0; i < copies; ++i) {
      Message z;
      z.bits = {static_cast<std::uint8_t>(bit)};
      messages.push_back(z);
      values.push_back(value);
    }
  };
  push(0, 0, 3);
  push(0, 1, 1);
  push(1, 0, 1);
  push(1, 1, 3);

  // Direct formula: H(V | Z) = sum_z p(z) H(V | z), both conditionals are
  // Bernoulli(1/4 or 3/4).
  const double h_cond = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  CHECK(conditional_entropy(messages, values, {0}) ==
        doctest::Approx(h_cond).epsilon(1e-12));
}

TEST_CASE("conditioning on more bits never increases plug-in entropy") {
  Rng rng(56);
  std::vector<Message> messages;
  std::vector<int> values;
  for (int i = 0; i < 300; ++i) {
    Message z;
    for (int t = 0; t < 6; ++t)
      z.bits.push_back(rng.bernoulli(0.5) ? 1 : 0);
    messages.push_back(z);
    values.push_back(static_cast<int>(rng.below(4)));
  }
  const double h1 = conditional_entropy(messages, values, {0, 2});
  const double h2 = conditional_entropy(messages, values, {0, 2, 4});
  CHECK(h2 <= h1 + 1e-12);
}

TEST_CASE("residual entropy of a perfect compositional code is exactly zero") {
  const GrammarSpec grammar(3, 4);
  PerfectCodeModel code(grammar);
  const auto strings = enumerate_language(grammar, 100);
  const auto result =
      residual_entropy(code, grammar, strings, PartitionStrategy::exhaustive);
  CHECK(result.value == 0.0);
  // The minimizing partition groups bits per concept.
  CHECK(result.bit_to_concept == std::vector<int>{0, 0, 1, 1, 2, 2});

  const auto greedy =
      residual_entropy(code, grammar, strings, PartitionStrategy::greedy);
  CHECK(greedy.value == 0.0);  // disjoint support: greedy finds the optimum
  CHECK(greedy.bit_to_concept == result.bit_to_concept);
}

TEST_CASE("residual entropy of a constant speaker is one") {
  const GrammarSpec grammar(2, 3);
  const ConstantEncoder enc(Message{{1, 0, 1, 1}});
  const auto strings = enumerate_language(grammar, 100);
  for (auto strategy :
       {PartitionStrategy::exhaustive, PartitionStrategy::greedy}) {
    const auto result = residual_entropy(enc, grammar, strings, strategy);
    CHECK(result.value == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("greedy never beats exhaustive on random codes") {
  const GrammarSpec grammar(3, 3);
  const auto strings = enumerate_language(grammar, 100);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    RandomCodeEncoder code(grammar, 7, seed);
    const auto exhaustive = residual_entropy(code, grammar, strings,
                                             PartitionStrategy::exhaustive);
    const auto greedy =
        residual_entropy(code, grammar, strings, PartitionStrategy::greedy);
    CHECK(greedy.value >= exhaustive.value - 1e-12);
    CHECK(exhaustive.value >= 0.0);
    CHECK(exhaustive.value <= 1.0 + 1e-12);
  }
}

TEST_CASE("residual entropy is invariant under bit permutations") {
  const GrammarSpec grammar(2, 4);
  RandomCodeEncoder code(grammar, 5, 99);
  const auto strings = enumerate_language(grammar, 100);
  const Mat p1 = code.bit_prob1_batch(strings);

  std::vector<Message> messages, permuted;
  std::vector<std::vector<std::int32_t>> values;
  const std::vector<int> perm{3, 0, 4, 1, 2};
  for (std::size_t b = 0; b < strings.size(); ++b) {
    Message z;
    for (Index t = 0; t < 5; ++t)
      z.bits.push_back(p1(t, static_cast<Index>(b)) > 0.5 ? 1 : 0);
    Message zp;
    zp.bits.resize(5);
    for (int t = 0; t < 5; ++t) zp.bits[perm[t]] = z.bits[t];
    messages.push_back(z);
    permuted.push_back(zp);
    values.push_back(concepts_of(grammar, strings[b]));
  }
  const auto base = residual_entropy_from_messages(
      messages, values, 2, 4, PartitionStrategy::exhaustive);
  const auto moved = residual_entropy_from_messages(
      permuted, values, 2, 4, PartitionStrategy::exhaustive);
  CHECK(base.value == doctest::Approx(moved.value).epsilon(1e-12));
}

TEST_CASE("residual entropy is invariant under concept relabeling") {
  const GrammarSpec grammar(2, 3);
  RandomCodeEncoder code(grammar, 4, 17);
  const auto strings = enumerate_language(grammar, 100);
  const Mat p1 = code.bit_prob1_batch(strings);
  std::vector<Message> messages;
  std::vector<std::vector<std::int32_t>> values, relabeled;
  const std::vector<std::int32_t> relabel{2, 0, 1};
  for (std::size_t b = 0; b < strings.size(); ++b) {
    Message z;
    for (Index t = 0; t < 4; ++t)
      z.bits.push_back(p1(t, static_cast<Index>(b)) > 0.5 ? 1 : 0);
    messages.push_back(z);
    auto v = concepts_of(grammar, strings[b]);
    values.push_back(v);
    for (auto& x : v) x = relabel[x];
    relabeled.push_back(v);
  }
  const auto base = residual_entropy_from_messages(
      messages, values, 2, 3, PartitionStrategy::exhaustive);
  const auto moved = residual_entropy_from_messages(
      messages, relabeled, 2, 3, PartitionStrategy::exhaustive);
  CHECK(base.value == doctest::Approx(moved.value).epsilon(1e-12));
}

TEST_CASE("exhaustive search refuses oversized problems") {
  std::vector<Message> messages(2);
  messages[0].bits.assign(21, 0);
  messages[1].bits.assign(21, 1);
  std::vector<std::vector<std::int32_t>> values{{0, 1, 0}, {1, 0, 1}};
  CHECK_THROWS_WITH_AS(
      residual_entropy_from_messages(messages, values, 3, 2,
                                     PartitionStrategy::exhaustive),
      doctest::Contains("greedy"), std::invalid_argument);
}

TEST_CASE("efficacy counts seeds above the threshold") {
  CHECK(efficacy({1.0, 1.0, 1.0}, 0.99) == 1.0);
  CHECK(efficacy({0.2, 0.4}, 0.99) == 0.0);
  std::vector<double> mixed(10, 1.0);
  for (int i = 0; i < 3; ++i) mixed[i] = 0.5;
  CHECK(efficacy(mixed, 0.99) == doctest::Approx(0.7));
  CHECK_THROWS_AS(efficacy({}, 0.99), std::invalid_argument);
}
