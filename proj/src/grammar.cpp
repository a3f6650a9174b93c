#include "emlang/grammar.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace emlang {

GrammarSpec::GrammarSpec(int concepts, int values)
    : num_concepts(concepts), values_per_concept(values) {
  if (num_concepts < 1)
    throw std::invalid_argument("GrammarSpec: num_concepts must be >= 1, got " +
                                std::to_string(num_concepts));
  if (values_per_concept < 2)
    throw std::invalid_argument(
        "GrammarSpec: values_per_concept must be >= 2, got " +
        std::to_string(values_per_concept));
}

bool GrammarSpec::is_compositional() const {
  // |L| > |P| + |N|, with |L| compared in wide arithmetic.
  const std::uint64_t rhs =
      static_cast<std::uint64_t>(production_count()) +
      static_cast<std::uint64_t>(num_concepts);
  std::uint64_t size = 1;
  for (int j = 0; j < num_concepts; ++j) {
    if (size > rhs) return true;
    size *= static_cast<std::uint64_t>(values_per_concept);
  }
  return size > rhs;
}

ConceptString sample_string(const GrammarSpec& spec, Rng& rng) {
  ConceptString s;
  s.tokens.resize(spec.num_concepts);
  for (int j = 0; j < spec.num_concepts; ++j) {
    const auto v = static_cast<std::int32_t>(
        rng.below(static_cast<std::uint64_t>(spec.values_per_concept)));
    s.tokens[j] = static_cast<std::int32_t>(j) * spec.values_per_concept + v;
  }
  return s;
}

bool is_member(const GrammarSpec& spec, std::span<const std::int32_t> tokens) {
  if (static_cast<int>(tokens.size()) != spec.num_concepts) return false;
  for (int j = 0; j < spec.num_concepts; ++j) {
    const std::int32_t lo = j * spec.values_per_concept;
    if (tokens[j] < lo || tokens[j] >= lo + spec.values_per_concept)
      return false;
  }
  return true;
}

bool is_member(const GrammarSpec& spec, const ConceptString& s) {
  return is_member(spec, std::span<const std::int32_t>(s.tokens));
}

std::vector<std::int32_t> concepts_of(const GrammarSpec& spec,
                                      const ConceptString& s) {
  if (!is_member(spec, s))
    throw std::invalid_argument("concepts_of: string is not a member of L*");
  std::vector<std::int32_t> values(spec.num_concepts);
  for (int j = 0; j < spec.num_concepts; ++j)
    values[j] = s.tokens[j] - static_cast<std::int32_t>(j) * spec.values_per_concept;
  return values;
}

ConceptString tokens_of(const GrammarSpec& spec,
                        std::span<const std::int32_t> concept_values) {
  if (static_cast<int>(concept_values.size()) != spec.num_concepts)
    throw std::invalid_argument("tokens_of: expected " +
                                std::to_string(spec.num_concepts) + " values");
  ConceptString s;
  s.tokens.resize(spec.num_concepts);
  for (int j = 0; j < spec.num_concepts; ++j) {
    if (concept_values[j] < 0 || concept_values[j] >= spec.values_per_concept)
      throw std::invalid_argument("tokens_of: concept value out of range");
    s.tokens[j] =
        static_cast<std::int32_t>(j) * spec.values_per_concept + concept_values[j];
  }
  return s;
}

std::uint64_t language_size(const GrammarSpec& spec) {
  std::uint64_t size = 1;
  const auto v = static_cast<std::uint64_t>(spec.values_per_concept);
  for (int j = 0; j < spec.num_concepts; ++j) {
    if (size > std::numeric_limits<std::uint64_t>::max() / v)
      throw std::overflow_error(
          "language_size: " + std::to_string(spec.values_per_concept) + "^" +
          std::to_string(spec.num_concepts) + " overflows 64-bit arithmetic");
    size *= v;
  }
  return size;
}

int min_channel_bits(const GrammarSpec& spec) {
  const std::uint64_t size = language_size(spec);
  int bits = 0;
  while ((std::uint64_t{1} << bits) < size) {
    ++bits;
    if (bits >= 64) break;
  }
  return bits;
}

std::vector<ConceptString> enumerate_language(const GrammarSpec& spec,
                                              std::uint64_t cap) {
  const std::uint64_t size = language_size(spec);
  if (size > cap)
    throw std::invalid_argument("enumerate_language: language has " +
                                std::to_string(size) +
                                " strings, above the cap of " +
                                std::to_string(cap));
  std::vector<ConceptString> out;
  out.reserve(size);
  std::vector<std::int32_t> values(spec.num_concepts, 0);
  for (std::uint64_t i = 0; i < size; ++i) {
    out.push_back(tokens_of(spec, values));
    // Odometer with the last concept fastest: lexicographic concept order.
    for (int j = spec.num_concepts - 1; j >= 0; --j) {
      if (++values[j] < spec.values_per_concept) break;
      values[j] = 0;
    }
  }
  return out;
}

}  // namespace emlang
