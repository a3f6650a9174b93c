#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "emlang/rng.hpp"
#include "emlang/types.hpp"

namespace emlang {

// A fixed-length compositional language: num_concepts positions, each owning
// a disjoint value range of the alphabet. Position j accepts tokens in
// [j * values_per_concept, (j + 1) * values_per_concept).
struct GrammarSpec {
  int num_concepts = 0;
  int values_per_concept = 0;

  GrammarSpec() = default;
  GrammarSpec(int concepts, int values);

  int alphabet_size() const { return num_concepts * values_per_concept; }
  int production_count() const { return num_concepts * values_per_concept + 1; }
  int max_string_length() const { return num_concepts; }

  // True when the language is strictly larger than its generator description.
  bool is_compositional() const;

  bool operator==(const GrammarSpec&) const = default;
};

struct ConceptString {
  std::vector<std::int32_t> tokens;

  bool operator==(const ConceptString&) const = default;
};

ConceptString sample_string(const GrammarSpec& spec, Rng& rng);

bool is_member(const GrammarSpec& spec, std::span<const std::int32_t> tokens);
bool is_member(const GrammarSpec& spec, const ConceptString& s);

// Per-position concept values: v_j = token_j - j * values_per_concept.
std::vector<std::int32_t> concepts_of(const GrammarSpec& spec,
                                      const ConceptString& s);
ConceptString tokens_of(const GrammarSpec& spec,
                        std::span<const std::int32_t> concept_values);

// values_per_concept ^ num_concepts; throws on uint64 overflow.
std::uint64_t language_size(const GrammarSpec& spec);
int min_channel_bits(const GrammarSpec& spec);

// All members in lexicographic concept order; refuses above cap.
std::vector<ConceptString> enumerate_language(const GrammarSpec& spec,
                                              std::uint64_t cap);

}  // namespace emlang
