#pragma once

#include <unordered_map>
#include <vector>

#include "emlang/model.hpp"

namespace emlang {

// Hand-built codes behind the same frozen interfaces as the neural models.
// They pin down what the metrics must report on known-structure languages.

struct UniformPrior final : LatentPrior {
  int bits;
  explicit UniformPrior(int latent_bits) : bits(latent_bits) {}
  int latent_bits() const override { return bits; }
  Vec bit_prob1() const override { return Vec::Constant(bits, 0.5); }
};

struct FixedPrior final : LatentPrior {
  Vec p1;
  explicit FixedPrior(Vec probs) : p1(std::move(probs)) {}
  int latent_bits() const override { return static_cast<int>(p1.size()); }
  Vec bit_prob1() const override { return p1; }
};

// Bits partitioned into one block per concept; block i is the binary encoding
// (LSB first) of concept i's value. With values_per_concept a power of two and
// no spare bits, the code is a bijection between L* and {0,1}^l.
class PerfectCodeModel final : public BitEncoder, public StringDecoder {
 public:
  PerfectCodeModel(const GrammarSpec& grammar, double eps = 1e-12);

  int bits_per_concept() const { return bits_per_concept_; }
  int latent_bits() const override { return bits_per_concept_ * grammar_.num_concepts; }
  int num_concepts() const override { return grammar_.num_concepts; }

  Message encode_message(const ConceptString& s) const;
  Mat bit_prob1_batch(const std::vector<ConceptString>& strings) const override;
  std::vector<Mat> dist_batch(const Mat& zbits) const override;

 private:
  GrammarSpec grammar_;
  int bits_per_concept_;
  double eps_;
};

// Encoder that emits the same message for every input.
struct ConstantEncoder final : BitEncoder {
  Message message;
  double eps;
  ConstantEncoder(Message msg, double eps = 1e-12)
      : message(std::move(msg)), eps(eps) {}
  int latent_bits() const override { return static_cast<int>(message.bits.size()); }
  Mat bit_prob1_batch(const std::vector<ConceptString>& strings) const override;
};

// Decoder that emits the same token sequence whatever the message says. The
// target needs not be a member of L*.
struct ConstantDecoder final : StringDecoder {
  int alphabet;
  int concepts;
  std::vector<std::int32_t> target;
  double eps;
  ConstantDecoder(const GrammarSpec& grammar, std::vector<std::int32_t> tokens,
                  double eps = 1e-12);
  int num_concepts() const override { return concepts; }
  std::vector<Mat> dist_batch(const Mat& zbits) const override;
};

// A deterministic random code over the whole (desk-scale) language: each
// member is assigned an independently drawn l-bit message.
class RandomCodeEncoder final : public BitEncoder {
 public:
  RandomCodeEncoder(const GrammarSpec& grammar, int latent_bits,
                    std::uint64_t seed, double eps = 1e-12);
  int latent_bits() const override { return bits_; }
  Mat bit_prob1_batch(const std::vector<ConceptString>& strings) const override;

 private:
  GrammarSpec grammar_;
  int bits_;
  double eps_;
  std::unordered_map<std::uint64_t, std::uint64_t> code_;  // token key -> bits
};

}  // namespace emlang
