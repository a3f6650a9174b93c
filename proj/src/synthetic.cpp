#include "emlang/synthetic.hpp"

#include <cmath>
#include <stdexcept>

namespace emlang {

namespace {

std::uint64_t token_key(const ConceptString& s) {
  std::uint64_t key = 1469598103934665603ULL;
  for (std::int32_t tok : s.tokens) {
    key ^= static_cast<std::uint64_t>(tok) + 0x9e3779b97f4a7c15ULL;
    key *= 1099511628211ULL;
  }
  return key;
}

}  // namespace

PerfectCodeModel::PerfectCodeModel(const GrammarSpec& grammar, double eps)
    : grammar_(grammar), eps_(eps) {
  bits_per_concept_ = 0;
  while ((1 << bits_per_concept_) < grammar.values_per_concept)
    ++bits_per_concept_;
}

Message PerfectCodeModel::encode_message(const ConceptString& s) const {
  const auto values = concepts_of(grammar_, s);
  Message z;
  z.bits.resize(latent_bits());
  for (int i = 0; i < grammar_.num_concepts; ++i)
    for (int k = 0; k < bits_per_concept_; ++k)
      z.bits[i * bits_per_concept_ + k] = (values[i] >> k) & 1;
  return z;
}

Mat PerfectCodeModel::bit_prob1_batch(
    const std::vector<ConceptString>& strings) const {
  Mat p1(latent_bits(), static_cast<Index>(strings.size()));
  for (std::size_t b = 0; b < strings.size(); ++b) {
    const Message z = encode_message(strings[b]);
    for (int t = 0; t < latent_bits(); ++t)
      p1(t, static_cast<Index>(b)) = z.bits[t] ? 1.0 - eps_ : eps_;
  }
  return p1;
}

std::vector<Mat> PerfectCodeModel::dist_batch(const Mat& zbits) const {
  if (zbits.rows() != latent_bits())
    throw std::invalid_argument("PerfectCodeModel: wrong message length");
  const Index batch = zbits.cols();
  const int sigma = grammar_.alphabet_size();
  const double off = eps_ / (sigma - 1);
  std::vector<Mat> dists(grammar_.num_concepts,
                         Mat::Constant(sigma, batch, off));
  for (Index b = 0; b < batch; ++b) {
    for (int i = 0; i < grammar_.num_concepts; ++i) {
      int value = 0;
      for (int k = 0; k < bits_per_concept_; ++k)
        if (zbits(i * bits_per_concept_ + k, b) > 0.5) value |= 1 << k;
      // Patterns beyond the value range still decode to a member.
      value = std::min(value, grammar_.values_per_concept - 1);
      dists[i](i * grammar_.values_per_concept + value, b) = 1.0 - eps_;
    }
  }
  return dists;
}

Mat ConstantEncoder::bit_prob1_batch(
    const std::vector<ConceptString>& strings) const {
  Mat p1(latent_bits(), static_cast<Index>(strings.size()));
  for (Index b = 0; b < p1.cols(); ++b)
    for (int t = 0; t < latent_bits(); ++t)
      p1(t, b) = message.bits[t] ? 1.0 - eps : eps;
  return p1;
}

ConstantDecoder::ConstantDecoder(const GrammarSpec& grammar,
                                 std::vector<std::int32_t> tokens, double eps)
    : alphabet(grammar.alphabet_size()),
      concepts(grammar.num_concepts),
      target(std::move(tokens)),
      eps(eps) {
  if (static_cast<int>(target.size()) != concepts)
    throw std::invalid_argument("ConstantDecoder: wrong target length");
  for (std::int32_t tok : target)
    if (tok < 0 || tok >= alphabet)
      throw std::invalid_argument("ConstantDecoder: target token out of range");
}

std::vector<Mat> ConstantDecoder::dist_batch(const Mat& zbits) const {
  const Index batch = zbits.cols();
  const double off = eps / (alphabet - 1);
  std::vector<Mat> dists(concepts, Mat::Constant(alphabet, batch, off));
  for (int j = 0; j < concepts; ++j)
    dists[j].row(target[j]).setConstant(1.0 - eps);
  return dists;
}

RandomCodeEncoder::RandomCodeEncoder(const GrammarSpec& grammar,
                                     int latent_bits, std::uint64_t seed,
                                     double eps)
    : grammar_(grammar), bits_(latent_bits), eps_(eps) {
  if (latent_bits < 1 || latent_bits > 64)
    throw std::invalid_argument("RandomCodeEncoder: bits must be in [1, 64]");
  Rng rng(mix_seed(seed, {0xc0de5eedULL}));
  for (const auto& s : enumerate_language(grammar, 1'000'000)) {
    std::uint64_t z = 0;
    for (int t = 0; t < bits_; ++t)
      if (rng.bernoulli(0.5)) z |= (std::uint64_t{1} << t);
    code_[token_key(s)] = z;
  }
}

Mat RandomCodeEncoder::bit_prob1_batch(
    const std::vector<ConceptString>& strings) const {
  Mat p1(bits_, static_cast<Index>(strings.size()));
  for (std::size_t b = 0; b < strings.size(); ++b) {
    const auto it = code_.find(token_key(strings[b]));
    if (it == code_.end())
      throw std::invalid_argument("RandomCodeEncoder: string not in code");
    for (int t = 0; t < bits_; ++t)
      p1(t, static_cast<Index>(b)) =
          ((it->second >> t) & 1) ? 1.0 - eps_ : eps_;
  }
  return p1;
}

}  // namespace emlang
