#pragma once

#include <cstdint>
#include <vector>

#include "emlang/ad/tape.hpp"
#include "emlang/grammar.hpp"
#include "emlang/model_config.hpp"
#include "emlang/rng.hpp"

namespace emlang {

// Clamp range for the learned ST temperature. Both ends guard against
// degenerate gradients: tau -> 0 makes the relaxation a step function,
// tau -> inf mutes the latent pathway entirely (observed as runaway).
inline constexpr double kTauFloor = 0.1;
inline constexpr double kTauCeiling = 3.0;

// An l-bit latent message.
struct Message {
  std::vector<std::uint8_t> bits;

  bool operator==(const Message&) const = default;
};

std::uint64_t pack_bits(const Message& z);
Message message_from_col(const Mat& zbits, Index col);

// Column j holds the tokens of strings[j]; throws if any string is not a
// member of the grammar.
IntMat tokens_matrix(const GrammarSpec& grammar,
                     const std::vector<ConceptString>& strings);

// --- frozen-evaluation interfaces -------------------------------------------
// Metrics and decoding run against these, so the neural models and the
// synthetic calibration models are interchangeable.

struct BitEncoder {
  virtual ~BitEncoder() = default;
  virtual int latent_bits() const = 0;
  // l x B matrix of P(bit = 1), one column per string.
  virtual Mat bit_prob1_batch(const std::vector<ConceptString>& strings) const = 0;
};

struct StringDecoder {
  virtual ~StringDecoder() = default;
  virtual int num_concepts() const = 0;
  // One distribution over the full alphabet per concept step, each |Sigma| x B.
  // zbits is l x B; entry z gives the pair weights (1-z, z), so hard bits and
  // relaxed values are both accepted.
  virtual std::vector<Mat> dist_batch(const Mat& zbits) const = 0;
};

// Factorized Bernoulli prior over messages.
struct LatentPrior {
  virtual ~LatentPrior() = default;
  virtual int latent_bits() const = 0;
  virtual Vec bit_prob1() const = 0;  // length l

  Mat sample_bits(Index n, Rng& rng) const;  // l x n of {0,1}
  double logprob(const Message& z) const;
};

// --- neural models -----------------------------------------------------------

struct SpeakerModel final : BitEncoder {
  GrammarSpec grammar;
  int bits = 0;
  bool input_every_step = true;
  ad::ParamTensor embed;  // |Sigma| x E
  ad::LstmParams lstm;    // input N*E, hidden H
  ad::ParamTensor proj_w, proj_b;
  ad::ParamTensor head_w, head_b;
  ad::ParamTensor tau;  // learned ST temperature, used as max(tau, 0.1)

  SpeakerModel(const GrammarSpec& g, const ModelDims& dims, int latent_bits,
               bool every_step);

  std::vector<ad::ParamTensor*> params();
  void init_params(Rng& rng);

  // Training path: per-bit probability pairs, each node 2 x B.
  std::vector<ad::Var> forward(ad::Tape& t, const IntMat& tokens);

  int latent_bits() const override { return bits; }
  Mat bit_prob1_batch(const std::vector<ConceptString>& strings) const override;
  // l x 2 matrix of (P(0), P(1)) rows for one string.
  Mat bit_prob_pairs(const ConceptString& s) const;
};

struct ListenerModel final : StringDecoder {
  GrammarSpec grammar;
  int bits = 0;
  ad::ParamTensor embed;  // 2l x E, row 2t+v is the embedding of bit t = v
  ad::LstmParams lstm;    // input E, hidden H
  ad::ParamTensor head_w, head_b;

  ListenerModel(const GrammarSpec& g, const ModelDims& dims, int latent_bits);

  std::vector<ad::ParamTensor*> params();
  void init_params(Rng& rng);

  std::vector<ad::Var> forward(ad::Tape& t, const std::vector<ad::Var>& z_bits);

  int num_concepts() const override { return grammar.num_concepts; }
  std::vector<Mat> dist_batch(const Mat& zbits) const override;
  std::vector<Vec> dists(const Message& z) const;
};

struct PriorModel final : LatentPrior {
  ad::ParamTensor logits;  // l x 1

  explicit PriorModel(int latent_bits);

  std::vector<ad::ParamTensor*> params();

  int latent_bits() const override { return static_cast<int>(logits.value.rows()); }
  Vec bit_prob1() const override;
};

struct VaeModel {
  SpeakerModel speaker;
  ListenerModel listener;
  PriorModel prior;

  VaeModel(const GrammarSpec& grammar, const ModelConfig& config);

  std::vector<ad::ParamTensor*> params();
  void init_params(Rng& rng);
};

// --- objective ---------------------------------------------------------------

enum class LatentMode {
  hard_st,  // hard one-hot forward, relaxed backward (training)
  relaxed,  // relaxed forward too (exactly differentiable; gradient checking)
};

struct ElboResult {
  ad::Var loss;  // scalar node, -mean(ELBO) over the batch
  double elbo = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  Mat z_bits;  // l x B hard bits actually sampled
};

// ELBO with analytic KL; the reconstruction term averages `recon_samples`
// independent latent draws (default 1). Throws numerical_error naming the
// offending term if any component is non-finite.
// kl_weight scales the KL term (the training loop ramps it during the
// configured warmup; the reported kl stays unweighted).
ElboResult elbo_loss(ad::Tape& t, VaeModel& model,
                     const std::vector<ConceptString>& batch, Rng& rng,
                     LatentMode mode = LatentMode::hard_st,
                     int recon_samples = 1, double kl_weight = 1.0);

// Tape node (1 x B) of KL(q_t || p_t) summed over bits; probabilities are
// clamped at 1e-8 before the logs, and each clamp bumps a warning counter.
ad::Var kl_node(ad::Tape& t, const std::vector<ad::Var>& q_bits,
                ad::ParamTensor& prior_logits);

// Frozen analytic KL for an l x 2 matrix of (P(0), P(1)) rows.
double kl_factorized_bernoulli(const Mat& q_pairs, const Vec& prior_p1);
double kl_factorized_bernoulli(const Mat& q_pairs, const PriorModel& prior);

std::uint64_t kl_clamp_warning_count();
void reset_kl_clamp_warning_count();

// --- deterministic round trip --------------------------------------------

struct AutoencodeResult {
  Mat z_bits;  // l x B
  std::vector<ConceptString> decoded;
  std::vector<bool> exact_match;
};

AutoencodeResult deterministic_autoencode(
    const BitEncoder& encoder, const StringDecoder& decoder,
    const GrammarSpec& grammar, const std::vector<ConceptString>& strings);

}  // namespace emlang
