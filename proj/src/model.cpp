#include "emlang/model.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace emlang {

namespace {

constexpr double kProbFloor = 1e-8;

std::atomic<std::uint64_t> g_kl_clamps{0};

double sigmoid_value(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                : std::exp(x) / (1.0 + std::exp(x));
}

Mat softmax_cols_values(const Mat& a) {
  Mat y(a.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    const Vec shifted = a.col(j).array() - a.col(j).maxCoeff();
    const Vec e = shifted.array().exp();
    y.col(j) = e / e.sum();
  }
  return y;
}

// Counts a clamp only on the forward evaluation.
double clamped_log(double p, bool count) {
  if (p < kProbFloor) {
    if (count) ++g_kl_clamps;
    return std::log(kProbFloor);
  }
  return std::log(p);
}

void init_uniform(ad::ParamTensor& p, double bound, Rng& rng) {
  for (Index i = 0; i < p.value.size(); ++i)
    p.value.data()[i] = rng.uniform(-bound, bound);
}

void lstm_step_values(const ad::LstmParams& p, const Mat& x, Mat& h, Mat& c) {
  const Index hd = p.hidden_dim();
  Mat gates = ((p.w_input.value * x + p.w_hidden.value * h).colwise() +
               p.bias.value.col(0));
  const auto seg = [&](Index k) { return gates.middleRows(k * hd, hd); };
  const Mat i_gate = seg(0).unaryExpr(&sigmoid_value);
  const Mat f_gate = seg(1).unaryExpr(&sigmoid_value);
  const Mat g_gate = seg(2).array().tanh().matrix();
  const Mat o_gate = seg(3).unaryExpr(&sigmoid_value);
  c = f_gate.cwiseProduct(c) + i_gate.cwiseProduct(g_gate);
  h = o_gate.cwiseProduct(c.array().tanh().matrix());
}

Mat gumbel_matrix(Index rows, Index cols, Rng& rng) {
  Mat g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = rng.gumbel();
  return g;
}

}  // namespace

std::uint64_t pack_bits(const Message& z) {
  if (z.bits.size() > 64)
    throw std::invalid_argument("pack_bits: more than 64 bits");
  std::uint64_t packed = 0;
  for (std::size_t t = 0; t < z.bits.size(); ++t)
    if (z.bits[t]) packed |= (std::uint64_t{1} << t);
  return packed;
}

Message message_from_col(const Mat& zbits, Index col) {
  Message z;
  z.bits.resize(zbits.rows());
  for (Index t = 0; t < zbits.rows(); ++t)
    z.bits[t] = zbits(t, col) > 0.5 ? 1 : 0;
  return z;
}

IntMat tokens_matrix(const GrammarSpec& grammar,
                     const std::vector<ConceptString>& strings) {
  IntMat tokens(grammar.num_concepts, static_cast<Index>(strings.size()));
  for (std::size_t b = 0; b < strings.size(); ++b) {
    if (!is_member(grammar, strings[b]))
      throw std::invalid_argument(
          "tokens_matrix: string is not a member of L*");
    for (int j = 0; j < grammar.num_concepts; ++j)
      tokens(j, static_cast<Index>(b)) = strings[b].tokens[j];
  }
  return tokens;
}

// --- prior -------------------------------------------------------------------

Mat LatentPrior::sample_bits(Index n, Rng& rng) const {
  const Vec p1 = bit_prob1();
  Mat z(p1.size(), n);
  for (Index j = 0; j < n; ++j)
    for (Index t = 0; t < p1.size(); ++t)
      z(t, j) = rng.bernoulli(p1(t)) ? 1.0 : 0.0;
  return z;
}

double LatentPrior::logprob(const Message& z) const {
  const Vec p1 = bit_prob1();
  if (static_cast<Index>(z.bits.size()) != p1.size())
    throw std::invalid_argument("prior logprob: message has " +
                                std::to_string(z.bits.size()) +
                                " bits, prior has " + std::to_string(p1.size()));
  double lp = 0.0;
  for (Index t = 0; t < p1.size(); ++t)
    lp += std::log(z.bits[t] ? p1(t) : 1.0 - p1(t));
  return lp;
}

// --- speaker -------------------------------------------------------------

SpeakerModel::SpeakerModel(const GrammarSpec& g, const ModelDims& dims,
                           int latent_bits, bool every_step)
    : grammar(g),
      bits(latent_bits),
      input_every_step(every_step),
      embed("speaker.embed", g.alphabet_size(), dims.speaker_embed),
      lstm("speaker.lstm", static_cast<Index>(g.num_concepts) * dims.speaker_embed,
           dims.speaker_hidden),
      proj_w("speaker.proj_w", dims.speaker_proj, dims.speaker_hidden),
      proj_b("speaker.proj_b", dims.speaker_proj, 1),
      head_w("speaker.head_w", 2, dims.speaker_proj),
      head_b("speaker.head_b", 2, 1),
      tau("speaker.tau", 1, 1) {
  if (latent_bits < 1)
    throw std::invalid_argument("SpeakerModel: latent_bits must be >= 1");
  tau.value(0, 0) = 1.0;
  tau.decay_exempt = true;
}

std::vector<ad::ParamTensor*> SpeakerModel::params() {
  return {&embed,  &lstm.w_input, &lstm.w_hidden, &lstm.bias,
          &proj_w, &proj_b,       &head_w,        &head_b,
          &tau};
}

void SpeakerModel::init_params(Rng& rng) {
  init_uniform(embed, 1.0 / std::sqrt(static_cast<double>(embed.value.cols())),
               rng);
  init_uniform(lstm.w_input,
               1.0 / std::sqrt(static_cast<double>(lstm.w_input.value.cols())),
               rng);
  init_uniform(lstm.w_hidden,
               1.0 / std::sqrt(static_cast<double>(lstm.w_hidden.value.cols())),
               rng);
  lstm.bias.value.setZero();
  init_uniform(proj_w, 1.0 / std::sqrt(static_cast<double>(proj_w.value.cols())),
               rng);
  proj_b.value.setZero();
  init_uniform(head_w, 1.0 / std::sqrt(static_cast<double>(head_w.value.cols())),
               rng);
  head_b.value.setZero();
  tau.value(0, 0) = 1.0;
}

std::vector<ad::Var> SpeakerModel::forward(ad::Tape& t, const IntMat& tokens) {
  const Index batch = tokens.cols();
  const Index hd = lstm.hidden_dim();
  ad::Var emb = ad::embed_concat(t, embed, tokens);
  ad::Var zero_input;
  if (!input_every_step)
    zero_input = ad::leaf(t, Mat::Zero(t.value(emb).rows(), batch));
  ad::LstmState state{ad::leaf(t, Mat::Zero(hd, batch)),
                      ad::leaf(t, Mat::Zero(hd, batch))};
  std::vector<ad::Var> bit_probs;
  bit_probs.reserve(bits);
  for (int step = 0; step < bits; ++step) {
    const ad::Var x = (input_every_step || step == 0) ? emb : zero_input;
    state = ad::lstm_cell(t, lstm, x, state);
    ad::Var proj = ad::affine(t, proj_w, proj_b, state.h);
    ad::Var logits = ad::affine(t, head_w, head_b, proj);
    bit_probs.push_back(ad::softmax_cols(t, logits));
  }
  return bit_probs;
}

Mat SpeakerModel::bit_prob1_batch(
    const std::vector<ConceptString>& strings) const {
  const IntMat tokens = tokens_matrix(grammar, strings);
  const Index batch = tokens.cols();
  const Index e = embed.value.cols();
  Mat x(static_cast<Index>(grammar.num_concepts) * e, batch);
  for (Index b = 0; b < batch; ++b)
    for (int j = 0; j < grammar.num_concepts; ++j)
      x.col(b).segment(j * e, e) = embed.value.row(tokens(j, b)).transpose();

  const Index hd = lstm.hidden_dim();
  Mat h = Mat::Zero(hd, batch);
  Mat c = Mat::Zero(hd, batch);
  const Mat zero_input = Mat::Zero(x.rows(), batch);
  Mat out(bits, batch);
  for (int step = 0; step < bits; ++step) {
    const Mat& input = (input_every_step || step == 0) ? x : zero_input;
    lstm_step_values(lstm, input, h, c);
    const Mat proj = (proj_w.value * h).colwise() + proj_b.value.col(0);
    const Mat logits = (head_w.value * proj).colwise() + head_b.value.col(0);
    out.row(step) = softmax_cols_values(logits).row(1);
  }
  return out;
}

Mat SpeakerModel::bit_prob_pairs(const ConceptString& s) const {
  const Mat p1 = bit_prob1_batch({s});
  Mat pairs(bits, 2);
  pairs.col(1) = p1.col(0);
  pairs.col(0) = (1.0 - p1.col(0).array()).matrix();
  return pairs;
}

// --- listener ------------------------------------------------------------

ListenerModel::ListenerModel(const GrammarSpec& g, const ModelDims& dims,
                             int latent_bits)
    : grammar(g),
      bits(latent_bits),
      embed("listener.embed", 2 * static_cast<Index>(latent_bits),
            dims.listener_embed),
      lstm("listener.lstm", dims.listener_embed, dims.listener_hidden),
      head_w("listener.head_w", g.alphabet_size(), dims.listener_hidden),
      head_b("listener.head_b", g.alphabet_size(), 1) {
  if (latent_bits < 1)
    throw std::invalid_argument("ListenerModel: latent_bits must be >= 1");
}

std::vector<ad::ParamTensor*> ListenerModel::params() {
  return {&embed, &lstm.w_input, &lstm.w_hidden, &lstm.bias, &head_w, &head_b};
}

void ListenerModel::init_params(Rng& rng) {
  init_uniform(embed, 1.0 / std::sqrt(static_cast<double>(embed.value.cols())),
               rng);
  init_uniform(lstm.w_input,
               1.0 / std::sqrt(static_cast<double>(lstm.w_input.value.cols())),
               rng);
  init_uniform(lstm.w_hidden,
               1.0 / std::sqrt(static_cast<double>(lstm.w_hidden.value.cols())),
               rng);
  lstm.bias.value.setZero();
  init_uniform(head_w, 1.0 / std::sqrt(static_cast<double>(head_w.value.cols())),
               rng);
  head_b.value.setZero();
}

std::vector<ad::Var> ListenerModel::forward(ad::Tape& t,
                                            const std::vector<ad::Var>& z_bits) {
  if (static_cast<int>(z_bits.size()) != bits)
    throw std::invalid_argument("listener forward: expected " +
                                std::to_string(bits) + " bits, got " +
                                std::to_string(z_bits.size()));
  ad::Var agg = ad::embed_pair_sum(t, embed, z_bits);
  const Index batch = t.value(agg).cols();
  const Index hd = lstm.hidden_dim();
  ad::LstmState state{ad::leaf(t, Mat::Zero(hd, batch)),
                      ad::leaf(t, Mat::Zero(hd, batch))};
  std::vector<ad::Var> dists;
  dists.reserve(grammar.num_concepts);
  for (int j = 0; j < grammar.num_concepts; ++j) {
    state = ad::lstm_cell(t, lstm, agg, state);
    ad::Var logits = ad::affine(t, head_w, head_b, state.h);
    dists.push_back(ad::softmax_cols(t, logits));
  }
  return dists;
}

std::vector<Mat> ListenerModel::dist_batch(const Mat& zbits) const {
  if (zbits.rows() != bits)
    throw std::invalid_argument("listener: message has " +
                                std::to_string(zbits.rows()) +
                                " bits, model expects " + std::to_string(bits));
  const Index batch = zbits.cols();
  Mat agg = Mat::Zero(embed.value.cols(), batch);
  for (int t = 0; t < bits; ++t) {
    const auto z = zbits.row(t).array();
    agg.noalias() += embed.value.row(2 * t).transpose() * (1.0 - z).matrix();
    agg.noalias() += embed.value.row(2 * t + 1).transpose() * z.matrix();
  }
  const Index hd = lstm.hidden_dim();
  Mat h = Mat::Zero(hd, batch);
  Mat c = Mat::Zero(hd, batch);
  std::vector<Mat> dists;
  dists.reserve(grammar.num_concepts);
  for (int j = 0; j < grammar.num_concepts; ++j) {
    lstm_step_values(lstm, agg, h, c);
    const Mat logits = (head_w.value * h).colwise() + head_b.value.col(0);
    dists.push_back(softmax_cols_values(logits));
  }
  return dists;
}

std::vector<Vec> ListenerModel::dists(const Message& z) const {
  Mat zbits(bits, 1);
  if (static_cast<int>(z.bits.size()) != bits)
    throw std::invalid_argument("listener: wrong message length");
  for (int t = 0; t < bits; ++t) zbits(t, 0) = z.bits[t];
  std::vector<Vec> out;
  for (const Mat& d : dist_batch(zbits)) out.push_back(d.col(0));
  return out;
}

// --- prior model -----------------------------------------------------------

PriorModel::PriorModel(int latent_bits) : logits("prior.logits", latent_bits, 1) {
  if (latent_bits < 1)
    throw std::invalid_argument("PriorModel: latent_bits must be >= 1");
}

std::vector<ad::ParamTensor*> PriorModel::params() { return {&logits}; }

Vec PriorModel::bit_prob1() const {
  return logits.value.col(0).unaryExpr(&sigmoid_value);
}

// --- bundle ------------------------------------------------------------------

VaeModel::VaeModel(const GrammarSpec& grammar, const ModelConfig& config)
    : speaker(grammar, resolve_dims(config.family, config.alpha),
              config.latent_bits, config.speaker_input_every_step),
      listener(grammar, resolve_dims(config.family, config.alpha),
               config.latent_bits),
      prior(config.latent_bits) {}

std::vector<ad::ParamTensor*> VaeModel::params() {
  std::vector<ad::ParamTensor*> all = speaker.params();
  for (auto* p : listener.params()) all.push_back(p);
  for (auto* p : prior.params()) all.push_back(p);
  return all;
}

void VaeModel::init_params(Rng& rng) {
  speaker.init_params(rng);
  listener.init_params(rng);
  prior.logits.value.setZero();
}

// --- KL -----------------------------------------------------------------

ad::Var kl_node(ad::Tape& t, const std::vector<ad::Var>& q_bits,
                ad::ParamTensor& prior_logits) {
  const auto l = static_cast<Index>(q_bits.size());
  if (prior_logits.value.rows() != l || prior_logits.value.cols() != 1)
    throw std::invalid_argument("kl_node: prior has " +
                                std::to_string(prior_logits.value.rows()) +
                                " logits for " + std::to_string(l) + " bits");
  const Index batch = t.value(q_bits[0]).cols();
  const Vec p1 = prior_logits.value.col(0).unaryExpr(&sigmoid_value);

  Mat kl = Mat::Zero(1, batch);
  for (Index bit = 0; bit < l; ++bit) {
    const Mat& q = t.value(q_bits[bit]);
    const double log_p0 = clamped_log(1.0 - p1(bit), true);
    const double log_p1 = clamped_log(p1(bit), true);
    for (Index b = 0; b < batch; ++b) {
      kl(0, b) += q(0, b) * (clamped_log(q(0, b), true) - log_p0) +
                  q(1, b) * (clamped_log(q(1, b), true) - log_p1);
    }
  }

  return t.push(std::move(kl), [q_bits, pl = &prior_logits,
                                p1](ad::Tape& t, const Mat& up) {
    Mat dlogits = Mat::Zero(p1.size(), 1);
    for (Index bit = 0; bit < static_cast<Index>(q_bits.size()); ++bit) {
      const Mat& q = t.value(q_bits[bit]);
      const double p1b = p1(bit);
      const double p0b = 1.0 - p1b;
      const double log_p0 = clamped_log(p0b, false);
      const double log_p1 = clamped_log(p1b, false);
      const double slope = p1b * p0b;  // d sigmoid / d logit
      Mat dq(2, q.cols());
      double dlam = 0.0;
      for (Index b = 0; b < q.cols(); ++b) {
        const double u = up(0, b);
        dq(0, b) = u * (clamped_log(q(0, b), false) - log_p0 +
                        (q(0, b) >= kProbFloor ? 1.0 : 0.0));
        dq(1, b) = u * (clamped_log(q(1, b), false) - log_p1 +
                        (q(1, b) >= kProbFloor ? 1.0 : 0.0));
        double d = 0.0;
        if (p0b >= kProbFloor) d += q(0, b) / p0b;
        if (p1b >= kProbFloor) d -= q(1, b) / p1b;
        dlam += u * slope * d;
      }
      t.add_grad(q_bits[bit], dq);
      dlogits(bit, 0) = dlam;
    }
    accumulate(*pl, dlogits);
  });
}

double kl_factorized_bernoulli(const Mat& q_pairs, const Vec& prior_p1) {
  if (q_pairs.cols() != 2)
    throw std::invalid_argument("kl: expected l x 2 probability pairs");
  if (q_pairs.rows() != prior_p1.size())
    throw std::invalid_argument("kl: " + std::to_string(q_pairs.rows()) +
                                " pairs vs " + std::to_string(prior_p1.size()) +
                                " prior bits");
  double kl = 0.0;
  for (Index t = 0; t < q_pairs.rows(); ++t) {
    const double p0 = 1.0 - prior_p1(t);
    const double p1 = prior_p1(t);
    kl += q_pairs(t, 0) * (clamped_log(q_pairs(t, 0), true) - clamped_log(p0, true));
    kl += q_pairs(t, 1) * (clamped_log(q_pairs(t, 1), true) - clamped_log(p1, true));
  }
  return kl;
}

double kl_factorized_bernoulli(const Mat& q_pairs, const PriorModel& prior) {
  return kl_factorized_bernoulli(q_pairs, prior.bit_prob1());
}

std::uint64_t kl_clamp_warning_count() { return g_kl_clamps.load(); }
void reset_kl_clamp_warning_count() { g_kl_clamps.store(0); }

// --- objective -----------------------------------------------------------

ElboResult elbo_loss(ad::Tape& t, VaeModel& model,
                     const std::vector<ConceptString>& batch, Rng& rng,
                     LatentMode mode, int recon_samples, double kl_weight) {
  if (batch.empty()) throw std::invalid_argument("elbo_loss: empty batch");
  if (recon_samples < 1)
    throw std::invalid_argument("elbo_loss: recon_samples must be >= 1");
  const IntMat tokens = tokens_matrix(model.speaker.grammar, batch);
  const auto batch_size = static_cast<Index>(batch.size());
  const int l = model.speaker.bits;

  std::vector<ad::Var> q_bits = model.speaker.forward(t, tokens);
  for (const ad::Var& qb : q_bits)
    if (!t.value(qb).allFinite())
      throw numerical_error("elbo_loss: speaker probabilities are not finite");

  Mat z_hard(l, batch_size);
  ad::Var recon_row;
  for (int sample = 0; sample < recon_samples; ++sample) {
    std::vector<ad::Var> z_bits;
    z_bits.reserve(l);
    for (int bit = 0; bit < l; ++bit) {
      const Mat noise = gumbel_matrix(2, batch_size, rng);
      ad::Var z = ad::gumbel_softmax(t, q_bits[bit], model.speaker.tau, noise,
                                     mode == LatentMode::hard_st);
      z_bits.push_back(z);
      if (sample == 0) {
        const Mat& q = t.value(q_bits[bit]);
        for (Index b = 0; b < batch_size; ++b) {
          const double a0 = std::log(q(0, b)) + noise(0, b);
          const double a1 = std::log(q(1, b)) + noise(1, b);
          z_hard(bit, b) = a1 > a0 ? 1.0 : 0.0;
        }
      }
    }
    std::vector<ad::Var> dists = model.listener.forward(t, z_bits);
    ad::Var sample_row;
    for (int j = 0; j < model.speaker.grammar.num_concepts; ++j) {
      std::vector<int> targets(batch_size);
      for (Index b = 0; b < batch_size; ++b) targets[b] = tokens(j, b);
      ad::Var term = ad::gather_log(t, dists[j], targets);
      sample_row = j == 0 ? term : ad::add(t, sample_row, term);
    }
    recon_row = sample == 0 ? sample_row : ad::add(t, recon_row, sample_row);
  }
  if (recon_samples > 1)
    recon_row = ad::scale(t, recon_row, 1.0 / recon_samples);

  ad::Var kl_row = kl_node(t, q_bits, model.prior.logits);
  ad::Var elbo_row = ad::axpby(t, 1.0, recon_row, -1.0, kl_row);
  ad::Var objective_row = kl_weight == 1.0
                              ? elbo_row
                              : ad::axpby(t, 1.0, recon_row, -kl_weight, kl_row);
  ad::Var loss = ad::scale(t, ad::mean_cols(t, objective_row), -1.0);

  ElboResult result;
  result.loss = loss;
  result.recon = t.value(recon_row).mean();
  result.kl = t.value(kl_row).mean();
  result.elbo = t.value(elbo_row).mean();
  result.z_bits = std::move(z_hard);

  if (!std::isfinite(result.recon))
    throw numerical_error("elbo_loss: reconstruction term is not finite");
  if (!std::isfinite(result.kl))
    throw numerical_error("elbo_loss: KL term is not finite");
  if (!std::isfinite(result.elbo))
    throw numerical_error("elbo_loss: ELBO is not finite");
  return result;
}

// --- deterministic round trip ------------------------------------------------

AutoencodeResult deterministic_autoencode(
    const BitEncoder& encoder, const StringDecoder& decoder,
    const GrammarSpec& grammar, const std::vector<ConceptString>& strings) {
  const Mat p1 = encoder.bit_prob1_batch(strings);
  Mat z = (p1.array() > 0.5).cast<double>();  // tie at 0.5 breaks to bit 0

  AutoencodeResult result;
  result.z_bits = z;
  const std::vector<Mat> dists = decoder.dist_batch(z);
  const auto batch = static_cast<Index>(strings.size());
  result.decoded.resize(batch);
  result.exact_match.resize(batch);
  for (Index b = 0; b < batch; ++b) {
    ConceptString& decoded = result.decoded[b];
    decoded.tokens.resize(grammar.num_concepts);
    for (int j = 0; j < grammar.num_concepts; ++j) {
      Index argmax = 0;
      dists[j].col(b).maxCoeff(&argmax);  // first maximum on ties
      decoded.tokens[j] = static_cast<std::int32_t>(argmax);
    }
    result.exact_match[b] = decoded == strings[b];
  }
  return result;
}

}  // namespace emlang
