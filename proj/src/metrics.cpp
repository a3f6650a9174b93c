#include "emlang/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace emlang {

namespace {

constexpr std::uint64_t kExhaustiveGuard = 10'000'000;
constexpr int kExhaustiveMaxBits = 20;

double entropy_from_counts(const std::unordered_map<std::int32_t, long>& counts,
                           long total) {
  double h = 0.0;
  for (const auto& [value, count] : counts) {
    const double p = static_cast<double>(count) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return h;
}

ConceptString decode_argmax(const std::vector<Mat>& dists, Index col) {
  ConceptString s;
  s.tokens.resize(dists.size());
  for (std::size_t j = 0; j < dists.size(); ++j) {
    Index argmax = 0;
    dists[j].col(col).maxCoeff(&argmax);
    s.tokens[j] = static_cast<std::int32_t>(argmax);
  }
  return s;
}

double logsumexp(const std::vector<double>& xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

// Plug-in H(C_i | z[mask]) over packed messages, memoized per concept.
class EntropyTable {
 public:
  EntropyTable(const std::vector<std::uint64_t>& packed,
               const std::vector<std::vector<std::int32_t>>& concepts,
               int num_concepts)
      : packed_(packed), concepts_(concepts) {
    memo_.resize(num_concepts);
  }

  double conditional(int concept_idx, std::uint64_t mask) {
    auto& memo = memo_[concept_idx];
    if (auto it = memo.find(mask); it != memo.end()) return it->second;

    std::unordered_map<std::uint64_t,
                       std::pair<long, std::unordered_map<std::int32_t, long>>>
        groups;
    for (std::size_t s = 0; s < packed_.size(); ++s) {
      auto& [n, counts] = groups[packed_[s] & mask];
      ++n;
      ++counts[concepts_[s][concept_idx]];
    }
    double h = 0.0;
    const auto total = static_cast<double>(packed_.size());
    for (const auto& [key, group] : groups)
      h += (static_cast<double>(group.first) / total) *
           entropy_from_counts(group.second, group.first);
    memo.emplace(mask, h);
    return h;
  }

 private:
  const std::vector<std::uint64_t>& packed_;
  const std::vector<std::vector<std::int32_t>>& concepts_;
  std::vector<std::unordered_map<std::uint64_t, double>> memo_;
};

}  // namespace

PrecisionEstimate precision_mc(const LatentPrior& prior,
                               const StringDecoder& decoder,
                               const GrammarSpec& grammar, long n_samples,
                               Rng& rng) {
  if (n_samples < 1)
    throw std::invalid_argument("precision_mc: n_samples must be >= 1");
  constexpr Index kChunk = 1024;
  long members = 0;
  long remaining = n_samples;
  while (remaining > 0) {
    const Index n = std::min<long>(remaining, kChunk);
    const Mat z = prior.sample_bits(n, rng);
    const std::vector<Mat> dists = decoder.dist_batch(z);
    for (Index b = 0; b < n; ++b)
      if (is_member(grammar, decode_argmax(dists, b))) ++members;
    remaining -= n;
  }
  PrecisionEstimate est;
  est.n_samples = n_samples;
  est.value = static_cast<double>(members) / static_cast<double>(n_samples);
  est.std_error =
      std::sqrt(est.value * (1.0 - est.value) / static_cast<double>(n_samples));
  return est;
}

double recall_mc(const BitEncoder& encoder, const StringDecoder& decoder,
                 const LatentPrior& prior, const GrammarSpec& grammar,
                 const std::vector<ConceptString>& strings, int k_samples,
                 Rng& rng) {
  if (strings.empty()) throw std::invalid_argument("recall_mc: no strings");
  if (k_samples < 1)
    throw std::invalid_argument("recall_mc: k_samples must be >= 1");
  const int l = encoder.latent_bits();
  const Mat q_all = encoder.bit_prob1_batch(strings);  // validates membership

  double total = 0.0;
  for (std::size_t m = 0; m < strings.size(); ++m) {
    const Vec q1 = q_all.col(static_cast<Index>(m));
    Mat z(l, k_samples);
    for (int k = 0; k < k_samples; ++k)
      for (int t = 0; t < l; ++t)
        z(t, k) = rng.bernoulli(q1(t)) ? 1.0 : 0.0;
    const std::vector<Mat> dists = decoder.dist_batch(z);

    std::vector<double> log_g(k_samples, 0.0);
    for (int j = 0; j < grammar.num_concepts; ++j)
      for (int k = 0; k < k_samples; ++k)
        log_g[k] += std::log(dists[j](strings[m].tokens[j], k));

    if (k_samples == 1) {
      Mat q_pairs(l, 2);
      q_pairs.col(1) = q1;
      q_pairs.col(0) = (1.0 - q1.array()).matrix();
      total += log_g[0] - kl_factorized_bernoulli(q_pairs, prior.bit_prob1());
    } else {
      std::vector<double> log_w(k_samples);
      for (int k = 0; k < k_samples; ++k) {
        const Message zk = message_from_col(z, k);
        double log_q = 0.0;
        for (int t = 0; t < l; ++t)
          log_q += std::log(zk.bits[t] ? q1(t) : 1.0 - q1(t));
        log_w[k] = log_g[k] + prior.logprob(zk) - log_q;
      }
      total += logsumexp(log_w) - std::log(static_cast<double>(k_samples));
    }
  }
  return total / static_cast<double>(strings.size());
}

double accuracy(const BitEncoder& encoder, const StringDecoder& decoder,
                const GrammarSpec& grammar,
                const std::vector<ConceptString>& split) {
  if (split.empty()) throw std::invalid_argument("accuracy: empty split");
  const AutoencodeResult result =
      deterministic_autoencode(encoder, decoder, grammar, split);
  long matches = 0;
  for (const bool ok : result.exact_match) matches += ok ? 1 : 0;
  return static_cast<double>(matches) / static_cast<double>(split.size());
}

double conditional_entropy(const std::vector<Message>& messages,
                           const std::vector<int>& concept_values,
                           const std::vector<int>& block) {
  if (messages.empty())
    throw std::invalid_argument("conditional_entropy: empty input");
  if (messages.size() != concept_values.size())
    throw std::invalid_argument("conditional_entropy: length mismatch");
  const auto l = messages[0].bits.size();
  std::uint64_t mask = 0;
  for (int t : block) {
    if (t < 0 || static_cast<std::size_t>(t) >= l || l > 64)
      throw std::invalid_argument("conditional_entropy: bad block index");
    mask |= (std::uint64_t{1} << t);
  }
  std::unordered_map<std::uint64_t,
                     std::pair<long, std::unordered_map<std::int32_t, long>>>
      groups;
  for (std::size_t s = 0; s < messages.size(); ++s) {
    if (messages[s].bits.size() != l)
      throw std::invalid_argument("conditional_entropy: ragged messages");
    auto& [n, counts] = groups[pack_bits(messages[s]) & mask];
    ++n;
    ++counts[concept_values[s]];
  }
  double h = 0.0;
  const auto total = static_cast<double>(messages.size());
  for (const auto& [key, group] : groups)
    h += (static_cast<double>(group.first) / total) *
         entropy_from_counts(group.second, group.first);
  return h;
}

ResidualEntropyResult residual_entropy_from_messages(
    const std::vector<Message>& messages,
    const std::vector<std::vector<std::int32_t>>& concept_values,
    int num_concepts, int values_per_concept, PartitionStrategy strategy) {
  if (messages.empty())
    throw std::invalid_argument("residual_entropy: empty input");
  if (messages.size() != concept_values.size())
    throw std::invalid_argument("residual_entropy: length mismatch");
  const int l = static_cast<int>(messages[0].bits.size());
  if (l < 1 || l > 64)
    throw std::invalid_argument("residual_entropy: bits must be in [1, 64]");

  std::vector<std::uint64_t> packed;
  packed.reserve(messages.size());
  for (const Message& z : messages) {
    if (static_cast<int>(z.bits.size()) != l)
      throw std::invalid_argument("residual_entropy: ragged messages");
    packed.push_back(pack_bits(z));
  }

  EntropyTable table(packed, concept_values, num_concepts);
  const double h_star = std::log(static_cast<double>(values_per_concept));
  const auto n = static_cast<double>(num_concepts);

  auto score = [&](const std::vector<std::uint64_t>& masks) {
    double re = 0.0;
    for (int i = 0; i < num_concepts; ++i)
      re += table.conditional(i, masks[i]) / h_star;
    return re / n;
  };

  ResidualEntropyResult result;
  if (strategy == PartitionStrategy::exhaustive) {
    std::uint64_t assignments = 1;
    for (int t = 0; t < l; ++t) {
      assignments *= static_cast<std::uint64_t>(num_concepts);
      if (assignments > kExhaustiveGuard || l > kExhaustiveMaxBits)
        throw std::invalid_argument(
            "residual_entropy: exhaustive search over " +
            std::to_string(num_concepts) + "^" + std::to_string(l) +
            " partitions exceeds the guard; use the greedy strategy");
    }
    std::vector<int> assign(l, 0);
    std::vector<std::uint64_t> masks(num_concepts, 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_assign;
    for (std::uint64_t a = 0; a < assignments; ++a) {
      std::fill(masks.begin(), masks.end(), 0);
      for (int t = 0; t < l; ++t)
        masks[assign[t]] |= (std::uint64_t{1} << t);
      const double re = score(masks);
      if (re < best) {
        best = re;
        best_assign = assign;
      }
      for (int t = 0; t < l; ++t) {  // odometer, bit 0 fastest
        if (++assign[t] < num_concepts) break;
        assign[t] = 0;
      }
    }
    result.value = best;
    result.bit_to_concept = std::move(best_assign);
  } else {
    std::vector<double> marginal(num_concepts);
    for (int i = 0; i < num_concepts; ++i) marginal[i] = table.conditional(i, 0);
    std::vector<int> assign(l, 0);
    for (int t = 0; t < l; ++t) {
      const std::uint64_t bit_mask = std::uint64_t{1} << t;
      double best_mi = -1.0;
      for (int i = 0; i < num_concepts; ++i) {
        const double mi = marginal[i] - table.conditional(i, bit_mask);
        if (mi > best_mi + 1e-12) {  // ties go to the lowest concept
          best_mi = mi;
          assign[t] = i;
        }
      }
    }
    std::vector<std::uint64_t> masks(num_concepts, 0);
    for (int t = 0; t < l; ++t)
      masks[assign[t]] |= (std::uint64_t{1} << t);
    result.value = score(masks);
    result.bit_to_concept = std::move(assign);
  }
  return result;
}

ResidualEntropyResult residual_entropy(const BitEncoder& encoder,
                                       const GrammarSpec& grammar,
                                       const std::vector<ConceptString>& eval_strings,
                                       PartitionStrategy strategy) {
  const Mat p1 = encoder.bit_prob1_batch(eval_strings);
  std::vector<Message> messages;
  std::vector<std::vector<std::int32_t>> values;
  messages.reserve(eval_strings.size());
  values.reserve(eval_strings.size());
  for (std::size_t b = 0; b < eval_strings.size(); ++b) {
    Message z;
    z.bits.resize(p1.rows());
    for (Index t = 0; t < p1.rows(); ++t)
      z.bits[t] = p1(t, static_cast<Index>(b)) > 0.5 ? 1 : 0;
    messages.push_back(std::move(z));
    values.push_back(concepts_of(grammar, eval_strings[b]));
  }
  return residual_entropy_from_messages(messages, values, grammar.num_concepts,
                                        grammar.values_per_concept, strategy);
}

double efficacy(const std::vector<double>& final_train_accuracies,
                double threshold) {
  if (final_train_accuracies.empty())
    throw std::invalid_argument("efficacy: need at least one seed");
  long solved = 0;
  for (double acc : final_train_accuracies)
    if (acc >= threshold) ++solved;
  return static_cast<double>(solved) /
         static_cast<double>(final_train_accuracies.size());
}

}  // namespace emlang
