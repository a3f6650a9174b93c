#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emlang/model.hpp"

namespace emlang {

struct MetricsReport {
  double precision = 0.0;
  double precision_se = 0.0;
  double recall = 0.0;  // mean per-string log-prob proxy, nats
  double acc_train = 0.0;
  double acc_val = 0.0;
  double acc_test = 0.0;
  double residual_entropy = 1.0;
  std::vector<int> partition;  // bit index -> concept block
  long n_precision = 0;
  long m_recall = 0;
  int k_recall = 1;
};

struct PrecisionEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_samples = 0;
};

// Fraction of prior samples whose deterministic decode is a member of L*.
PrecisionEstimate precision_mc(const LatentPrior& prior,
                               const StringDecoder& decoder,
                               const GrammarSpec& grammar, long n_samples,
                               Rng& rng);

// Mean per-string log-probability proxy over `strings`. K = 1 is the plain
// single-sample ELBO with analytic KL; K > 1 is the importance-weighted
// estimate log(1/K sum_k p(s, z_k) / q(z_k | s)).
double recall_mc(const BitEncoder& encoder, const StringDecoder& decoder,
                 const LatentPrior& prior, const GrammarSpec& grammar,
                 const std::vector<ConceptString>& strings, int k_samples,
                 Rng& rng);

// Fraction of strings that deterministically round-trip.
double accuracy(const BitEncoder& encoder, const StringDecoder& decoder,
                const GrammarSpec& grammar,
                const std::vector<ConceptString>& split);

// Plug-in empirical H(C | z[block]) in nats.
double conditional_entropy(const std::vector<Message>& messages,
                           const std::vector<int>& concept_values,
                           const std::vector<int>& block);

enum class PartitionStrategy { exhaustive, greedy };

struct ResidualEntropyResult {
  double value = 1.0;
  std::vector<int> bit_to_concept;  // length l, entries in [0, N)
};

ResidualEntropyResult residual_entropy_from_messages(
    const std::vector<Message>& messages,
    const std::vector<std::vector<std::int32_t>>& concept_values,
    int num_concepts, int values_per_concept, PartitionStrategy strategy);

// Messages come from the deterministic (argmax) encoding of eval_strings.
ResidualEntropyResult residual_entropy(const BitEncoder& encoder,
                                       const GrammarSpec& grammar,
                                       const std::vector<ConceptString>& eval_strings,
                                       PartitionStrategy strategy);

// Fraction of seeds whose final train accuracy clears the threshold.
double efficacy(const std::vector<double>& final_train_accuracies,
                double threshold = 0.99);

}  // namespace emlang
