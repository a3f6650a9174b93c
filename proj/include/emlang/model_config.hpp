#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emlang/grammar.hpp"

namespace emlang {

// Base architectures. A and B are full-scale reference models; D is the
// desk-scale base used by the default sweep profile.
enum class ModelFamily { A, B, D };

std::string to_string(ModelFamily family);
ModelFamily model_family_from_string(const std::string& name);

struct ModelConfig {
  ModelFamily family = ModelFamily::D;
  double alpha = 1.0;  // scales LSTM hidden sizes, rounded, min 1
  int latent_bits = 8;
  bool speaker_input_every_step = true;
};

// Concrete layer sizes after applying alpha.
struct ModelDims {
  int speaker_embed = 0;
  int speaker_hidden = 0;
  int speaker_proj = 0;
  int listener_embed = 0;
  int listener_hidden = 0;
};

ModelDims resolve_dims(ModelFamily family, double alpha);

struct ParamCount {
  struct Entry {
    std::string name;
    std::int64_t count;
  };
  std::vector<Entry> speaker;
  std::vector<Entry> listener;
  std::int64_t speaker_total = 0;
  std::int64_t listener_total = 0;
  std::int64_t prior_total = 0;
  std::int64_t temperature_total = 0;
  std::int64_t total = 0;  // speaker + listener + prior + temperature

  std::string pretty() const;
};

// Exact scalar-parameter count for a configuration, by closed form. Tests
// verify it equals the allocated tensor sizes.
ParamCount param_count(const ModelConfig& config, const GrammarSpec& grammar);

}  // namespace emlang
