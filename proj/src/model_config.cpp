#include "emlang/model_config.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace emlang {

std::string to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::A: return "A";
    case ModelFamily::B: return "B";
    case ModelFamily::D: return "D";
  }
  throw std::logic_error("unknown model family");
}

ModelFamily model_family_from_string(const std::string& name) {
  if (name == "A") return ModelFamily::A;
  if (name == "B") return ModelFamily::B;
  if (name == "D") return ModelFamily::D;
  throw std::invalid_argument("unknown model family '" + name +
                              "' (expected A, B, or D)");
}

ModelDims resolve_dims(ModelFamily family, double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("alpha must lie in (0, 1], got " +
                                std::to_string(alpha));
  ModelDims d;
  switch (family) {
    case ModelFamily::A:
      d = {.speaker_embed = 100, .speaker_hidden = 200, .speaker_proj = 300,
           .listener_embed = 300, .listener_hidden = 300};
      break;
    case ModelFamily::B:
      d = {.speaker_embed = 40, .speaker_hidden = 300, .speaker_proj = 60,
           .listener_embed = 125, .listener_hidden = 325};
      break;
    case ModelFamily::D:
      d = {.speaker_embed = 24, .speaker_hidden = 64, .speaker_proj = 48,
           .listener_embed = 48, .listener_hidden = 64};
      break;
  }
  auto scaled = [alpha](int h) {
    return std::max(1, static_cast<int>(std::lround(alpha * h)));
  };
  d.speaker_hidden = scaled(d.speaker_hidden);
  d.listener_hidden = scaled(d.listener_hidden);
  return d;
}

namespace {

std::int64_t lstm_params(std::int64_t input, std::int64_t hidden) {
  return 4 * (hidden * (input + hidden) + hidden);
}

}  // namespace

ParamCount param_count(const ModelConfig& config, const GrammarSpec& grammar) {
  const ModelDims d = resolve_dims(config.family, config.alpha);
  const std::int64_t sigma = grammar.alphabet_size();
  const std::int64_t n = grammar.num_concepts;
  const std::int64_t l = config.latent_bits;

  ParamCount pc;
  auto push = [](std::vector<ParamCount::Entry>& dest, const std::string& name,
                 std::int64_t count) {
    dest.push_back({name, count});
  };

  push(pc.speaker, "embedding", sigma * d.speaker_embed);
  push(pc.speaker, "lstm",
       lstm_params(n * d.speaker_embed, d.speaker_hidden));
  push(pc.speaker, "projection",
       static_cast<std::int64_t>(d.speaker_hidden) * d.speaker_proj +
           d.speaker_proj);
  push(pc.speaker, "head", static_cast<std::int64_t>(d.speaker_proj) * 2 + 2);

  push(pc.listener, "embedding", 2 * l * d.listener_embed);
  push(pc.listener, "lstm", lstm_params(d.listener_embed, d.listener_hidden));
  push(pc.listener, "head",
       static_cast<std::int64_t>(d.listener_hidden) * sigma + sigma);

  for (const auto& e : pc.speaker) pc.speaker_total += e.count;
  for (const auto& e : pc.listener) pc.listener_total += e.count;
  pc.prior_total = l;
  pc.temperature_total = 1;
  pc.total =
      pc.speaker_total + pc.listener_total + pc.prior_total + pc.temperature_total;
  return pc;
}

std::string ParamCount::pretty() const {
  std::ostringstream out;
  out << "speaker:\n";
  for (const auto& e : speaker)
    out << "  " << e.name << " = " << e.count << "\n";
  out << "  total = " << speaker_total << "\n";
  out << "listener:\n";
  for (const auto& e : listener)
    out << "  " << e.name << " = " << e.count << "\n";
  out << "  total = " << listener_total << "\n";
  out << "prior = " << prior_total << "\n";
  out << "temperature = " << temperature_total << "\n";
  out << "total = " << total << "\n";
  return out.str();
}

}  // namespace emlang
