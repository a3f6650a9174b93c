#pragma once

#include <vector>

#include "emlang/ad/tape.hpp"

namespace emlang::ad {

struct AdamConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  // Classic coupled decay adds wd*theta to the gradient before the moment
  // updates; the decoupled variant subtracts lr*wd*theta from the parameter.
  bool decoupled_weight_decay = false;
};

class AdamState {
 public:
  AdamState(std::vector<ParamTensor*> params, AdamConfig config);

  // One update over all parameters; requires fresh, finite gradients.
  void step();

  long step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }
  std::vector<ParamTensor*>& params() { return params_; }

 private:
  std::vector<ParamTensor*> params_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  AdamConfig config_;
  long t_ = 0;
};

void zero_grads(std::vector<ParamTensor*>& params);

}  // namespace emlang::ad
