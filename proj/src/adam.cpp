#include "emlang/ad/adam.hpp"

#include <cmath>

namespace emlang::ad {

AdamState::AdamState(std::vector<ParamTensor*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const ParamTensor* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamState::step() {
  for (const ParamTensor* p : params_) {
    if (!p->grad_fresh)
      throw numerical_error("adam_step: stale gradient for parameter '" +
                            p->name + "'");
    if (!p->grad.allFinite())
      throw numerical_error("adam_step: non-finite gradient for parameter '" +
                            p->name + "'");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ParamTensor& p = *params_[i];
    Mat g = p.grad;
    if (!config_.decoupled_weight_decay && config_.weight_decay != 0.0 &&
        !p.decay_exempt)
      g += config_.weight_decay * p.value;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    const Mat m_hat = m_[i] / bc1;
    const Mat v_hat = v_[i] / bc2;
    p.value.array() -=
        config_.lr * m_hat.array() / (v_hat.array().sqrt() + config_.eps);
    if (config_.decoupled_weight_decay && config_.weight_decay != 0.0 &&
        !p.decay_exempt)
      p.value -= config_.lr * config_.weight_decay * p.value;
    p.grad_fresh = false;
  }
}

void zero_grads(std::vector<ParamTensor*>& params) {
  for (ParamTensor* p : params) p->zero_grad();
}

}  // namespace emlang::ad
