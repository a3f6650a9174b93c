#include "emlang/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "emlang/ad/adam.hpp"
#include "emlang/rng.hpp"

namespace emlang::ad {

namespace {

// Relative error with an absolute floor so that near-zero gradients are not
// dominated by finite-difference noise.
double rel_err(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::vector<ParamTensor*> params, double eps,
                           long max_coords_per_param, std::uint64_t coord_seed) {
  zero_grads(params);
  const double loss_a = loss_fn();
  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (const ParamTensor* p : params) analytic.push_back(p->grad);

  zero_grads(params);
  const double loss_b = loss_fn();
  if (loss_a != loss_b)
    throw numerical_error(
        "grad_check: loss_fn is not deterministic (" +
        std::to_string(loss_a) + " vs " + std::to_string(loss_b) + ")");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (analytic[i] != params[i]->grad)
      throw numerical_error("grad_check: gradients differ across identical "
                            "evaluations for parameter '" +
                            params[i]->name + "'");

  GradCheckReport report;
  Rng rng(mix_seed(coord_seed, {0x9c0de11eULL}));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ParamTensor& p = *params[i];
    std::vector<Index> coords(p.size());
    for (Index k = 0; k < p.size(); ++k) coords[k] = k;
    if (static_cast<long>(coords.size()) > max_coords_per_param) {
      for (long k = 0; k < max_coords_per_param; ++k) {
        const auto j =
            static_cast<Index>(k + rng.below(coords.size() - k));
        std::swap(coords[k], coords[j]);
      }
      coords.resize(max_coords_per_param);
    }
    for (Index c : coords) {
      double* coeff = p.value.data() + c;
      const double saved = *coeff;
      *coeff = saved + eps;
      zero_grads(params);
      const double plus = loss_fn();
      *coeff = saved - eps;
      zero_grads(params);
      const double minus = loss_fn();
      *coeff = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = rel_err(analytic[i](c), numeric);
      ++report.coords_checked;
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_param = p.name;
        report.worst_coeff = c;
        report.analytic_at_worst = analytic[i](c);
        report.numeric_at_worst = numeric;
      }
    }
  }
  // Leave the analytic gradients in place for the caller.
  zero_grads(params);
  loss_fn();
  return report;
}

}  // namespace emlang::ad
