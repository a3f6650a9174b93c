#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emlang/ad/tape.hpp"

namespace emlang::ad {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  Index worst_coeff = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  long coords_checked = 0;
  bool passed(double tol) const { return max_rel_err < tol; }
};

// Central finite differences against the gradients populated by `loss_fn`.
// loss_fn must run a full forward/backward into the given parameters and
// return the loss value; it must be deterministic (frozen noise) — the checker
// evaluates it twice up front and errors if the two runs disagree.
// Per parameter, up to `max_coords_per_param` coordinates are probed (all of
// them when the tensor is smaller); subsampling is seeded and reproducible.
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::vector<ParamTensor*> params, double eps,
                           long max_coords_per_param = 100,
                           std::uint64_t coord_seed = 0);

}  // namespace emlang::ad
