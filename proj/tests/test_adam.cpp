#include <doctest.h>

#include <cmath>

#include "emlang/ad/adam.hpp"
#include "emlang/ad/tape.hpp"

using namespace emlang;
using namespace emlang::ad;

namespace {

AdamConfig plain(double lr, double wd = 0.0) {
  AdamConfig c;
  c.lr = lr;
  c.weight_decay = wd;
  return c;
}

}  // namespace

TEST_CASE("first adam step moves by about -lr * sign(g)") {
  ParamTensor theta("theta", 1, 1);
  theta.value(0, 0) = 0.0;
  theta.grad(0, 0) = 4.0;
  theta.grad_fresh = true;
  AdamState adam({&theta}, plain(0.1));
  adam.step();
  CHECK(theta.value(0, 0) == doctest::Approx(-0.1).epsilon(1e-7));
}

TEST_CASE("lr = 0 leaves parameters unchanged") {
  ParamTensor theta("theta", 2, 2);
  theta.value.setConstant(1.23);
  theta.grad.setConstant(5.0);
  theta.grad_fresh = true;
  AdamState adam({&theta}, plain(0.0));
  adam.step();
  CHECK(theta.value.isApproxToConstant(1.23));
}

TEST_CASE("three-step trajectory on f(theta) = theta^2 matches a hand oracle") {
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ParamTensor theta("theta", 1, 1);
  theta.value(0, 0) = 1.0;
  AdamConfig config;
  config.lr = lr;
  config.weight_decay = 0.0;
  AdamState adam({&theta}, config);

  // Independent scalar recomputation of the update rule.
  double ref = 1.0, m = 0.0, v = 0.0;
  for (int step = 1; step <= 3; ++step) {
    const double g_ref = 2.0 * ref;
    m = b1 * m + (1 - b1) * g_ref;
    v = b2 * v + (1 - b2) * g_ref * g_ref;
    const double m_hat = m / (1 - std::pow(b1, step));
    const double v_hat = v / (1 - std::pow(b2, step));
    ref -= lr * m_hat / (std::sqrt(v_hat) + eps);

    theta.grad(0, 0) = 2.0 * theta.value(0, 0);
    theta.grad_fresh = true;
    adam.step();
    CHECK(theta.value(0, 0) == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("weight decay adds wd * theta to the gradient before the moments") {
  ParamTensor a("a", 1, 1), b("b", 1, 1);
  a.value(0, 0) = b.value(0, 0) = 2.0;

  AdamState plain_adam({&a}, plain(0.01, 0.0));
  AdamState wd_adam({&b}, plain(0.01, 0.1));

  a.grad(0, 0) = 1.0 + 0.1 * 2.0;  // decay folded in by hand
  a.grad_fresh = true;
  plain_adam.step();
  b.grad(0, 0) = 1.0;
  b.grad_fresh = true;
  wd_adam.step();
  CHECK(a.value(0, 0) == doctest::Approx(b.value(0, 0)).epsilon(1e-14));
}

TEST_CASE("decoupled decay shrinks the parameter instead") {
  ParamTensor theta("theta", 1, 1);
  theta.value(0, 0) = 2.0;
  AdamConfig config = plain(0.1, 0.5);
  config.decoupled_weight_decay = true;
  AdamState adam({&theta}, config);
  theta.grad(0, 0) = 4.0;
  theta.grad_fresh = true;
  adam.step();
  // Plain step to ~1.9, then multiplied by (1 - lr * wd) = 0.95.
  CHECK(theta.value(0, 0) == doctest::Approx(1.9 * 0.95).epsilon(1e-6));
}

TEST_CASE("stale or NaN gradients are rejected") {
  ParamTensor theta("theta", 1, 1);
  AdamState adam({&theta}, plain(0.1));
  CHECK_THROWS_WITH_AS(adam.step(), doctest::Contains("stale"),
                       numerical_error);

  theta.grad(0, 0) = std::nan("");
  theta.grad_fresh = true;
  CHECK_THROWS_WITH_AS(adam.step(), doctest::Contains("non-finite"),
                       numerical_error);
}

TEST_CASE("adam trajectories are deterministic") {
  auto run = [](std::vector<double>* out) {
    ParamTensor theta("theta", 2, 1);
    theta.value << 0.5, -0.25;
    AdamState adam({&theta}, plain(0.03, 1e-4));
    for (int step = 0; step < 25; ++step) {
      theta.grad = 2.0 * theta.value;
      theta.grad_fresh = true;
      adam.step();
    }
    out->push_back(theta.value(0, 0));
    out->push_back(theta.value(1, 0));
  };
  std::vector<double> a, b;
  run(&a);
  run(&b);
  CHECK(a == b);  // bitwise
}
