#include <doctest.h>

#include <cmath>

#include "emlang/ad/grad_check.hpp"
#include "emlang/ad/tape.hpp"
#include "emlang/rng.hpp"

using namespace emlang;
using namespace emlang::ad;

namespace {

void fill_random(ParamTensor& p, Rng& rng, double scale = 0.5) {
  for (Index i = 0; i < p.value.size(); ++i)
    p.value.data()[i] = rng.uniform(-scale, scale);
}

// Straight-line LSTM cell written independently of the tape ops.
void lstm_oracle(const Mat& wx, const Mat& wh, const Vec& b, const Vec& x,
                 const Vec& h, const Vec& c, Vec& h_next, Vec& c_next) {
  const Index hd = wh.cols();
  const Vec gates = wx * x + wh * h + b;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  h_next.resize(hd);
  c_next.resize(hd);
  for (Index k = 0; k < hd; ++k) {
    const double i = sig(gates(k));
    const double f = sig(gates(hd + k));
    const double g = std::tanh(gates(2 * hd + k));
    const double o = sig(gates(3 * hd + k));
    c_next(k) = f * c(k) + i * g;
    h_next(k) = o * std::tanh(c_next(k));
  }
}

}  // namespace

TEST_CASE("affine identity and scalar cases") {
  Tape t;
  ParamTensor w("w", 2, 2), b("b", 2, 1);
  w.value.setIdentity();
  Mat x(2, 1);
  x << 3, 4;
  Var y = affine(t, w, b, leaf(t, x));
  CHECK(t.value(y)(0, 0) == 3.0);
  CHECK(t.value(y)(1, 0) == 4.0);
  t.reset();

  ParamTensor w1("w1", 1, 1), b1("b1", 1, 1);
  w1.value(0, 0) = 2.0;
  b1.value(0, 0) = 1.0;
  Var y1 = affine(t, w1, b1, leaf(t, Mat::Constant(1, 1, 3.0)));
  CHECK(t.value(y1)(0, 0) == 7.0);
}

TEST_CASE("affine rejects mismatched shapes") {
  Tape t;
  ParamTensor w("w", 2, 3), b("b", 2, 1);
  Var x = leaf(t, Mat::Zero(2, 1));
  CHECK_THROWS_WITH_AS(affine(t, w, b, x), doctest::Contains("2x3"),
                       std::invalid_argument);
}

TEST_CASE("affine gradients match finite differences") {
  Rng rng(11);
  ParamTensor w("w", 3, 4), b("b", 3, 1), x("x", 4, 2);
  fill_random(w, rng);
  fill_random(b, rng);
  fill_random(x, rng);
  Tape t;
  auto loss_fn = [&]() {
    t.reset();
    Var y = affine(t, w, b, param_node(t, x));
    Var loss = sum_all(t, cmul(t, y, y));
    const double value = t.scalar(loss);
    t.backward(loss);
    return value;
  };
  const auto report = grad_check(loss_fn, {&w, &b, &x}, 1e-5, 1000, 1);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("elementwise and softmax gradients match finite differences") {
  Rng rng(12);
  ParamTensor a("a", 4, 3), b("b", 4, 3);
  fill_random(a, rng, 1.0);
  fill_random(b, rng, 1.0);
  Tape t;
  auto loss_fn = [&]() {
    t.reset();
    Var av = param_node(t, a);
    Var bv = param_node(t, b);
    Var mix = axpby(t, 0.7, sigmoid(t, av), -1.3, tanh_act(t, bv));
    Var sm = softmax_cols(t, cmul(t, mix, av));
    Var top = rows(t, sm, 1, 2);
    Var loss = sum_all(t, cmul(t, top, top));
    const double value = t.scalar(loss);
    t.backward(loss);
    return value;
  };
  const auto report = grad_check(loss_fn, {&a, &b}, 1e-5, 1000, 2);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("gather_log and mean_cols gradients") {
  Rng rng(13);
  ParamTensor a("a", 5, 3);
  fill_random(a, rng, 1.0);
  const std::vector<int> picks{2, 0, 4};
  Tape t;
  auto loss_fn = [&]() {
    t.reset();
    Var sm = softmax_cols(t, param_node(t, a));
    Var row = gather_log(t, sm, picks);
    Var loss = mean_cols(t, row);
    const double value = t.scalar(loss);
    t.backward(loss);
    return value;
  };
  const auto report = grad_check(loss_fn, {&a}, 1e-5, 1000, 3);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("embedding ops gradients") {
  Rng rng(14);
  ParamTensor table("table", 6, 3);
  fill_random(table, rng, 1.0);
  IntMat tokens(2, 2);
  tokens << 1, 4, 3, 1;  // token 1 repeats: accumulation must sum
  Tape t;
  auto loss_fn = [&]() {
    t.reset();
    Var emb = embed_concat(t, table, tokens);
    Var loss = sum_all(t, cmul(t, emb, emb));
    const double value = t.scalar(loss);
    t.backward(loss);
    return value;
  };
  const auto report = grad_check(loss_fn, {&table}, 1e-5, 1000, 4);
  CHECK(report.max_rel_err < 1e-6);

  ParamTensor pair_table("pairs", 4, 3);  // 2 bits
  ParamTensor logits("logits", 4, 2);
  fill_random(pair_table, rng, 1.0);
  fill_random(logits, rng, 1.0);
  auto loss_fn2 = [&]() {
    t.reset();
    Var lg = param_node(t, logits);
    std::vector<Var> bits{softmax_cols(t, rows(t, lg, 0, 2)),
                          softmax_cols(t, rows(t, lg, 2, 2))};
    Var agg = embed_pair_sum(t, pair_table, bits);
    Var loss = sum_all(t, cmul(t, agg, agg));
    const double value = t.scalar(loss);
    t.backward(loss);
    return value;
  };
  const auto report2 = grad_check(loss_fn2, {&pair_table, &logits}, 1e-5, 1000, 5);
  CHECK(report2.max_rel_err < 1e-6);
}

TEST_CASE("lstm_cell zero fixed point") {
  LstmParams p("lstm", 3, 2);
  Tape t;
  LstmState s{leaf(t, Mat::Zero(2, 1)), leaf(t, Mat::Zero(2, 1))};
  LstmState next = lstm_cell(t, p, leaf(t, Mat::Zero(3, 1)), s);
  CHECK(t.value(next.h).isZero(0.0));
  CHECK(t.value(next.c).isZero(0.0));
}

TEST_CASE("lstm_cell saturated forget gate preserves the cell state") {
  LstmParams p("lstm", 3, 2);
  p.bias.value.block(0, 0, 2, 1).setConstant(-30.0);  // input gate ~ 0
  p.bias.value.block(2, 0, 2, 1).setConstant(30.0);   // forget gate ~ 1
  Tape t;
  Mat c0(2, 1);
  c0 << 0.37, -1.25;
  LstmState s{leaf(t, Mat::Zero(2, 1)), leaf(t, c0)};
  LstmState next = lstm_cell(t, p, leaf(t, Mat::Zero(3, 1)), s);
  CHECK((t.value(next.c) - c0).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("lstm_cell agrees with a straight-line oracle") {
  Rng rng(15);
  LstmParams p("lstm", 4, 3);
  fill_random(p.w_input, rng, 0.8);
  fill_random(p.w_hidden, rng, 0.8);
  fill_random(p.bias, rng, 0.8);
  Vec x(4), h(3), c(3);
  for (Index i = 0; i < 4; ++i) x(i) = rng.uniform(-1, 1);
  for (Index i = 0; i < 3; ++i) h(i) = rng.uniform(-1, 1);
  for (Index i = 0; i < 3; ++i) c(i) = rng.uniform(-1, 1);

  Tape t;
  LstmState s{leaf(t, h), leaf(t, c)};
  LstmState next = lstm_cell(t, p, leaf(t, x), s);

  Vec h_ref, c_ref;
  lstm_oracle(p.w_input.value, p.w_hidden.value, p.bias.value.col(0), x, h, c,
              h_ref, c_ref);
  CHECK((t.value(next.h).col(0) - h_ref).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((t.value(next.c).col(0) - c_ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lstm_cell gradients match finite differences") {
  Rng rng(16);
  LstmParams p("lstm", 3, 2);
  ParamTensor x("x", 3, 2), h0("h0", 2, 2), c0("c0", 2, 2);
  fill_random(p.w_input, rng);
  fill_random(p.w_hidden, rng);
  fill_random(p.bias, rng);
  fill_random(x, rng);
  fill_random(h0, rng);
  fill_random(c0, rng);
  Tape t;
  auto loss_fn = [&]() {
    t.reset();
    LstmState s{param_node(t, h0), param_node(t, c0)};
    LstmState n1 = lstm_cell(t, p, param_node(t, x), s);
    LstmState n2 = lstm_cell(t, p, param_node(t, x), n1);  // two chained steps
    Var loss = sum_all(t, cmul(t, n2.h, n2.h));
    const double value = t.scalar(loss);
    t.backward(loss);
    return value;
  };
  const auto report = grad_check(
      loss_fn, {&p.w_input, &p.w_hidden, &p.bias, &x, &h0, &c0}, 1e-5, 1000, 6);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("backward bookkeeping") {
  Tape t;
  // loss = sum(2x) -> dx = 2 everywhere.
  ParamTensor x("x", 3, 2);
  x.value.setConstant(1.5);
  Var loss = sum_all(t, scale(t, param_node(t, x), 2.0));
  t.backward(loss);
  CHECK(x.grad.isApproxToConstant(2.0));
  CHECK(x.grad_fresh);

  // sigmoid'(0) = 0.25.
  ParamTensor z("z", 1, 1);
  t.reset();
  x.zero_grad();
  Var s = sum_all(t, sigmoid(t, param_node(t, z)));
  t.backward(s);
  CHECK(z.grad(0, 0) == doctest::Approx(0.25).epsilon(1e-12));

  // Reusing a node accumulates both paths.
  ParamTensor y("y", 1, 1);
  y.value(0, 0) = 3.0;
  t.reset();
  Var yn = param_node(t, y);
  Var both = add(t, yn, yn);
  Var l2 = sum_all(t, both);
  t.backward(l2);
  CHECK(y.grad(0, 0) == 2.0);
}

TEST_CASE("backward error paths") {
  Tape t;
  CHECK_THROWS_AS(t.backward(Var{0}), std::logic_error);

  Var v = leaf(t, Mat::Zero(2, 2));
  CHECK_THROWS_AS(t.backward(v), std::logic_error);  // non-scalar loss

  t.reset();
  Var nan_loss = leaf(t, Mat::Constant(1, 1, std::nan("")));
  CHECK_THROWS_AS(t.backward(nan_loss), numerical_error);

  t.reset();
  Var fine = sum_all(t, leaf(t, Mat::Ones(2, 2)));
  t.backward(fine);
  // The tape is consumed; a second sweep has no forward to walk.
  CHECK_THROWS_AS(t.backward(fine), std::logic_error);
}

TEST_CASE("grad_check detects nondeterministic losses") {
  ParamTensor x("x", 1, 1);
  x.value(0, 0) = 1.0;
  Tape t;
  int calls = 0;
  auto loss_fn = [&]() {
    t.reset();
    Var v = param_node(t, x);
    Var loss = sum_all(t, scale(t, v, 1.0 + 0.001 * calls++));
    const double value = t.scalar(loss);
    t.backward(loss);
    return value;
  };
  CHECK_THROWS_AS(grad_check(loss_fn, {&x}, 1e-5, 10, 7), numerical_error);
}

TEST_CASE("grad_check quadratic sanity") {
  // f(x) = x^2 at x = 3: analytic 6 vs numeric 6.
  ParamTensor x("x", 1, 1);
  x.value(0, 0) = 3.0;
  Tape t;
  auto loss_fn = [&]() {
    t.reset();
    Var v = param_node(t, x);
    Var loss = sum_all(t, cmul(t, v, v));
    const double value = t.scalar(loss);
    t.backward(loss);
    return value;
  };
  const auto report = grad_check(loss_fn, {&x}, 1e-5, 10, 8);
  CHECK(report.max_rel_err < 1e-9);
  CHECK(x.grad(0, 0) == doctest::Approx(6.0));
}
