#include "emlang/ad/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace emlang::ad {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) +
              " vs " + shape_str(b.rows(), b.cols()));
}

Mat stable_softmax_cols(const Mat& a) {
  Mat y(a.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    const Vec shifted = a.col(j).array() - a.col(j).maxCoeff();
    const Vec e = shifted.array().exp();
    y.col(j) = e / e.sum();
  }
  return y;
}

}  // namespace

double Tape::scalar(Var v) const {
  const Mat& m = value(v);
  require(m.rows() == 1 && m.cols() == 1,
          "Tape::scalar: node is " + shape_str(m.rows(), m.cols()));
  return m(0, 0);
}

void Tape::add_grad(Var v, const Mat& g) {
  Node& n = nodes_.at(v.idx);
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.grad += g;
}

void Tape::add_grad_block(Var v, Index r0, const Mat& g) {
  Node& n = nodes_.at(v.idx);
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.grad.middleRows(r0, g.rows()) += g;
}

void Tape::backward(Var loss) {
  if (nodes_.empty())
    throw std::logic_error("Tape::backward called without a forward pass");
  if (!loss.valid() || loss.idx >= size())
    throw std::logic_error("Tape::backward: invalid loss node");
  const Mat& lv = nodes_[loss.idx].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw std::logic_error("Tape::backward: loss must be scalar, got " +
                           shape_str(lv.rows(), lv.cols()));
  if (!std::isfinite(lv(0, 0)))
    throw numerical_error("Tape::backward: loss is not finite");

  nodes_[loss.idx].grad = Mat::Ones(1, 1);
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;  // never contributed to the loss
    if (n.back) n.back(*this, n.grad);
  }
  nodes_.clear();  // non-parameter intermediates freed
  swept_ = false;
}

Var leaf(Tape& t, Mat value) { return t.push(std::move(value)); }

Var param_node(Tape& t, ParamTensor& p) {
  return t.push(p.value, [pp = &p](Tape&, const Mat& up) {
    accumulate(*pp, up);
  });
}

Var linear(Tape& t, ParamTensor& w, Var x) {
  const Mat& xv = t.value(x);
  require(w.value.cols() == xv.rows(),
          "linear: W is " + shape_str(w.value.rows(), w.value.cols()) +
              " but x is " + shape_str(xv.rows(), xv.cols()));
  Mat y = w.value * xv;
  return t.push(std::move(y), [pw = &w, x](Tape& t, const Mat& up) {
    accumulate(*pw, up * t.value(x).transpose());
    t.add_grad(x, pw->value.transpose() * up);
  });
}

Var affine(Tape& t, ParamTensor& w, ParamTensor& b, Var x) {
  const Mat& xv = t.value(x);
  require(w.value.cols() == xv.rows(),
          "affine: W is " + shape_str(w.value.rows(), w.value.cols()) +
              " but x is " + shape_str(xv.rows(), xv.cols()));
  require(b.value.rows() == w.value.rows() && b.value.cols() == 1,
          "affine: b is " + shape_str(b.value.rows(), b.value.cols()) +
              " but W is " + shape_str(w.value.rows(), w.value.cols()));
  Mat y = (w.value * xv).colwise() + b.value.col(0);
  return t.push(std::move(y), [pw = &w, pb = &b, x](Tape& t, const Mat& up) {
    accumulate(*pw, up * t.value(x).transpose());
    accumulate(*pb, up.rowwise().sum());
    t.add_grad(x, pw->value.transpose() * up);
  });
}

Var add(Tape& t, Var a, Var b) { return axpby(t, 1.0, a, 1.0, b); }

Var axpby(Tape& t, double ca, Var a, double cb, Var b) {
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  require_same_shape(av, bv, "axpby");
  Mat y = ca * av + cb * bv;
  return t.push(std::move(y), [ca, cb, a, b](Tape& t, const Mat& up) {
    t.add_grad(a, ca * up);
    t.add_grad(b, cb * up);
  });
}

Var scale(Tape& t, Var a, double c) {
  Mat y = c * t.value(a);
  return t.push(std::move(y), [c, a](Tape& t, const Mat& up) {
    t.add_grad(a, c * up);
  });
}

Var cmul(Tape& t, Var a, Var b) {
  const Mat& av = t.value(a);
  const Mat& bv = t.value(b);
  require_same_shape(av, bv, "cmul");
  Mat y = av.cwiseProduct(bv);
  return t.push(std::move(y), [a, b](Tape& t, const Mat& up) {
    t.add_grad(a, up.cwiseProduct(t.value(b)));
    t.add_grad(b, up.cwiseProduct(t.value(a)));
  });
}

Var sigmoid(Tape& t, Var a) {
  Mat y = t.value(a).unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
  });
  const int self = t.size();
  return t.push(std::move(y), [a, self](Tape& t, const Mat& up) {
    const Mat& s = t.value(Var{self});
    t.add_grad(a, up.array() * s.array() * (1.0 - s.array()));
  });
}

Var tanh_act(Tape& t, Var a) {
  Mat y = t.value(a).array().tanh();
  const int self = t.size();
  return t.push(std::move(y), [a, self](Tape& t, const Mat& up) {
    const Mat& v = t.value(Var{self});
    t.add_grad(a, up.array() * (1.0 - v.array().square()));
  });
}

Var rows(Tape& t, Var a, Index r0, Index n) {
  const Mat& av = t.value(a);
  require(r0 >= 0 && r0 + n <= av.rows(),
          "rows: slice [" + std::to_string(r0) + ", " + std::to_string(r0 + n) +
              ") out of " + std::to_string(av.rows()) + " rows");
  Mat y = av.middleRows(r0, n);
  return t.push(std::move(y), [a, r0](Tape& t, const Mat& up) {
    t.add_grad_block(a, r0, up);
  });
}

Var softmax_cols(Tape& t, Var a) {
  Mat y = stable_softmax_cols(t.value(a));
  const int self = t.size();
  return t.push(std::move(y), [a, self](Tape& t, const Mat& up) {
    const Mat& y = t.value(Var{self});
    const Eigen::RowVectorXd dot = (up.array() * y.array()).colwise().sum();
    Mat g = y.array() * (up.array().rowwise() - dot.array());
    t.add_grad(a, g);
  });
}

Var sum_all(Tape& t, Var a) {
  const Mat& av = t.value(a);
  Mat y = Mat::Constant(1, 1, av.sum());
  const Index r = av.rows(), c = av.cols();
  return t.push(std::move(y), [a, r, c](Tape& t, const Mat& up) {
    t.add_grad(a, Mat::Constant(r, c, up(0, 0)));
  });
}

Var mean_cols(Tape& t, Var a) {
  const Mat& av = t.value(a);
  require(av.rows() == 1, "mean_cols: expected a row vector, got " +
                              shape_str(av.rows(), av.cols()));
  const Index n = av.cols();
  Mat y = Mat::Constant(1, 1, av.mean());
  return t.push(std::move(y), [a, n](Tape& t, const Mat& up) {
    t.add_grad(a, Mat::Constant(1, n, up(0, 0) / static_cast<double>(n)));
  });
}

Var gather_log(Tape& t, Var dist, const std::vector<int>& row_per_col) {
  const Mat& d = t.value(dist);
  require(static_cast<Index>(row_per_col.size()) == d.cols(),
          "gather_log: need one row index per column");
  Mat y(1, d.cols());
  for (Index j = 0; j < d.cols(); ++j) {
    const int r = row_per_col[j];
    require(r >= 0 && r < d.rows(), "gather_log: row index out of range");
    y(0, j) = std::log(d(r, j));
  }
  return t.push(std::move(y), [dist, row_per_col](Tape& t, const Mat& up) {
    const Mat& d = t.value(dist);
    Mat g = Mat::Zero(d.rows(), d.cols());
    for (Index j = 0; j < d.cols(); ++j)
      g(row_per_col[j], j) = up(0, j) / d(row_per_col[j], j);
    t.add_grad(dist, g);
  });
}

Var embed_concat(Tape& t, ParamTensor& table, const IntMat& tokens) {
  const Index e = table.value.cols();
  const Index n = tokens.rows();
  const Index batch = tokens.cols();
  for (Index i = 0; i < tokens.size(); ++i)
    require(tokens(i) >= 0 && tokens(i) < table.value.rows(),
            "embed_concat: token id out of range");
  Mat y(n * e, batch);
  for (Index b = 0; b < batch; ++b)
    for (Index i = 0; i < n; ++i)
      y.col(b).segment(i * e, e) = table.value.row(tokens(i, b)).transpose();
  return t.push(std::move(y), [pt = &table, tokens, e](Tape&, const Mat& up) {
    for (Index b = 0; b < up.cols(); ++b)
      for (Index i = 0; i < tokens.rows(); ++i)
        pt->grad.row(tokens(i, b)) +=
            up.col(b).segment(i * e, e).transpose();
    pt->grad_fresh = true;
  });
}

Var embed_pair_sum(Tape& t, ParamTensor& table, const std::vector<Var>& z_bits) {
  const Index e = table.value.cols();
  const auto l = static_cast<Index>(z_bits.size());
  require(table.value.rows() == 2 * l,
          "embed_pair_sum: table has " + std::to_string(table.value.rows()) +
              " rows for " + std::to_string(l) + " bits");
  require(l > 0, "embed_pair_sum: no bits");
  const Index batch = t.value(z_bits[0]).cols();
  Mat y = Mat::Zero(e, batch);
  for (Index i = 0; i < l; ++i) {
    const Mat& z = t.value(z_bits[i]);
    require(z.rows() == 2 && z.cols() == batch,
            "embed_pair_sum: bit node must be 2x" + std::to_string(batch));
    y.noalias() += table.value.middleRows(2 * i, 2).transpose() * z;
  }
  return t.push(std::move(y), [pt = &table, z_bits](Tape& t, const Mat& up) {
    for (Index i = 0; i < static_cast<Index>(z_bits.size()); ++i) {
      const Mat& z = t.value(z_bits[i]);
      t.add_grad(z_bits[i], pt->value.middleRows(2 * i, 2) * up);
      pt->grad.middleRows(2 * i, 2) += z * up.transpose();
    }
    pt->grad_fresh = true;
  });
}

LstmState lstm_cell(Tape& t, LstmParams& p, Var x, LstmState prev) {
  const Index h_dim = p.hidden_dim();
  Var gates = add(t, linear(t, p.w_input, x), affine(t, p.w_hidden, p.bias, prev.h));
  Var i_gate = sigmoid(t, rows(t, gates, 0, h_dim));
  Var f_gate = sigmoid(t, rows(t, gates, h_dim, h_dim));
  Var g_gate = tanh_act(t, rows(t, gates, 2 * h_dim, h_dim));
  Var o_gate = sigmoid(t, rows(t, gates, 3 * h_dim, h_dim));
  Var c_next = add(t, cmul(t, f_gate, prev.c), cmul(t, i_gate, g_gate));
  Var h_next = cmul(t, o_gate, tanh_act(t, c_next));
  return {h_next, c_next};
}

void gumbel_softmax_values(const Mat& probs, double tau, const Mat& noise,
                           Mat& hard, Mat& soft) {
  const Mat a = probs.array().log() + noise.array();
  soft = stable_softmax_cols(a / tau);
  hard = Mat::Zero(a.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    Index r;
    a.col(j).maxCoeff(&r);
    hard(r, j) = 1.0;
  }
}

Var gumbel_softmax(Tape& t, Var probs, ParamTensor& tau, const Mat& noise,
                   bool hard, double tau_floor) {
  const Mat& p = t.value(probs);
  require(p.rows() == 2, "gumbel_softmax: expected 2xB probabilities, got " +
                             shape_str(p.rows(), p.cols()));
  require_same_shape(p, noise, "gumbel_softmax");
  require((p.array() > 0.0).all(),
          "gumbel_softmax: probabilities must be strictly positive");
  require(tau.value.size() == 1, "gumbel_softmax: tau must be scalar");

  const bool clamped = tau.value(0, 0) < tau_floor;
  const double tau_eff = clamped ? tau_floor : tau.value(0, 0);

  Mat hard_val, soft;
  gumbel_softmax_values(p, tau_eff, noise, hard_val, soft);
  const Mat a = p.array().log() + noise.array();

  Mat value = hard ? hard_val : soft;
  return t.push(std::move(value), [probs, ptau = &tau, soft = std::move(soft),
                                   a = std::move(a), tau_eff,
                                   clamped](Tape& t, const Mat& up) {
    const Mat& p = t.value(probs);
    const Eigen::RowVectorXd dot = (up.array() * soft.array()).colwise().sum();
    const Mat da =
        (soft.array() * (up.array().rowwise() - dot.array())) / tau_eff;
    t.add_grad(probs, da.cwiseQuotient(p));
    if (!clamped) {
      const Eigen::RowVectorXd abar =
          (soft.array() * a.array()).colwise().sum();
      const double dtau =
          ((up.array() * soft.array() * (a.array().rowwise() - abar.array()))
               .sum()) *
          (-1.0 / (tau_eff * tau_eff));
      accumulate(*ptau, Mat::Constant(1, 1, dtau));
    } else {
      ptau->grad_fresh = true;  // clamp region: zero gradient, still visited
    }
  });
}

}  // namespace emlang::ad
