#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emlang/types.hpp"

namespace emlang::ad {

// A named parameter with persistent gradient storage. Vectors are stored as
// n-by-1 matrices; the batch dimension of activations is always columns.
struct ParamTensor {
  std::string name;
  Mat value;
  Mat grad;
  bool grad_fresh = false;
  // Opted out of weight decay (e.g. the ST temperature, which receives no
  // counter-gradient while clamped and would otherwise decay to zero).
  bool decay_exempt = false;

  ParamTensor() = default;
  ParamTensor(std::string n, Index rows, Index cols)
      : name(std::move(n)),
        value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)) {}

  Index size() const { return value.size(); }
  void zero_grad() {
    grad.setZero();
    grad_fresh = false;
  }
};

inline void accumulate(ParamTensor& p, const Mat& g) {
  p.grad += g;
  p.grad_fresh = true;
}

// Handle to a node on a Tape.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Reverse-mode tape over matrix-valued nodes. Ops push nodes in evaluation
// order, so creation order is a topological order and backward() is a single
// reverse sweep. Node gradients are allocated lazily; a node whose gradient
// was never touched is skipped (its contribution is zero).
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Mat& upstream)>;

  Var push(Mat value, BackwardFn back = nullptr) {
    nodes_.push_back(Node{std::move(value), Mat(), std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(Var v) const { return nodes_.at(v.idx).value; }
  double scalar(Var v) const;

  void add_grad(Var v, const Mat& g);
  void add_grad_block(Var v, Index r0, const Mat& g);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Parameter
  // gradients accumulate into their ParamTensor; all intermediates are freed.
  void backward(Var loss);

  void reset() {
    nodes_.clear();
    swept_ = false;
  }

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackwardFn back;
  };
  std::vector<Node> nodes_;
  bool swept_ = false;
};

// --- primitives -------------------------------------------------------------

Var leaf(Tape& t, Mat value);

// Injects a parameter as a node; backward accumulates into the parameter.
Var param_node(Tape& t, ParamTensor& p);

// W.value * x
Var linear(Tape& t, ParamTensor& w, Var x);
// W.value * x + b (b broadcast across columns)
Var affine(Tape& t, ParamTensor& w, ParamTensor& b, Var x);

Var add(Tape& t, Var a, Var b);
// ca * a + cb * b, elementwise on same-shaped nodes
Var axpby(Tape& t, double ca, Var a, double cb, Var b);
Var scale(Tape& t, Var a, double c);
Var cmul(Tape& t, Var a, Var b);

Var sigmoid(Tape& t, Var a);
Var tanh_act(Tape& t, Var a);

// Block of n rows starting at r0.
Var rows(Tape& t, Var a, Index r0, Index n);

// Column-wise softmax.
Var softmax_cols(Tape& t, Var a);

Var sum_all(Tape& t, Var a);  // 1x1
Var mean_cols(Tape& t, Var a);  // row vector -> 1x1 mean over columns

// Row vector of log(a(row_per_col[j], j)) per column j.
Var gather_log(Tape& t, Var dist, const std::vector<int>& row_per_col);

// Concatenated embedding rows: column b is the stack of table rows
// tokens(0,b), ..., tokens(N-1,b); result is (N*E) x B.
Var embed_concat(Tape& t, ParamTensor& table, const IntMat& tokens);

// Sum over bit positions of the two-row slice of `table` weighted by the
// one-hot (or relaxed) pair z_t: result(:,b) = sum_t table.row(2t)*z_t(0,b)
// + table.row(2t+1)*z_t(1,b); result is E x B.
Var embed_pair_sum(Tape& t, ParamTensor& table, const std::vector<Var>& z_bits);

struct LstmParams {
  ParamTensor w_input;   // 4H x D_in, gate rows ordered [i; f; g; o]
  ParamTensor w_hidden;  // 4H x H
  ParamTensor bias;      // 4H x 1

  LstmParams() = default;
  LstmParams(const std::string& prefix, Index input_dim, Index hidden_dim)
      : w_input(prefix + ".w_input", 4 * hidden_dim, input_dim),
        w_hidden(prefix + ".w_hidden", 4 * hidden_dim, hidden_dim),
        bias(prefix + ".bias", 4 * hidden_dim, 1) {}

  Index hidden_dim() const { return w_hidden.value.cols(); }
};

struct LstmState {
  Var h;
  Var c;
};

// One LSTM step: i,f,o = sigmoid, g = tanh, c' = f*c + i*g, h' = o*tanh(c').
LstmState lstm_cell(Tape& t, LstmParams& p, Var x, LstmState prev);

// Straight-through Gumbel-Softmax over one binary choice per column.
// `probs` is 2xB with positive columns summing to 1; `noise` is 2xB of
// Gumbel(0,1) draws. Forward is the hard one-hot of argmax(log p + g) when
// hard=true, else the tau-softened relaxation; backward always flows through
// the relaxation. tau is used as max(tau, tau_floor).
Var gumbel_softmax(Tape& t, Var probs, ParamTensor& tau, const Mat& noise,
                   bool hard, double tau_floor = 0.1);

// Relaxation values without a tape, for tests and frozen evaluation.
void gumbel_softmax_values(const Mat& probs, double tau, const Mat& noise,
                           Mat& hard, Mat& soft);

}  // namespace emlang::ad
