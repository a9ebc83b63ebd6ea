#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace dealmvc::ad {

using Matrix = Eigen::MatrixXd;

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over dense matrices. Usage per training step: register
// parameters as leaves, compose the loss graph, call backward() on the 1x1
// root, read gradients off the leaves. Tapes are single-threaded and cheap
// to throw away; node values are immutable once pushed.
class Tape {
 public:
  Var constant(Matrix value);  // gradient not tracked
  Var leaf(Matrix value);      // gradient tracked (parameters)

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_rowvec(Var a, Var bias);  // bias: 1 x C, broadcast over rows
  Var scale(Var a, double c);
  Var hadamard(Var a, Var b);
  Var relu(Var a);
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  Var row_l2_normalize(Var a);  // throws ZeroNormRow for rows with norm < 1e-12
  Var rowwise_sum(Var a);       // N x C -> N x 1
  Var colwise_mean(Var a);      // N x C -> 1 x C
  Var hconcat(std::span<const Var> parts);
  Var vconcat(std::span<const Var> parts);
  Var col(Var a, int j);           // N x C -> N x 1
  Var colvec_mul(Var a, Var c);    // (N x C) .* (N x 1) broadcast over columns
  Var layer_norm_rows(Var a, Var gain, Var bias, double eps = 1e-5);
  Var sum(Var a);          // -> 1 x 1
  Var sum_squares(Var a);  // -> 1 x 1 (squared Frobenius norm)
  Var div_by_sum(Var a);   // 1 x V -> 1 x V, entries divided by their sum

  // Z^G = sum_v w_v * Z_v for a 1 x V weight row and V equally shaped matrices.
  Var weighted_sum(std::span<const Var> zs, Var w);

  // Thresholded pseudo-label graph from two row-stochastic matrices:
  // W_ij = 1 on the diagonal, p_row_i . p_col_j when that dot product
  // reaches tau, 0 otherwise. Gradients flow only through kept off-diagonal
  // entries. Entries are computed as explicit row dots so that building the
  // (col,row) graph yields the bitwise transpose.
  Var pseudo_label_graph(Var p_row, Var p_col, double tau);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  bool tracked(Var v) const;
  void backward(Var root);
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool track = false;
    std::function<void()> backprop;
  };

  Var push(Matrix value, bool track, std::function<void()> backprop = nullptr);
  Node& node(Var v);
  const Node& node(Var v) const;
  void add_grad(Var v, const Matrix& g);

  // deque: references returned by value()/grad() stay valid while the
  // graph keeps growing
  std::deque<Node> nodes_;
};

}  // namespace dealmvc::ad
