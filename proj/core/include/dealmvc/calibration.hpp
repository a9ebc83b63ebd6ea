#pragma once

#include <span>

#include "dealmvc/autodiff.hpp"
#include "dealmvc/networks.hpp"

namespace dealmvc {

// Pseudo-label graph over a batch: W_ii = 1, off-diagonal entries are the
// pseudo-label dot products kept only when they reach tau. Treated as a
// fixed target inside the calibration losses; gradients flow through it
// only in the label-consistency loss.
struct PseudoLabelGraph {
  Matrix w;
  double tau = 0.0;
};

struct SimilarityGraph {
  Matrix s;  // cosine similarities in [-1, 1]
};

// Global case passes the same p twice; local case passes (p^m, p^n).
PseudoLabelGraph pseudo_label_graph(const Matrix& p_row, const Matrix& p_col, double tau);

// S_ij = <z_row_i, z_col_j> / (|z_row_i| |z_col_j|).
ad::Var feature_similarity_graph(ad::Tape& tape, ad::Var z_row, ad::Var z_col);
SimilarityGraph feature_similarity_graph(const Matrix& z_row, const Matrix& z_col);

// With row softmax sigma of S: mean_i [ -sum_j W_ij log sigma_ij ].
// W is a detached target; only S receives gradients.
ad::Var calibration_loss(ad::Tape& tape, const Matrix& w_target, ad::Var s);
double calibration_loss(const PseudoLabelGraph& w, const SimilarityGraph& s);

// Sum of the calibration kernel over all V(V-1)/2 unordered view pairs,
// each pair built from (p^m, p^n) targets and (Z^m, Z^n) similarities.
double local_calibration_loss(std::span<const Matrix> z_views, std::span<const Matrix> p_views,
                              double tau);

// (1/B) sum_b ||W^G - W^b||_F^2.
ad::Var label_consistency_loss(ad::Tape& tape, ad::Var w_global, std::span<const ad::Var> w_locals);
double label_consistency_loss(const PseudoLabelGraph& w_global,
                              std::span<const PseudoLabelGraph> w_locals);

// L = L_R + alpha L_local + beta L_global + mu L_con.
double total_loss(double recon, double local, double global, double consistency, double alpha,
                  double beta, double mu);

}  // namespace dealmvc
