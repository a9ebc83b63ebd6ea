#include "dealmvc/calibration.hpp"

#include <cmath>
#include <vector>

#include "dealmvc/errors.hpp"

namespace dealmvc {

PseudoLabelGraph pseudo_label_graph(const Matrix& p_row, const Matrix& p_col, double tau) {
  ad::Tape tape;
  ad::Var w = tape.pseudo_label_graph(tape.constant(p_row), tape.constant(p_col), tau);
  return PseudoLabelGraph{tape.value(w), tau};
}

ad::Var feature_similarity_graph(ad::Tape& tape, ad::Var z_row, ad::Var z_col) {
  require(tape.value(z_row).cols() == tape.value(z_col).cols(), ErrorKind::ShapeMismatch,
          "feature_similarity_graph: embedding widths differ");
  ad::Var nr = tape.row_l2_normalize(z_row);
  ad::Var nc = tape.row_l2_normalize(z_col);
  return tape.matmul(nr, tape.transpose(nc));
}

SimilarityGraph feature_similarity_graph(const Matrix& z_row, const Matrix& z_col) {
  require(z_row.cols() == z_col.cols(), ErrorKind::ShapeMismatch,
          "feature_similarity_graph: embedding widths differ");
  auto normalize = [](const Matrix& z) {
    Eigen::VectorXd norms = z.rowwise().norm();
    for (Eigen::Index i = 0; i < norms.size(); ++i) {
      require(norms(i) >= 1e-12, ErrorKind::ZeroNormRow,
              "row " + std::to_string(i) + " has near-zero norm");
    }
    return Matrix(z.array().colwise() / norms.array());
  };
  Matrix nr = normalize(z_row);
  Matrix nc = normalize(z_col);
  // Explicit row dots: the (col,row) graph is then the bitwise transpose.
  Matrix s(nr.rows(), nc.rows());
  for (Eigen::Index i = 0; i < nr.rows(); ++i)
    for (Eigen::Index j = 0; j < nc.rows(); ++j) s(i, j) = nr.row(i).dot(nc.row(j));
  return SimilarityGraph{std::move(s)};
}

ad::Var calibration_loss(ad::Tape& tape, const Matrix& w_target, ad::Var s) {
  const Eigen::Index rows = tape.value(s).rows();
  require(w_target.rows() == rows && w_target.cols() == tape.value(s).cols(),
          ErrorKind::ShapeMismatch, "calibration_loss: graph shapes differ");
  ad::Var log_sigma = tape.log_softmax_rows(s);
  ad::Var weighted = tape.hadamard(tape.constant(w_target), log_sigma);
  return tape.scale(tape.sum(weighted), -1.0 / static_cast<double>(rows));
}

double calibration_loss(const PseudoLabelGraph& w, const SimilarityGraph& s) {
  ad::Tape tape;
  return tape.value(calibration_loss(tape, w.w, tape.constant(s.s)))(0, 0);
}

double local_calibration_loss(std::span<const Matrix> z_views, std::span<const Matrix> p_views,
                              double tau) {
  require(z_views.size() >= 2, ErrorKind::TooFewViews, "local calibration needs V >= 2");
  require(z_views.size() == p_views.size(), ErrorKind::ShapeMismatch,
          "local_calibration_loss: view count mismatch");
  double total = 0.0;
  for (std::size_t m = 0; m < z_views.size(); ++m) {
    for (std::size_t n = m + 1; n < z_views.size(); ++n) {
      PseudoLabelGraph w = pseudo_label_graph(p_views[m], p_views[n], tau);
      SimilarityGraph s = feature_similarity_graph(z_views[m], z_views[n]);
      total += calibration_loss(w, s);
    }
  }
  return total;
}

ad::Var label_consistency_loss(ad::Tape& tape, ad::Var w_global,
                               std::span<const ad::Var> w_locals) {
  require(!w_locals.empty(), ErrorKind::ShapeMismatch, "label_consistency_loss: no local graphs");
  ad::Var total;
  for (std::size_t b = 0; b < w_locals.size(); ++b) {
    ad::Var term = tape.sum_squares(tape.sub(w_global, w_locals[b]));
    total = b == 0 ? term : tape.add(total, term);
  }
  return tape.scale(total, 1.0 / static_cast<double>(w_locals.size()));
}

double label_consistency_loss(const PseudoLabelGraph& w_global,
                              std::span<const PseudoLabelGraph> w_locals) {
  ad::Tape tape;
  ad::Var wg = tape.constant(w_global.w);
  std::vector<ad::Var> locals;
  locals.reserve(w_locals.size());
  for (const PseudoLabelGraph& w : w_locals) locals.push_back(tape.constant(w.w));
  return tape.value(label_consistency_loss(tape, wg, locals))(0, 0);
}

double total_loss(double recon, double local, double global, double consistency, double alpha,
                  double beta, double mu) {
  const double value = recon + alpha * local + beta * global + mu * consistency;
  require(std::isfinite(value), ErrorKind::NonFiniteLoss, "total loss is not finite");
  return value;
}

}  // namespace dealmvc
