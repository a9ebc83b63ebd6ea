#include "dealmvc/fusion.hpp"

#include <cmath>
#include <vector>

#include "dealmvc/errors.hpp"

namespace dealmvc {

namespace {

void check_probability_vector(const Vector& v, const char* what, ErrorKind kind) {
  require(v.size() > 0, kind, std::string(what) + " is empty");
  require(v.minCoeff() >= -1e-9 && std::abs(v.sum() - 1.0) <= 1e-6, kind,
          std::string(what) + " is not a probability vector");
}

Matrix as_row(const Vector& v) { return v.transpose(); }

}  // namespace

ad::Var attention_weights(ad::Tape& tape, const BoundAttention& att,
                          std::span<const ad::Var> z_views) {
  require(!z_views.empty(), ErrorKind::ShapeMismatch, "attention_weights: no views");
  const Eigen::Index n = tape.value(z_views[0]).rows();
  const Eigen::Index d = tape.value(z_views[0]).cols();
  for (ad::Var z : z_views) {
    require(tape.value(z).rows() == n && tape.value(z).cols() == d, ErrorKind::ShapeMismatch,
            "attention_weights: embeddings must share N and D");
  }
  const std::size_t v_count = z_views.size();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<ad::Var> q(v_count), k(v_count), v(v_count);
  for (std::size_t m = 0; m < v_count; ++m) {
    ad::Var ln = tape.layer_norm_rows(z_views[m], att.ln_gain, att.ln_bias);
    q[m] = tape.matmul(ln, att.wq);
    k[m] = tape.matmul(ln, att.wk);
    v[m] = tape.matmul(ln, att.wv);
  }

  // Per-sample attention across the view axis, then pooling over samples.
  std::vector<ad::Var> pooled(v_count);
  for (std::size_t m = 0; m < v_count; ++m) {
    std::vector<ad::Var> scores(v_count);
    for (std::size_t nn = 0; nn < v_count; ++nn) {
      scores[nn] = tape.scale(tape.rowwise_sum(tape.hadamard(q[m], k[nn])), inv_sqrt_d);
    }
    ad::Var alpha = tape.softmax_rows(tape.hconcat(scores));
    ad::Var attended;
    for (std::size_t nn = 0; nn < v_count; ++nn) {
      ad::Var term = tape.colvec_mul(v[nn], tape.col(alpha, static_cast<int>(nn)));
      attended = nn == 0 ? term : tape.add(attended, term);
    }
    pooled[m] = tape.colwise_mean(attended);
  }

  ad::Var stacked = tape.vconcat(pooled);                 // V x D
  ad::Var logits = mlp_forward(tape, att.ffn, stacked);   // V x 1
  return tape.softmax_rows(tape.transpose(logits));       // 1 x V
}

Vector attention_weights(const AttentionNet& att, std::span<const Matrix> z_views) {
  ad::Tape tape;
  std::vector<ad::Var> zs;
  zs.reserve(z_views.size());
  for (const Matrix& z : z_views) zs.push_back(tape.constant(z));

  BoundAttention bound;
  bound.ln_gain = tape.constant(att.ln_gain);
  bound.ln_bias = tape.constant(att.ln_bias);
  bound.wq = tape.constant(att.wq);
  bound.wk = tape.constant(att.wk);
  bound.wv = tape.constant(att.wv);
  for (const LinearLayer& l : att.ffn.layers) {
    bound.ffn.layers.push_back({tape.constant(l.weight), tape.constant(l.bias)});
  }
  return tape.value(attention_weights(tape, bound, zs)).row(0).transpose();
}

ad::Var view_sampling_probs(ad::Tape& tape, const BoundMlp& gamma, const Vector& q) {
  check_probability_vector(q, "q", ErrorKind::InvalidInput);
  ad::Var q_in = tape.constant(as_row(q));  // gradient stops at the incoming q
  return tape.softmax_rows(mlp_forward(tape, gamma, q_in));
}

Vector view_sampling_probs(const Mlp& gamma, const Vector& q) {
  ad::Tape tape;
  BoundMlp bound;
  for (const LinearLayer& l : gamma.layers) {
    bound.layers.push_back({tape.constant(l.weight), tape.constant(l.bias)});
  }
  return tape.value(view_sampling_probs(tape, bound, q)).row(0).transpose();
}

ad::Var regulatory_factor(ad::Tape& tape, ad::Var a, ad::Var q) {
  require(tape.value(a).rows() == 1 && tape.value(q).rows() == 1 &&
              tape.value(a).cols() == tape.value(q).cols(),
          ErrorKind::LengthMismatch, "regulatory_factor: a and q must be 1 x V");
  return tape.hadamard(a, q);
}

Vector regulatory_factor(const Vector& a, const Vector& q) {
  require(a.size() == q.size(), ErrorKind::LengthMismatch,
          "regulatory_factor: lengths " + std::to_string(a.size()) + " vs " +
              std::to_string(q.size()));
  return a.cwiseProduct(q);
}

BoundFusion fuse(ad::Tape& tape, std::span<const ad::Var> z_views, const Vector& w, ad::Var r) {
  check_probability_vector(w, "w", ErrorKind::InvalidDistribution);
  require(static_cast<Eigen::Index>(z_views.size()) == w.size(), ErrorKind::LengthMismatch,
          "fuse: weight length vs view count");
  require(tape.value(r).cols() == w.size(), ErrorKind::LengthMismatch, "fuse: r length");

  const Matrix& rv = tape.value(r);
  double wt_sum = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) wt_sum += rv(0, i) * w(i);
  require(wt_sum >= 1e-12, ErrorKind::DegenerateWeights,
          "fuse: sum(r .* w) = " + std::to_string(wt_sum));

  BoundFusion out;
  ad::Var w_tilde = tape.hadamard(r, tape.constant(as_row(w)));
  out.w_next = tape.div_by_sum(w_tilde);
  out.zg = tape.weighted_sum(z_views, out.w_next);
  return out;
}

FuseResult fuse(std::span<const Matrix> z_views, const Vector& w, const Vector& r) {
  ad::Tape tape;
  std::vector<ad::Var> zs;
  zs.reserve(z_views.size());
  for (const Matrix& z : z_views) zs.push_back(tape.constant(z));
  BoundFusion bound = fuse(tape, zs, w, tape.constant(as_row(r)));
  FuseResult result;
  result.w_next = tape.value(bound.w_next).row(0).transpose();
  result.zg = tape.value(bound.zg);
  return result;
}

Matrix fuse_with_weights(std::span<const Matrix> z_views, const Vector& w) {
  require(!z_views.empty(), ErrorKind::ShapeMismatch, "fuse_with_weights: no views");
  check_probability_vector(w, "w", ErrorKind::InvalidDistribution);
  require(static_cast<Eigen::Index>(z_views.size()) == w.size(), ErrorKind::LengthMismatch,
          "fuse_with_weights: weight length vs view count");
  Matrix zg = Matrix::Zero(z_views[0].rows(), z_views[0].cols());
  for (std::size_t v = 0; v < z_views.size(); ++v) {
    require(z_views[v].rows() == zg.rows() && z_views[v].cols() == zg.cols(),
            ErrorKind::ShapeMismatch, "fuse_with_weights: embedding shapes differ");
    zg += w(static_cast<Eigen::Index>(v)) * z_views[v];
  }
  return zg;
}

}  // namespace dealmvc
