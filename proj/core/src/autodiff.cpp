#include "dealmvc/autodiff.hpp"

#include <cmath>
#include <string>

#include "dealmvc/errors.hpp"

namespace dealmvc::ad {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::ShapeMismatch,
          std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
              " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace

Var Tape::push(Matrix value, bool track, std::function<void()> backprop) {
  Node n;
  n.value = std::move(value);
  n.track = track;
  n.backprop = track ? std::move(backprop) : nullptr;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
const Tape::Node& Tape::node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }

const Matrix& Tape::value(Var v) const { return node(v).value; }

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  require(n.grad.size() > 0, ErrorKind::InvalidInput, "gradient not computed; call backward first");
  return n.grad;
}

bool Tape::tracked(Var v) const { return node(v).track; }

void Tape::add_grad(Var v, const Matrix& g) {
  Node& n = node(v);
  if (!n.track) return;
  n.grad += g;
}

Var Tape::constant(Matrix value) { return push(std::move(value), false); }

Var Tape::leaf(Matrix value) { return push(std::move(value), true); }

Var Tape::matmul(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  require(av.cols() == bv.rows(), ErrorKind::ShapeMismatch,
          "matmul: inner dimensions " + std::to_string(av.cols()) + " vs " +
              std::to_string(bv.rows()));
  const Var out{static_cast<int>(nodes_.size())};
  push(av * bv, tracked(a) || tracked(b), [this, a, b, out]() {
    const Matrix& g = node(out).grad;
    if (tracked(a)) add_grad(a, g * value(b).transpose());
    if (tracked(b)) add_grad(b, value(a).transpose() * g);
  });
  return out;
}

Var Tape::transpose(Var a) {
  const Var out{static_cast<int>(nodes_.size())};
  push(value(a).transpose(), tracked(a),
             [this, a, out]() { add_grad(a, node(out).grad.transpose()); });
  return out;
}

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  const Var out{static_cast<int>(nodes_.size())};
  push(value(a) + value(b), tracked(a) || tracked(b), [this, a, b, out]() {
    const Matrix& g = node(out).grad;
    add_grad(a, g);
    add_grad(b, g);
  });
  return out;
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  const Var out{static_cast<int>(nodes_.size())};
  push(value(a) - value(b), tracked(a) || tracked(b), [this, a, b, out]() {
    const Matrix& g = node(out).grad;
    add_grad(a, g);
    if (tracked(b)) add_grad(b, -g);
  });
  return out;
}

Var Tape::add_rowvec(Var a, Var bias) {
  const Matrix& av = value(a);
  const Matrix& bv = value(bias);
  require(bv.rows() == 1 && bv.cols() == av.cols(), ErrorKind::ShapeMismatch,
          "add_rowvec: bias must be 1 x cols(a)");
  Matrix y = av;
  y.rowwise() += bv.row(0);
  const Var out{static_cast<int>(nodes_.size())};
  push(std::move(y), tracked(a) || tracked(bias), [this, a, bias, out]() {
    const Matrix& g = node(out).grad;
    add_grad(a, g);
    if (tracked(bias)) add_grad(bias, g.colwise().sum());
  });
  return out;
}

Var Tape::scale(Var a, double c) {
  const Var out{static_cast<int>(nodes_.size())};
  push(value(a) * c, tracked(a),
             [this, a, c, out]() { add_grad(a, node(out).grad * c); });
  return out;
}

Var Tape::hadamard(Var a, Var b) {
  check_same_shape(value(a), value(b), "hadamard");
  const Var out{static_cast<int>(nodes_.size())};
  push(value(a).cwiseProduct(value(b)), tracked(a) || tracked(b), [this, a, b, out]() {
    const Matrix& g = node(out).grad;
    if (tracked(a)) add_grad(a, g.cwiseProduct(value(b)));
    if (tracked(b)) add_grad(b, g.cwiseProduct(value(a)));
  });
  return out;
}

Var Tape::relu(Var a) {
  const Var out{static_cast<int>(nodes_.size())};
  push(value(a).cwiseMax(0.0), tracked(a), [this, a, out]() {
    const Matrix& g = node(out).grad;
    Matrix mask = (value(a).array() > 0.0).cast<double>();
    add_grad(a, g.cwiseProduct(mask));
  });
  return out;
}

Var Tape::softmax_rows(Var a) {
  const Matrix& av = value(a);
  Matrix y(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    Eigen::ArrayXd row = av.row(i).array() - av.row(i).maxCoeff();
    Eigen::ArrayXd e = row.exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  const Var out{static_cast<int>(nodes_.size())};
  push(std::move(y), tracked(a), [this, a, out]() {
    const Matrix& g = node(out).grad;
    const Matrix& y = node(out).value;
    Eigen::VectorXd dot = (g.cwiseProduct(y)).rowwise().sum();
    Matrix ga = y.cwiseProduct(g.colwise() - dot);
    add_grad(a, ga);
  });
  return out;
}

Var Tape::log_softmax_rows(Var a) {
  const Matrix& av = value(a);
  Matrix y(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    double m = av.row(i).maxCoeff();
    double lse = std::log((av.row(i).array() - m).exp().sum()) + m;
    y.row(i) = av.row(i).array() - lse;
  }
  const Var out{static_cast<int>(nodes_.size())};
  push(std::move(y), tracked(a), [this, a, out]() {
    const Matrix& g = node(out).grad;
    Matrix sm = node(out).value.array().exp();
    Eigen::VectorXd rowsum = g.rowwise().sum();
    Matrix ga = g - (sm.array().colwise() * rowsum.array()).matrix();
    add_grad(a, ga);
  });
  return out;
}

Var Tape::row_l2_normalize(Var a) {
  const Matrix& av = value(a);
  Eigen::VectorXd norms = av.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    require(norms(i) >= 1e-12, ErrorKind::ZeroNormRow,
            "row " + std::to_string(i) + " has near-zero norm");
  }
  Matrix y = av.array().colwise() / norms.array();
  const Var out{static_cast<int>(nodes_.size())};
  push(std::move(y), tracked(a), [this, a, out, norms]() {
    const Matrix& g = node(out).grad;
    const Matrix& y = node(out).value;
    Eigen::VectorXd dot = (g.cwiseProduct(y)).rowwise().sum();
    Matrix ga = (g - (y.array().colwise() * dot.array()).matrix()).array().colwise() / norms.array();
    add_grad(a, ga);
  });
  return out;
}

Var Tape::rowwise_sum(Var a) {
  const Var out{static_cast<int>(nodes_.size())};
  push(value(a).rowwise().sum(), tracked(a), [this, a, out]() {
    const Matrix& g = node(out).grad;
    add_grad(a, g * Matrix::Ones(1, value(a).cols()));
  });
  return out;
}

Var Tape::colwise_mean(Var a) {
  const double inv_n = 1.0 / static_cast<double>(value(a).rows());
  const Var out{static_cast<int>(nodes_.size())};
  push(value(a).colwise().mean(), tracked(a), [this, a, out, inv_n]() {
    const Matrix& g = node(out).grad;
    add_grad(a, Matrix::Ones(value(a).rows(), 1) * (g * inv_n));
  });
  return out;
}

Var Tape::hconcat(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::InvalidInput, "hconcat: no parts");
  Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool track = false;
  for (Var p : parts) {
    require(value(p).rows() == rows, ErrorKind::ShapeMismatch, "hconcat: row mismatch");
    cols += value(p).cols();
    track = track || tracked(p);
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    y.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  const Var out{static_cast<int>(nodes_.size())};
  push(std::move(y), track, [this, ps, out]() {
    const Matrix& g = node(out).grad;
    Eigen::Index at = 0;
    for (Var p : ps) {
      add_grad(p, g.middleCols(at, value(p).cols()));
      at += value(p).cols();
    }
  });
  return out;
}

Var Tape::vconcat(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::InvalidInput, "vconcat: no parts");
  Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  bool track = false;
  for (Var p : parts) {
    require(value(p).cols() == cols, ErrorKind::ShapeMismatch, "vconcat: column mismatch");
    rows += value(p).rows();
    track = track || tracked(p);
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    y.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  const Var out{static_cast<int>(nodes_.size())};
  push(std::move(y), track, [this, ps, out]() {
    const Matrix& g = node(out).grad;
    Eigen::Index at = 0;
    for (Var p : ps) {
      add_grad(p, g.middleRows(at, value(p).rows()));
      at += value(p).rows();
    }
  });
  return out;
}

Var Tape::col(Var a, int j) {
  require(j >= 0 && j < value(a).cols(), ErrorKind::ShapeMismatch, "col: index out of range");
  const Var out{static_cast<int>(nodes_.size())};
  push(value(a).col(j), tracked(a), [this, a, j, out]() {
    Matrix g = Matrix::Zero(value(a).rows(), value(a).cols());
    g.col(j) = node(out).grad;
    add_grad(a, g);
  });
  return out;
}

Var Tape::colvec_mul(Var a, Var c) {
  const Matrix& av = value(a);
  const Matrix& cv = value(c);
  require(cv.cols() == 1 && cv.rows() == av.rows(), ErrorKind::ShapeMismatch,
          "colvec_mul: c must be rows(a) x 1");
  Matrix y = av.array().colwise() * cv.col(0).array();
  const Var out{static_cast<int>(nodes_.size())};
  push(std::move(y), tracked(a) || tracked(c), [this, a, c, out]() {
    const Matrix& g = node(out).grad;
    if (tracked(a)) add_grad(a, (g.array().colwise() * value(c).col(0).array()).matrix());
    if (tracked(c)) add_grad(c, g.cwiseProduct(value(a)).rowwise().sum());
  });
  return out;
}

Var Tape::layer_norm_rows(Var a, Var gain, Var bias, double eps) {
  const Matrix& av = value(a);
  const Matrix& gv = value(gain);
  const Matrix& bv = value(bias);
  require(gv.rows() == 1 && gv.cols() == av.cols(), ErrorKind::ShapeMismatch, "layer_norm: gain");
  require(bv.rows() == 1 && bv.cols() == av.cols(), ErrorKind::ShapeMismatch, "layer_norm: bias");
  const Eigen::Index n = av.rows();
  const Eigen::Index c = av.cols();
  Eigen::VectorXd inv_std(n);
  Matrix xhat(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mu = av.row(i).mean();
    double var = (av.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (av.row(i).array() - mu) * inv_std(i);
  }
  Matrix y = (xhat.array().rowwise() * gv.row(0).array()).rowwise() + bv.row(0).array();
  const Var out{static_cast<int>(nodes_.size())};
  push(std::move(y), tracked(a) || tracked(gain) || tracked(bias),
             [this, a, gain, bias, out, xhat, inv_std]() {
               const Matrix& g = node(out).grad;
               if (tracked(gain)) add_grad(gain, g.cwiseProduct(xhat).colwise().sum());
               if (tracked(bias)) add_grad(bias, g.colwise().sum());
               if (tracked(a)) {
                 Matrix dxhat = g.array().rowwise() * value(gain).row(0).array();
                 Eigen::VectorXd m1 = dxhat.rowwise().mean();
                 Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
                 Matrix ga = ((dxhat.colwise() - m1) - (xhat.array().colwise() * m2.array()).matrix())
                                 .array()
                                 .colwise() *
                             inv_std.array();
                 add_grad(a, ga);
               }
             });
  return out;
}

Var Tape::sum(Var a) {
  const Var out{static_cast<int>(nodes_.size())};
  Matrix y(1, 1);
  y(0, 0) = value(a).sum();
  push(std::move(y), tracked(a), [this, a, out]() {
    double g = node(out).grad(0, 0);
    add_grad(a, Matrix::Constant(value(a).rows(), value(a).cols(), g));
  });
  return out;
}

Var Tape::sum_squares(Var a) {
  const Var out{static_cast<int>(nodes_.size())};
  Matrix y(1, 1);
  y(0, 0) = value(a).squaredNorm();
  push(std::move(y), tracked(a), [this, a, out]() {
    double g = node(out).grad(0, 0);
    add_grad(a, 2.0 * g * value(a));
  });
  return out;
}

Var Tape::div_by_sum(Var a) {
  const Matrix& av = value(a);
  require(av.rows() == 1, ErrorKind::ShapeMismatch, "div_by_sum expects a row vector");
  double s = av.sum();
  require(std::abs(s) >= 1e-12, ErrorKind::DegenerateWeights, "sum too close to zero");
  const Var out{static_cast<int>(nodes_.size())};
  push(av / s, tracked(a), [this, a, out, s]() {
    const Matrix& g = node(out).grad;
    const Matrix& y = node(out).value;
    double gy = g.cwiseProduct(y).sum();
    add_grad(a, (g.array() - gy).matrix() / s);
  });
  return out;
}

Var Tape::weighted_sum(std::span<const Var> zs, Var w) {
  require(!zs.empty(), ErrorKind::InvalidInput, "weighted_sum: no inputs");
  const Matrix& wv = value(w);
  require(wv.rows() == 1 && wv.cols() == static_cast<Eigen::Index>(zs.size()),
          ErrorKind::ShapeMismatch, "weighted_sum: w must be 1 x V");
  bool track = tracked(w);
  for (Var z : zs) {
    check_same_shape(value(z), value(zs[0]), "weighted_sum");
    track = track || tracked(z);
  }
  Matrix y = Matrix::Zero(value(zs[0]).rows(), value(zs[0]).cols());
  for (std::size_t v = 0; v < zs.size(); ++v) y += wv(0, static_cast<Eigen::Index>(v)) * value(zs[v]);
  std::vector<Var> zv(zs.begin(), zs.end());
  const Var out{static_cast<int>(nodes_.size())};
  push(std::move(y), track, [this, zv, w, out]() {
    const Matrix& g = node(out).grad;
    for (std::size_t v = 0; v < zv.size(); ++v) {
      if (tracked(zv[v])) add_grad(zv[v], value(w)(0, static_cast<Eigen::Index>(v)) * g);
    }
    if (tracked(w)) {
      Matrix gw(1, static_cast<Eigen::Index>(zv.size()));
      for (std::size_t v = 0; v < zv.size(); ++v)
        gw(0, static_cast<Eigen::Index>(v)) = g.cwiseProduct(value(zv[v])).sum();
      add_grad(w, gw);
    }
  });
  return out;
}

Var Tape::pseudo_label_graph(Var p_row, Var p_col, double tau) {
  const Matrix& pr = value(p_row);
  const Matrix& pc = value(p_col);
  require(tau > 0.0 && tau < 1.0, ErrorKind::InvalidThreshold, "tau must be in (0,1)");
  require(pr.cols() == pc.cols(), ErrorKind::ShapeMismatch, "pseudo_label_graph: class counts");
  require(pr.rows() == pc.rows(), ErrorKind::ShapeMismatch, "pseudo_label_graph: row counts");
  auto check_stochastic = [](const Matrix& p, const char* which) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      require(p.row(i).minCoeff() >= -1e-9 && std::abs(p.row(i).sum() - 1.0) <= 1e-6,
              ErrorKind::InvalidDistribution,
              std::string(which) + " row " + std::to_string(i) + " is not a distribution");
    }
  };
  check_stochastic(pr, "p_row");
  check_stochastic(pc, "p_col");

  const Eigen::Index n = pr.rows();
  Matrix w(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) {
        w(i, j) = 1.0;
      } else {
        double d = pr.row(i).dot(pc.row(j));
        w(i, j) = d >= tau ? d : 0.0;
      }
    }
  }
  const Var out{static_cast<int>(nodes_.size())};
  push(std::move(w), tracked(p_row) || tracked(p_col), [this, p_row, p_col, out]() {
    const Matrix& g = node(out).grad;
    const Matrix& w = node(out).value;
    const Matrix& pr = value(p_row);
    const Matrix& pc = value(p_col);
    Matrix gr = Matrix::Zero(pr.rows(), pr.cols());
    Matrix gc = Matrix::Zero(pc.rows(), pc.cols());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        if (i == j || w(i, j) == 0.0) continue;  // thresholded and diagonal entries carry no gradient
        gr.row(i) += g(i, j) * pc.row(j);
        gc.row(j) += g(i, j) * pr.row(i);
      }
    }
    if (tracked(p_row)) add_grad(p_row, gr);
    if (tracked(p_col)) add_grad(p_col, gc);
  });
  return out;
}

void Tape::backward(Var root) {
  const Node& r = node(root);
  require(r.value.rows() == 1 && r.value.cols() == 1, ErrorKind::InvalidInput,
          "backward root must be 1x1");
  for (Node& n : nodes_) {
    if (n.track) {
      n.grad.resize(n.value.rows(), n.value.cols());
      n.grad.setZero();
    }
  }
  if (!node(root).track) return;
  node(root).grad(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.track && n.backprop) n.backprop();
  }
}

}  // namespace dealmvc::ad
