#include "dealmvc/trainer.hpp"

#include <algorithm>

#include <Eigen/Cholesky>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "dealmvc/calibration.hpp"
#include "dealmvc/cluster.hpp"
#include "dealmvc/csv.hpp"
#include "dealmvc/errors.hpp"
#include "dealmvc/fusion.hpp"
#include "dealmvc/random.hpp"

namespace dealmvc {

void TrainConfig::validate() const {
  require(batch_size >= 2, ErrorKind::BatchTooSmall, "batch_size must be >= 2");
  require(learning_rate > 0.0, ErrorKind::InvalidInput, "learning_rate must be positive");
  require(pretrain_epochs >= 0 && train_epochs >= 0, ErrorKind::InvalidInput,
          "epoch counts must be >= 0");
  require(alpha >= 0.0 && beta >= 0.0 && mu >= 0.0, ErrorKind::InvalidInput,
          "trade-off weights must be >= 0");
  require(tau > 0.0 && tau < 1.0, ErrorKind::InvalidThreshold, "tau must be in (0,1)");
  require(embed_dim >= 1, ErrorKind::InvalidShape, "embed_dim must be positive");
  for (int h : hidden) require(h >= 1, ErrorKind::InvalidShape, "hidden widths must be positive");
}

int TrainConfig::resolve_clusters(const MultiViewDataset& ds) const {
  if (clusters > 0) return clusters;
  const int k = ds.cluster_count();
  require(k >= 2, ErrorKind::InvalidInput,
          "cluster count unavailable: dataset has no labels and clusters is unset");
  return k;
}

namespace {

class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr) : lr_(lr) {}

  void step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
    if (m_.empty()) {
      for (const Matrix* p : params) {
        m_.push_back(Matrix::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grads[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grads[i].cwiseProduct(grads[i]);
      Matrix mhat = m_[i] / bc1;
      Matrix vhat = v_[i] / bc2;
      *params[i] -= lr_ * (mhat.array() / (vhat.array().sqrt() + kEps)).matrix();
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

// Parameters of `group` paired with their tape leaves, in traversal order.
struct SteppableParams {
  std::vector<Matrix*> values;
  std::vector<ad::Var> leaves;
};

SteppableParams collect_params(ModelState& model, const BoundModel& bound,
                               ModelState::ParamGroup group) {
  std::unordered_map<std::string, ad::Var> by_name;
  for (const auto& [name, var] : bound.params) by_name.emplace(name, var);
  SteppableParams out;
  model.for_each_param(group, [&](const std::string& name, Matrix& m) {
    out.values.push_back(&m);
    out.leaves.push_back(by_name.at(name));
  });
  return out;
}

std::uint64_t epoch_seed(const TrainConfig& cfg, int epoch, std::uint64_t phase) {
  return mix64(cfg.seed ^ mix64(static_cast<std::uint64_t>(epoch) + (phase << 32)));
}

// Probe target logit: +-3 puts a cleanly separated sample near 0.99
// top-class probability, well above the graph threshold.
constexpr double kProbeMargin = 3.0;

Matrix uniform_row(int v_count) {
  return Matrix::Constant(1, v_count, 1.0 / static_cast<double>(v_count));
}

void check_model_matches(const ModelState& model, const MultiViewDataset& ds) {
  require(model.view_count() == ds.view_count(), ErrorKind::ShapeMismatch,
          "model has " + std::to_string(model.view_count()) + " views, dataset has " +
              std::to_string(ds.view_count()));
  for (int v = 0; v < ds.view_count(); ++v) {
    require(model.encoders[static_cast<std::size_t>(v)].in_dim() ==
                static_cast<int>(ds.views[static_cast<std::size_t>(v)].cols()),
            ErrorKind::ShapeMismatch, "view " + std::to_string(v) + " width mismatch");
  }
}

}  // namespace

StepGraph build_step_graph(ad::Tape& tape, const BoundModel& bound,
                           std::span<const Matrix> batch_views, const TrainConfig& cfg,
                           const FusionState& fusion, const FrozenTargets* frozen) {
  const int v_count = static_cast<int>(batch_views.size());
  require(v_count >= 1, ErrorKind::TooFewViews, "no views in batch");

  StepGraph g;
  std::vector<ad::Var> xs(static_cast<std::size_t>(v_count));
  std::vector<ad::Var> xhats(static_cast<std::size_t>(v_count));
  g.z_views.resize(static_cast<std::size_t>(v_count));
  for (int v = 0; v < v_count; ++v) {
    xs[static_cast<std::size_t>(v)] = tape.constant(batch_views[static_cast<std::size_t>(v)]);
    g.z_views[static_cast<std::size_t>(v)] =
        encode(tape, bound.encoders[static_cast<std::size_t>(v)], xs[static_cast<std::size_t>(v)]);
    xhats[static_cast<std::size_t>(v)] =
        decode(tape, bound.decoders[static_cast<std::size_t>(v)], g.z_views[static_cast<std::size_t>(v)]);
  }
  g.recon = reconstruction_loss(tape, xs, xhats);

  // Adaptive global fusion; both networks disabled reduces to the
  // equal-weight mean of the view embeddings.
  if (cfg.disable_attention && cfg.disable_sampling_net) {
    g.a = tape.constant(uniform_row(v_count));
    g.q_next = tape.constant(uniform_row(v_count));
    g.w_next = tape.constant(uniform_row(v_count));
    g.zg = tape.weighted_sum(g.z_views, g.w_next);
  } else {
    g.a = cfg.disable_attention ? tape.constant(uniform_row(v_count))
                                : attention_weights(tape, bound.attention, g.z_views);
    g.q_next = cfg.disable_sampling_net ? tape.constant(uniform_row(v_count))
                                        : view_sampling_probs(tape, bound.sampling_net, fusion.q);
    ad::Var r = regulatory_factor(tape, g.a, g.q_next);
    BoundFusion fused = fuse(tape, g.z_views, fusion.w, r);
    g.w_next = fused.w_next;
    g.zg = fused.zg;
  }

  const bool need_local_graphs = (!cfg.disable_local || !cfg.disable_consistency) && v_count >= 2;
  const bool need_global_graph = !cfg.disable_global || !cfg.disable_consistency;

  ad::Var p_global;
  std::vector<ad::Var> p_views;
  if (need_global_graph) p_global = classify(tape, bound.head, g.zg);
  if (need_local_graphs) {
    p_views.reserve(static_cast<std::size_t>(v_count));
    for (int v = 0; v < v_count; ++v)
      p_views.push_back(classify(tape, bound.head, g.z_views[static_cast<std::size_t>(v)]));
  }

  // Detached targets for the calibration kernels.
  if (frozen) {
    g.targets = *frozen;
  } else {
    if (need_global_graph) {
      g.targets.w_global =
          pseudo_label_graph(tape.value(p_global), tape.value(p_global), cfg.tau).w;
    }
    if (need_local_graphs) {
      for (int m = 0; m < v_count; ++m) {
        for (int n = m + 1; n < v_count; ++n) {
          g.targets.w_locals.push_back(
              pseudo_label_graph(tape.value(p_views[static_cast<std::size_t>(m)]),
                                 tape.value(p_views[static_cast<std::size_t>(n)]), cfg.tau)
                  .w);
        }
      }
    }
  }

  if (!cfg.disable_global) {
    ad::Var sg = feature_similarity_graph(tape, g.zg, g.zg);
    g.global = calibration_loss(tape, g.targets.w_global, sg);
  }
  if (!cfg.disable_local && v_count >= 2) {
    ad::Var sum;
    std::size_t pair = 0;
    for (int m = 0; m < v_count; ++m) {
      for (int n = m + 1; n < v_count; ++n, ++pair) {
        ad::Var s = feature_similarity_graph(tape, g.z_views[static_cast<std::size_t>(m)],
                                             g.z_views[static_cast<std::size_t>(n)]);
        ad::Var term = calibration_loss(tape, g.targets.w_locals[pair], s);
        sum = pair == 0 ? term : tape.add(sum, term);
      }
    }
    g.local = sum;
  }
  if (!cfg.disable_consistency && v_count >= 2) {
    // The global graph acts as a detached target, mirroring the guidance
    // role the pseudo-label graph plays in the calibration kernel; the
    // local graphs carry gradients into the shared head, so confident
    // global structure keeps sharpening the per-view pseudo-labels as the
    // features move.
    ad::Var wg = tape.constant(g.targets.w_global);
    std::vector<ad::Var> w_locals;
    for (int m = 0; m < v_count; ++m) {
      for (int n = m + 1; n < v_count; ++n) {
        w_locals.push_back(tape.pseudo_label_graph(p_views[static_cast<std::size_t>(m)],
                                                   p_views[static_cast<std::size_t>(n)], cfg.tau));
      }
    }
    g.consistency = label_consistency_loss(tape, wg, w_locals);
  }

  g.total = g.recon;
  if (g.local) g.total = tape.add(g.total, tape.scale(*g.local, cfg.alpha));
  if (g.global) g.total = tape.add(g.total, tape.scale(*g.global, cfg.beta));
  if (g.consistency) g.total = tape.add(g.total, tape.scale(*g.consistency, cfg.mu));
  return g;
}

ModelState pretrain(const MultiViewDataset& ds, const TrainConfig& cfg, TrainHistory* history) {
  cfg.validate();
  ds.validate();
  const int k = cfg.resolve_clusters(ds);
  ModelState model = ModelState::init(ds.view_dims(), cfg.embed_dim, k, cfg.hidden, cfg.seed);

  AdamOptimizer opt(cfg.learning_rate);
  const int v_count = ds.view_count();
  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    auto batches = batch_iter(ds, cfg.batch_size, true, epoch_seed(cfg, epoch, 1));
    double recon_sum = 0.0;
    for (const BatchView& batch : batches) {
      ad::Tape tape;
      BoundModel bound = bind_model(tape, model, true);
      std::vector<ad::Var> xs, xhats;
      for (int v = 0; v < v_count; ++v) {
        ad::Var x = tape.constant(batch.view(ds, v));
        xs.push_back(x);
        xhats.push_back(decode(tape, bound.decoders[static_cast<std::size_t>(v)],
                               encode(tape, bound.encoders[static_cast<std::size_t>(v)], x)));
      }
      ad::Var loss = reconstruction_loss(tape, xs, xhats);
      const double value = tape.value(loss)(0, 0);
      require(std::isfinite(value), ErrorKind::NonFiniteLoss,
              "pretraining diverged at epoch " + std::to_string(epoch));
      tape.backward(loss);

      SteppableParams params = collect_params(model, bound, ModelState::ParamGroup::autoencoder);
      std::vector<Matrix> grads;
      grads.reserve(params.leaves.size());
      for (ad::Var leaf : params.leaves) grads.push_back(tape.grad(leaf));
      opt.step(params.values, grads);
      recon_sum += value;
    }
    if (history) {
      EpochRecord rec;
      rec.phase = "pretrain";
      rec.epoch = epoch;
      rec.recon = recon_sum / static_cast<double>(batches.size());
      rec.total = total_loss(rec.recon, 0.0, 0.0, 0.0, cfg.alpha, cfg.beta, cfg.mu);
      rec.w = model.fusion.w;
      rec.a = model.fusion.a;
      rec.q = model.fusion.q;
      history->epochs.push_back(std::move(rec));
    }
  }
  return model;
}

TrainHistory train(ModelState& model, const MultiViewDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  ds.validate();
  check_model_matches(model, ds);
  require(model.has_head(), ErrorKind::UntrainedModel, "model has no classification head");

  if (cfg.kmeans_head_init) {
    // Seed the head from the pretrained geometry: k-means on Z^G provides
    // assignments, then the head is fit as a ridge linear probe of those
    // assignments over every embedding level (each view plus the fused
    // feature). A randomly initialized head never reaches the confidence
    // the tau-thresholded graphs require, and a head fit to the fused
    // level alone leaves the per-view pseudo-labels unconfident.
    const int n = ds.sample_count();
    const int d = model.embed_dim();
    const int k_count = model.cluster_count();
    std::vector<Matrix> levels;
    for (int v = 0; v < ds.view_count(); ++v) {
      levels.push_back(encode(model.encoders[static_cast<std::size_t>(v)],
                              ds.views[static_cast<std::size_t>(v)]));
    }
    std::vector<Matrix> level_views(levels.begin(), levels.end());
    Matrix zg = fuse_with_weights(level_views, model.fusion.w);
    KMeansResult km = kmeans(zg, k_count, cfg.seed);
    levels.push_back(std::move(zg));

    const Eigen::Index rows = static_cast<Eigen::Index>(levels.size()) * n;
    Matrix x(rows, d + 1);
    Matrix t = Matrix::Constant(rows, k_count, -kProbeMargin);
    Eigen::Index at = 0;
    for (const Matrix& z : levels) {
      x.block(at, 0, n, d) = z;
      x.block(at, d, n, 1).setOnes();
      for (int i = 0; i < n; ++i) {
        t(at + i, km.labels[static_cast<std::size_t>(i)]) = kProbeMargin;
      }
      at += n;
    }
    Matrix gram = x.transpose() * x;
    const double ridge = 1e-3 * gram.trace() / static_cast<double>(d + 1);
    gram.diagonal().array() += ridge;
    Matrix beta = gram.ldlt().solve(x.transpose() * t);
    model.head.weight = beta.topRows(d);
    model.head.bias = beta.bottomRows(1);
  }

  TrainHistory history;
  AdamOptimizer opt(cfg.learning_rate);
  const int v_count = ds.view_count();

  for (int epoch = 0; epoch < cfg.train_epochs; ++epoch) {
    auto batches = batch_iter(ds, cfg.batch_size, true, epoch_seed(cfg, epoch, 2));
    double recon_sum = 0.0, local_sum = 0.0, global_sum = 0.0, con_sum = 0.0;
    for (const BatchView& batch : batches) {
      ad::Tape tape;
      BoundModel bound = bind_model(tape, model, true);
      std::vector<Matrix> views;
      views.reserve(static_cast<std::size_t>(v_count));
      for (int v = 0; v < v_count; ++v) views.push_back(batch.view(ds, v));

      StepGraph g = build_step_graph(tape, bound, views, cfg, model.fusion, nullptr);
      const double total = tape.value(g.total)(0, 0);
      require(std::isfinite(total), ErrorKind::NonFiniteLoss,
              "training diverged at epoch " + std::to_string(epoch));
      tape.backward(g.total);

      SteppableParams params = collect_params(model, bound, ModelState::ParamGroup::all);
      std::vector<Matrix> grads;
      grads.reserve(params.leaves.size());
      for (ad::Var leaf : params.leaves) grads.push_back(tape.grad(leaf));
      opt.step(params.values, grads);

      // Fusion buffers advance once per batch.
      model.fusion.a = tape.value(g.a).row(0).transpose();
      model.fusion.q = tape.value(g.q_next).row(0).transpose();
      model.fusion.r = model.fusion.a.cwiseProduct(model.fusion.q);
      model.fusion.w = tape.value(g.w_next).row(0).transpose();
      model.fusion.t += 1;

      recon_sum += tape.value(g.recon)(0, 0);
      if (g.local) local_sum += tape.value(*g.local)(0, 0);
      if (g.global) global_sum += tape.value(*g.global)(0, 0);
      if (g.consistency) con_sum += tape.value(*g.consistency)(0, 0);
    }
    const double n_batches = static_cast<double>(batches.size());
    EpochRecord rec;
    rec.phase = "train";
    rec.epoch = epoch;
    rec.recon = recon_sum / n_batches;
    rec.local = local_sum / n_batches;
    rec.global = global_sum / n_batches;
    rec.consistency = con_sum / n_batches;
    rec.total = total_loss(rec.recon, rec.local, rec.global, rec.consistency, cfg.alpha, cfg.beta,
                           cfg.mu);
    rec.w = model.fusion.w;
    rec.a = model.fusion.a;
    rec.q = model.fusion.q;
    history.epochs.push_back(std::move(rec));
  }
  return history;
}

void TrainHistory::write_csv(std::ostream& out, int view_count) const {
  out << "phase,epoch,loss_recon,loss_local,loss_global,loss_consistency,loss_total";
  for (int v = 0; v < view_count; ++v) out << ",w_" << v;
  for (int v = 0; v < view_count; ++v) out << ",a_" << v;
  for (int v = 0; v < view_count; ++v) out << ",q_" << v;
  out << "\n";
  for (const EpochRecord& rec : epochs) {
    out << rec.phase << ',' << rec.epoch << ',' << csv::format_value(rec.recon) << ','
        << csv::format_value(rec.local) << ',' << csv::format_value(rec.global) << ','
        << csv::format_value(rec.consistency) << ',' << csv::format_value(rec.total);
    auto emit = [&](const Vector& v) {
      for (int i = 0; i < view_count; ++i) {
        out << ',' << (i < v.size() ? csv::format_value(v(i)) : "0");
      }
    };
    emit(rec.w);
    emit(rec.a);
    emit(rec.q);
    out << "\n";
  }
}

AssignRule parse_assign_rule(const std::string& s) {
  if (s == "argmax") return AssignRule::argmax;
  if (s == "kmeans") return AssignRule::kmeans;
  raise(ErrorKind::InvalidInput, "unknown assignment rule '" + s + "'");
}

Matrix global_embedding(const ModelState& model, const MultiViewDataset& ds) {
  check_model_matches(model, ds);
  std::vector<Matrix> zs;
  zs.reserve(static_cast<std::size_t>(ds.view_count()));
  for (int v = 0; v < ds.view_count(); ++v) {
    zs.push_back(encode(model.encoders[static_cast<std::size_t>(v)],
                        ds.views[static_cast<std::size_t>(v)]));
  }
  return fuse_with_weights(zs, model.fusion.w);
}

std::vector<int> predict_clusters(const ModelState& model, const MultiViewDataset& ds,
                                  AssignRule rule, std::uint64_t seed) {
  require(model.has_head(), ErrorKind::UntrainedModel, "classification head is missing");
  Matrix zg = global_embedding(model, ds);
  std::vector<int> labels(static_cast<std::size_t>(zg.rows()));
  if (rule == AssignRule::argmax) {
    Matrix p = classify(model.head, zg);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      Eigen::Index arg = 0;
      p.row(i).maxCoeff(&arg);
      labels[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
  } else {
    KMeansResult km = kmeans(zg, model.cluster_count(), seed);
    labels = std::move(km.labels);
  }
  return labels;
}

}  // namespace dealmvc
