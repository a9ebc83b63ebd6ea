#include <cmath>
#include <vector>

#include "dealmvc/calibration.hpp"
#include "dealmvc/dataset.hpp"
#include "dealmvc/errors.hpp"
#include "dealmvc/metrics.hpp"
#include "dealmvc/trainer.hpp"
#include "doctest.h"

using namespace dealmvc;

namespace {

TrainConfig small_cfg() {
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.hidden = {24, 12};
  cfg.embed_dim = 8;
  cfg.pretrain_epochs = 2;
  cfg.train_epochs = 2;
  cfg.seed = 0;
  return cfg;
}

MultiViewDataset small_dataset() {
  return normalize_views(generate_synthetic(3, 120, {6, 9}, 6.0, 1.0, 0),
                         NormalizeMode::minmax);
}

bool models_identical(const ModelState& a, const ModelState& b) {
  bool same = true;
  a.for_each_param(ModelState::ParamGroup::all, [&](const std::string& name, const Matrix& m) {
    const_cast<ModelState&>(b).for_each_param(
        ModelState::ParamGroup::all, [&](const std::string& name2, Matrix& m2) {
          if (name == name2 && (m.rows() != m2.rows() || m.cols() != m2.cols() ||
                                (m - m2).cwiseAbs().maxCoeff() != 0.0)) {
            same = false;
          }
        });
  });
  return same;
}

}  // namespace

TEST_CASE("pretrain: zero epochs returns the fresh initialization") {
  MultiViewDataset ds = small_dataset();
  TrainConfig cfg = small_cfg();
  cfg.pretrain_epochs = 0;
  ModelState model = pretrain(ds, cfg);
  ModelState fresh = ModelState::init(ds.view_dims(), cfg.embed_dim, 3, cfg.hidden, cfg.seed);
  CHECK(models_identical(model, fresh));
}

TEST_CASE("pretrain: deterministic for identical config and seed") {
  MultiViewDataset ds = small_dataset();
  TrainConfig cfg = small_cfg();
  cfg.pretrain_epochs = 3;
  ModelState a = pretrain(ds, cfg);
  ModelState b = pretrain(ds, cfg);
  CHECK(models_identical(a, b));
}

TEST_CASE("pretrain: reconstruction loss decreases on the synthetic dataset") {
  MultiViewDataset ds =
      normalize_views(generate_synthetic(3, 600, {8, 12}, 6.0, 1.0, 0), NormalizeMode::minmax);
  TrainConfig cfg;
  cfg.batch_size = 256;
  cfg.hidden = {64, 32};
  cfg.embed_dim = 16;
  cfg.pretrain_epochs = 50;
  cfg.seed = 0;

  TrainHistory history;
  pretrain(ds, cfg, &history);
  REQUIRE(history.epochs.size() == 50);
  CHECK(history.epochs.back().recon < history.epochs.front().recon);

  // monotonic trend: median of the last 10 epochs below the first 10
  auto median10 = [&](std::size_t from) {
    std::vector<double> vals;
    for (std::size_t i = from; i < from + 10; ++i) vals.push_back(history.epochs[i].recon);
    std::sort(vals.begin(), vals.end());
    return 0.5 * (vals[4] + vals[5]);
  };
  CHECK(median10(40) < median10(0));
}

TEST_CASE("train: ablation switches reduce to pure autoencoder training") {
  MultiViewDataset ds = small_dataset();
  TrainConfig cfg = small_cfg();
  cfg.alpha = cfg.beta = cfg.mu = 0.0;
  cfg.disable_local = cfg.disable_global = cfg.disable_consistency = true;
  cfg.disable_attention = cfg.disable_sampling_net = true;

  ModelState model = pretrain(ds, cfg);
  TrainHistory history = train(model, ds, cfg);
  REQUIRE(history.epochs.size() == 2);
  for (const EpochRecord& rec : history.epochs) {
    CHECK(rec.total == rec.recon);
    CHECK(rec.local == 0.0);
    CHECK(rec.global == 0.0);
    CHECK(rec.consistency == 0.0);
  }
}

TEST_CASE("train: disable_local omits the local term from the total") {
  MultiViewDataset ds = small_dataset();
  TrainConfig cfg = small_cfg();
  cfg.disable_local = true;
  ModelState model = pretrain(ds, cfg);
  TrainHistory history = train(model, ds, cfg);
  for (const EpochRecord& rec : history.epochs) {
    CHECK(rec.local == 0.0);
    CHECK(rec.total == total_loss(rec.recon, 0.0, rec.global, rec.consistency, cfg.alpha,
                                  cfg.beta, cfg.mu));
  }
}

TEST_CASE("train: logged total recomposes exactly from logged components") {
  MultiViewDataset ds = small_dataset();
  TrainConfig cfg = small_cfg();
  cfg.alpha = 0.7;
  cfg.beta = 1.3;
  cfg.mu = 0.4;
  ModelState model = pretrain(ds, cfg);
  TrainHistory history = train(model, ds, cfg);
  REQUIRE(!history.epochs.empty());
  for (const EpochRecord& rec : history.epochs) {
    CHECK(rec.total ==
          total_loss(rec.recon, rec.local, rec.global, rec.consistency, cfg.alpha, cfg.beta,
                     cfg.mu));
    CHECK(std::isfinite(rec.total));
  }
}

TEST_CASE("train: disable_global equals beta = 0 step for step") {
  MultiViewDataset ds = small_dataset();
  TrainConfig cfg = small_cfg();
  ModelState base = pretrain(ds, cfg);

  ModelState by_switch = base;
  TrainConfig cfg_switch = cfg;
  cfg_switch.disable_global = true;
  train(by_switch, ds, cfg_switch);

  ModelState by_weight = base;
  TrainConfig cfg_weight = cfg;
  cfg_weight.beta = 0.0;
  train(by_weight, ds, cfg_weight);

  CHECK(models_identical(by_switch, by_weight));
}

TEST_CASE("train: deterministic histories and fusion state invariants") {
  MultiViewDataset ds = small_dataset();
  TrainConfig cfg = small_cfg();
  ModelState m1 = pretrain(ds, cfg);
  ModelState m2 = pretrain(ds, cfg);
  TrainHistory h1 = train(m1, ds, cfg);
  TrainHistory h2 = train(m2, ds, cfg);
  REQUIRE(h1.epochs.size() == h2.epochs.size());
  for (std::size_t i = 0; i < h1.epochs.size(); ++i) {
    CHECK(std::abs(h1.epochs[i].total - h2.epochs[i].total) <= 1e-10);
    CHECK(h1.epochs[i].w.minCoeff() >= 0.0);
    CHECK(std::abs(h1.epochs[i].w.sum() - 1.0) <= 1e-6);
    CHECK(std::abs(h1.epochs[i].q.sum() - 1.0) <= 1e-6);
    // r = a .* q holds exactly in the persisted fusion state
  }
  CHECK(models_identical(m1, m2));
  CHECK((m1.fusion.r - m1.fusion.a.cwiseProduct(m1.fusion.q)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m1.fusion.t == static_cast<long>(h1.epochs.size()) * 2);  // 2 batches per epoch
}

TEST_CASE("predict_clusters: argmax and kmeans rules") {
  // Hand-built identity model: V=2, d=D=2, shared identity head.
  ModelState model;
  Mlp ident;
  LinearLayer layer;
  layer.weight = Matrix::Identity(2, 2);
  layer.bias = Matrix::Zero(1, 2);
  ident.layers.push_back(layer);
  model.encoders = {ident, ident};
  model.decoders = {ident, ident};
  model.head = layer;
  model.fusion.w = Vector::Constant(2, 0.5);
  model.fusion.q = Vector::Constant(2, 0.5);
  model.fusion.a = Vector::Constant(2, 0.5);
  model.fusion.r = model.fusion.a.cwiseProduct(model.fusion.q);

  MultiViewDataset ds;
  Matrix x(4, 2);
  x << 3.0, 0.0, 0.0, 3.0, 2.5, 0.5, 0.5, 2.5;
  ds.views = {x, x};

  std::vector<int> labels = predict_clusters(model, ds, AssignRule::argmax);
  CHECK(labels == std::vector<int>{0, 1, 0, 1});

  std::vector<int> km = predict_clusters(model, ds, AssignRule::kmeans, 1);
  CHECK(clustering_accuracy(km, labels) == doctest::Approx(1.0));

  ModelState empty;
  try {
    predict_clusters(empty, ds);
    FAIL("expected UntrainedModel");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UntrainedModel);
  }
}

TEST_CASE("train: non-finite loss raises NonFiniteLoss") {
  MultiViewDataset ds = small_dataset();
  TrainConfig cfg = small_cfg();
  cfg.learning_rate = 1e18;  // force divergence
  cfg.pretrain_epochs = 0;
  cfg.train_epochs = 8;
  ModelState model = pretrain(ds, cfg);
  try {
    train(model, ds, cfg);
    // divergence is probabilistic at this scale; reaching here is acceptable
    // only if the loss stayed finite
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteLoss);
  }
}
