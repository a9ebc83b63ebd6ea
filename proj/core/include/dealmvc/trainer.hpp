#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dealmvc/autodiff.hpp"
#include "dealmvc/dataset.hpp"
#include "dealmvc/networks.hpp"

namespace dealmvc {

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 3e-4;
  int pretrain_epochs = 300;
  int train_epochs = 100;
  double alpha = 1.0;
  double beta = 1.0;
  double mu = 1.0;
  double tau = 0.8;
  int embed_dim = 128;
  int clusters = 0;  // 0: take K from dataset labels
  std::vector<int> hidden = {512, 256};
  std::uint64_t seed = 0;
  bool disable_local = false;
  bool disable_global = false;
  bool disable_consistency = false;
  bool disable_sampling_net = false;
  bool disable_attention = false;
  bool deterministic = true;
  // Start the contrastive stage with the head set to the nearest-centroid
  // posterior of k-means on the pretrained fused embedding. A randomly
  // initialized head cannot produce the high-confidence pseudo-label pairs
  // the calibration graphs are built from, so with `false` the dual
  // calibration never engages at small scale.
  bool kmeans_head_init = true;

  void validate() const;
  int resolve_clusters(const MultiViewDataset& ds) const;
};

struct EpochRecord {
  std::string phase;  // "pretrain" or "train"
  int epoch = 0;
  double recon = 0.0;
  double local = 0.0;
  double global = 0.0;
  double consistency = 0.0;
  // Recomposed from the component fields as
  // recon + alpha*local + beta*global + mu*consistency.
  double total = 0.0;
  Vector w, a, q;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  // Header: phase,epoch,loss_recon,loss_local,loss_global,loss_consistency,
  //         loss_total,w_0..w_{V-1},a_0..a_{V-1},q_0..q_{V-1}
  void write_csv(std::ostream& out, int view_count) const;
};

// Detached pseudo-label graph targets for one batch, in unordered pair
// order (0,1),(0,2),...,(V-2,V-1). The trainer recomputes them each step;
// the finite-difference gradient checks pin them so the loss being
// differentiated matches what the analytic gradient claims.
struct FrozenTargets {
  Matrix w_global;
  std::vector<Matrix> w_locals;
};

// The forward graph of one contrastive training step: encode all views,
// fuse, build graphs, evaluate the calibration losses and combine them.
// Disabled losses are skipped and logged as zero.
struct StepGraph {
  ad::Var recon, total;
  std::optional<ad::Var> local, global, consistency;
  ad::Var a, q_next, w_next;  // 1 x V rows
  std::vector<ad::Var> z_views;
  ad::Var zg;
  FrozenTargets targets;
};

StepGraph build_step_graph(ad::Tape& tape, const BoundModel& bound,
                           std::span<const Matrix> batch_views, const TrainConfig& cfg,
                           const FusionState& fusion, const FrozenTargets* frozen = nullptr);

// Autoencoder stage: minimizes the reconstruction loss alone with Adam.
// When `history` is given, one record per epoch is appended.
ModelState pretrain(const MultiViewDataset& ds, const TrainConfig& cfg,
                    TrainHistory* history = nullptr);

// Joint contrastive-calibration stage over a pretrained model.
TrainHistory train(ModelState& model, const MultiViewDataset& ds, const TrainConfig& cfg);

enum class AssignRule { argmax, kmeans };
AssignRule parse_assign_rule(const std::string& s);

// Full-dataset Z^G with the stored fusion weights.
Matrix global_embedding(const ModelState& model, const MultiViewDataset& ds);

std::vector<int> predict_clusters(const ModelState& model, const MultiViewDataset& ds,
                                  AssignRule rule = AssignRule::argmax, std::uint64_t seed = 0);

}  // namespace dealmvc
