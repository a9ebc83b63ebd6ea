#pragma once

// Finite-difference gradient checks for the full training losses. The
// detached pseudo-label targets are computed once and pinned, so the
// function being differentiated is exactly the one the analytic gradients
// describe; the threshold tau is chosen in a gap of the observed dot
// products so no finite-difference step crosses it.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "dealmvc/calibration.hpp"
#include "dealmvc/networks.hpp"
#include "dealmvc/trainer.hpp"

namespace gradcheck {

using dealmvc::BoundModel;
using dealmvc::FrozenTargets;
using dealmvc::Matrix;
using dealmvc::ModelState;
using dealmvc::MultiViewDataset;
using dealmvc::StepGraph;
using dealmvc::TrainConfig;

enum class Loss { recon, local, global, consistency, total };

inline const char* loss_name(Loss loss) {
  switch (loss) {
    case Loss::recon: return "L_R";
    case Loss::local: return "L_local";
    case Loss::global: return "L_global";
    case Loss::consistency: return "L_con";
    case Loss::total: return "L_total";
  }
  return "?";
}

struct Instance {
  ModelState model;
  std::vector<Matrix> views;
  TrainConfig cfg;
  FrozenTargets frozen;
};

inline dealmvc::ad::Var pick_loss(const StepGraph& g, Loss loss) {
  switch (loss) {
    case Loss::recon: return g.recon;
    case Loss::local: return *g.local;
    case Loss::global: return *g.global;
    case Loss::consistency: return *g.consistency;
    case Loss::total: return g.total;
  }
  return g.total;
}

// Small random model + batch. tau is placed mid-gap between the observed
// pseudo-label dot products.
inline Instance make_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Instance inst;
  inst.cfg.batch_size = 8;
  inst.cfg.hidden = {7};
  inst.cfg.embed_dim = 6;
  inst.cfg.clusters = 3;
  inst.cfg.seed = seed;

  const std::vector<int> dims = {3, 4};
  const int n = 5;
  inst.model = ModelState::init(dims, inst.cfg.embed_dim, inst.cfg.clusters, inst.cfg.hidden, seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int d : dims) {
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = gauss(rng);
    inst.views.push_back(std::move(x));
  }

  // Forward once to observe the dot products, then pick tau in the widest
  // gap so thresholding is locally constant under perturbation.
  dealmvc::ad::Tape tape;
  BoundModel bound = bind_model(tape, inst.model, false);
  inst.cfg.tau = 0.5;
  StepGraph probe = build_step_graph(tape, bound, inst.views, inst.cfg, inst.model.fusion);
  std::vector<double> dots;
  auto collect = [&](const Matrix& p_row, const Matrix& p_col) {
    for (Eigen::Index i = 0; i < p_row.rows(); ++i)
      for (Eigen::Index j = 0; j < p_col.rows(); ++j)
        if (i != j) dots.push_back(p_row.row(i).dot(p_col.row(j)));
  };
  // recover p matrices from the frozen targets' source: recompute directly
  Matrix zg = tape.value(probe.zg);
  Matrix pg = classify(inst.model.head, zg);
  std::vector<Matrix> pv;
  for (std::size_t v = 0; v < inst.views.size(); ++v) {
    pv.push_back(classify(inst.model.head, tape.value(probe.z_views[v])));
  }
  collect(pg, pg);
  for (std::size_t m = 0; m < pv.size(); ++m)
    for (std::size_t n2 = m + 1; n2 < pv.size(); ++n2) collect(pv[m], pv[n2]);
  std::sort(dots.begin(), dots.end());
  double best_lo = 0.15, best_hi = 0.85, best_gap = 0.0;
  std::vector<double> edges = {0.05, 0.95};
  edges.insert(edges.end(), dots.begin(), dots.end());
  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double lo = std::max(0.05, edges[i]);
    const double hi = std::min(0.95, edges[i + 1]);
    if (hi - lo > best_gap) {
      best_gap = hi - lo;
      best_lo = lo;
      best_hi = hi;
    }
  }
  inst.cfg.tau = 0.5 * (best_lo + best_hi);

  // Freeze the detached graph targets at the unperturbed point.
  inst.frozen.w_global = dealmvc::pseudo_label_graph(pg, pg, inst.cfg.tau).w;
  for (std::size_t m = 0; m < pv.size(); ++m)
    for (std::size_t n2 = m + 1; n2 < pv.size(); ++n2)
      inst.frozen.w_locals.push_back(
          dealmvc::pseudo_label_graph(pv[m], pv[n2], inst.cfg.tau).w);
  return inst;
}

inline double eval_loss(const Instance& inst, const ModelState& model, Loss loss) {
  dealmvc::ad::Tape tape;
  BoundModel bound = bind_model(tape, model, false);
  StepGraph g = build_step_graph(tape, bound, inst.views, inst.cfg, model.fusion, &inst.frozen);
  return tape.value(pick_loss(g, loss))(0, 0);
}

struct CheckStats {
  double max_rel_err = 0.0;
  int checked = 0;
};

// Samples `subset` random parameter entries and compares analytic gradients
// with central finite differences (step h). Entries where both sides are
// tiny are counted as exact.
inline CheckStats check_loss_gradients(const Instance& inst, Loss loss, int subset,
                                       std::uint64_t seed, double h = 1e-5) {
  ModelState model = inst.model;

  dealmvc::ad::Tape tape;
  BoundModel bound = bind_model(tape, model, true);
  StepGraph g = build_step_graph(tape, bound, inst.views, inst.cfg, model.fusion, &inst.frozen);
  tape.backward(pick_loss(g, loss));

  struct Entry {
    std::string name;
    Matrix* value;
    double analytic;
    Eigen::Index i, j;
  };
  std::vector<Entry> entries;
  std::size_t leaf_at = 0;
  model.for_each_param(ModelState::ParamGroup::all, [&](const std::string& name, Matrix& m) {
    while (bound.params[leaf_at].first != name) ++leaf_at;
    const Matrix& grad = tape.grad(bound.params[leaf_at].second);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        entries.push_back({name, &m, grad(i, j), i, j});
  });

  std::mt19937_64 rng(seed);
  std::shuffle(entries.begin(), entries.end(), rng);
  const int budget = std::min<int>(subset, static_cast<int>(entries.size()));

  CheckStats stats;
  for (int e = 0; e < budget; ++e) {
    Entry& entry = entries[static_cast<std::size_t>(e)];
    const double saved = (*entry.value)(entry.i, entry.j);
    (*entry.value)(entry.i, entry.j) = saved + h;
    const double up = eval_loss(inst, model, loss);
    (*entry.value)(entry.i, entry.j) = saved - h;
    const double down = eval_loss(inst, model, loss);
    (*entry.value)(entry.i, entry.j) = saved;

    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max(std::abs(fd), std::abs(entry.analytic));
    double rel = 0.0;
    if (denom > 1e-10) rel = std::abs(fd - entry.analytic) / denom;
    stats.max_rel_err = std::max(stats.max_rel_err, rel);
    ++stats.checked;
  }
  return stats;
}

}  // namespace gradcheck
