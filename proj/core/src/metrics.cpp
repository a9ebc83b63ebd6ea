#include "dealmvc/metrics.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "dealmvc/errors.hpp"

namespace dealmvc {

namespace {

std::vector<int> compact_ids(std::span<const int> labels, int* count) {
  std::map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int y : labels) {
    auto [it, inserted] = remap.emplace(y, static_cast<int>(remap.size()));
    out.push_back(it->second);
  }
  *count = static_cast<int>(remap.size());
  return out;
}

Eigen::MatrixXd contingency(std::span<const int> pred, std::span<const int> truth, int* n_pred,
                            int* n_truth) {
  std::vector<int> p = compact_ids(pred, n_pred);
  std::vector<int> t = compact_ids(truth, n_truth);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(*n_pred, *n_truth);
  for (std::size_t i = 0; i < p.size(); ++i) c(p[i], t[i]) += 1.0;
  return c;
}

void check_lengths(std::span<const int> pred, std::span<const int> truth) {
  require(!pred.empty() && !truth.empty(), ErrorKind::EmptyInput, "empty label vector");
  require(pred.size() == truth.size(), ErrorKind::LengthMismatch,
          "label lengths " + std::to_string(pred.size()) + " vs " + std::to_string(truth.size()));
}

// Square min-cost assignment, O(n^3) potentials method.
// Returns assignment[row] = column.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = match[static_cast<std::size_t>(j0)];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (match[static_cast<std::size_t>(j)] >= 1) assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)]) - 1] = j - 1;
  }
  return assignment;
}

double entropy(const Eigen::VectorXd& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts(i) > 0.0) {
      const double p = counts(i) / n;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

double clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
  check_lengths(pred, truth);
  int n_pred = 0, n_truth = 0;
  Eigen::MatrixXd c = contingency(pred, truth, &n_pred, &n_truth);

  const int side = std::max(n_pred, n_truth);
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(side, side);
  cost.topLeftCorner(n_pred, n_truth) = -c;

  std::vector<int> assignment = min_cost_assignment(cost);
  double matched = 0.0;
  for (int i = 0; i < n_pred; ++i) {
    const int j = assignment[static_cast<std::size_t>(i)];
    if (j < n_truth) matched += c(i, j);
  }
  return matched / static_cast<double>(pred.size());
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  check_lengths(pred, truth);
  int n_pred = 0, n_truth = 0;
  Eigen::MatrixXd c = contingency(pred, truth, &n_pred, &n_truth);
  const double n = static_cast<double>(pred.size());

  Eigen::VectorXd row = c.rowwise().sum();
  Eigen::VectorXd col = c.colwise().sum();
  const double h_pred = entropy(row, n);
  const double h_truth = entropy(col, n);

  double mi = 0.0;
  for (int i = 0; i < n_pred; ++i) {
    for (int j = 0; j < n_truth; ++j) {
      if (c(i, j) > 0.0) {
        mi += (c(i, j) / n) * std::log(n * c(i, j) / (row(i) * col(j)));
      }
    }
  }
  const double denom = 0.5 * (h_pred + h_truth);
  if (denom <= 0.0) return 1.0;  // both partitions are single clusters, hence identical
  return std::min(1.0, std::max(0.0, mi / denom));
}

double purity(std::span<const int> pred, std::span<const int> truth) {
  check_lengths(pred, truth);
  int n_pred = 0, n_truth = 0;
  Eigen::MatrixXd c = contingency(pred, truth, &n_pred, &n_truth);
  double total = 0.0;
  for (int i = 0; i < n_pred; ++i) total += c.row(i).maxCoeff();
  return total / static_cast<double>(pred.size());
}

ClusterResult evaluate_clustering(std::vector<int> pred, std::vector<int> truth) {
  ClusterResult result;
  result.acc = clustering_accuracy(pred, truth);
  result.nmi = nmi(pred, truth);
  result.pur = purity(pred, truth);
  result.predicted = std::move(pred);
  result.truth = std::move(truth);
  return result;
}

std::string ClusterResult::record() const {
  std::ostringstream out;
  out << "acc=" << acc << " nmi=" << nmi << " pur=" << pur << " n=" << predicted.size();
  return out.str();
}

}  // namespace dealmvc
