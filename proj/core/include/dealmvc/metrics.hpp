#pragma once

#include <span>
#include <string>
#include <vector>

namespace dealmvc {

struct ClusterResult {
  std::vector<int> predicted;
  std::vector<int> truth;
  double acc = 0.0;
  double nmi = 0.0;
  double pur = 0.0;

  // Single-line key=value record appended to run logs.
  std::string record() const;
};

// Best one-to-one matching fraction via optimal assignment on the
// contingency matrix. Predicted clusters beyond the truth class count
// contribute zero matches.
double clustering_accuracy(std::span<const int> pred, std::span<const int> truth);

// Mutual information normalized by the arithmetic mean of the two partition
// entropies. Identical partitions (up to renaming) give 1; a zero-entropy
// partition independent of the other gives 0.
double nmi(std::span<const int> pred, std::span<const int> truth);

// Mean over predicted clusters of the dominant true-class fraction.
double purity(std::span<const int> pred, std::span<const int> truth);

ClusterResult evaluate_clustering(std::vector<int> pred, std::vector<int> truth);

}  // namespace dealmvc
