#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace dealmvc {

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x d
  double inertia = 0.0;
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed seed;
// empty clusters are reseeded with the farthest point.
KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int max_iter = 100);

}  // namespace dealmvc
