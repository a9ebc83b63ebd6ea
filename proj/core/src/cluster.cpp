#include "dealmvc/cluster.hpp"

#include <limits>
#include <random>

#include "dealmvc/errors.hpp"
#include "dealmvc/random.hpp"

namespace dealmvc {

namespace {

Eigen::Index nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& row,
                              double* dist2_out) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - row).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist2_out) *dist2_out = best_d;
  return best;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int max_iter) {
  const Eigen::Index n = x.rows();
  require(n > 0, ErrorKind::EmptyInput, "kmeans on empty matrix");
  require(k >= 1 && k <= n, ErrorKind::InvalidShape, "kmeans: need 1 <= k <= n");

  auto rng = make_rng(seed, rng_stream::kmeans);

  // k-means++ seeding
  Eigen::MatrixXd centroids(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centroids.row(0) = x.row(pick(rng));
  Eigen::VectorXd d2 = (x.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total <= 0.0) {
      chosen = pick(rng);
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    }
    centroids.row(c) = x.row(chosen);
    d2 = d2.cwiseMin((x.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  KMeansResult result;
  result.labels.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = static_cast<int>(nearest_centroid(centroids, x.row(i), nullptr));
      if (c != result.labels[static_cast<std::size_t>(i)]) {
        result.labels[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    result.iterations = iter + 1;
    if (!changed && iter > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(result.labels[static_cast<std::size_t>(i)]) += x.row(i);
      counts(result.labels[static_cast<std::size_t>(i)])++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) == 0) {
        // reseed with the point farthest from its centroid
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          double d = 0.0;
          nearest_centroid(centroids, x.row(i), &d);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        centroids.row(c) = x.row(far);
      } else {
        centroids.row(c) = sums.row(c) / counts(c);
      }
    }
    if (!changed) break;
  }

  result.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    result.inertia += (x.row(i) - centroids.row(result.labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  result.centroids = std::move(centroids);
  return result;
}

}  // namespace dealmvc
