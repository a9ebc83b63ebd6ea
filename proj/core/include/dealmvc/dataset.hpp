#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dealmvc {

using Matrix = Eigen::MatrixXd;

// V aligned data matrices over the same N samples, plus optional labels.
// Immutable after construction; safe to share across threads.
struct MultiViewDataset {
  std::vector<Matrix> views;                      // view v: N x d_v
  std::optional<std::vector<int>> labels;         // length N, values in [0, K)
  std::vector<std::string> names;                 // optional per-view identifiers

  int sample_count() const { return views.empty() ? 0 : static_cast<int>(views[0].rows()); }
  int view_count() const { return static_cast<int>(views.size()); }
  std::vector<int> view_dims() const;
  int cluster_count() const;  // 0 when no labels

  // Checks the type invariants (consistent rows, labels in range, every
  // cluster id present). `min_views` is 1 for unit-test fixtures, 2 otherwise.
  void validate(int min_views = 2) const;
};

enum class NormalizeMode { none, minmax, zscore };

NormalizeMode parse_normalize_mode(const std::string& s);
std::string to_string(NormalizeMode mode);

// Manifest: plain-text key/value file with keys `view.<i>.path`,
// `labels.path` (optional) and `name`. Paths are relative to the manifest.
MultiViewDataset load_dataset(const std::filesystem::path& manifest_path);

// Writes view_<v>.csv, labels.csv (when present) and manifest.txt into `dir`.
// Returns the manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const MultiViewDataset& ds,
                                    const std::string& name);

// K isotropic Gaussian clusters in a shared latent space; each view is an
// independent orthonormal linear map of the latent samples plus view noise.
// Cluster centers are mutually `separation * noise` apart in latent space.
MultiViewDataset generate_synthetic(int k, int n, const std::vector<int>& dims, double separation,
                                    double noise, std::uint64_t seed);

// minmax: each feature column to [0,1] (constant columns to 0);
// zscore: mean 0, unit population variance (constant columns to 0).
MultiViewDataset normalize_views(const MultiViewDataset& ds, NormalizeMode mode);

struct BatchView {
  std::vector<int> indices;

  Matrix view(const MultiViewDataset& ds, int v) const;
  int size() const { return static_cast<int>(indices.size()); }
};

// Partitions [0, N) into batches. A trailing singleton is merged into the
// previous batch (graph losses are degenerate on one sample). Deterministic
// for a fixed seed.
std::vector<BatchView> batch_iter(int n, int batch_size, bool shuffle, std::uint64_t seed);
std::vector<BatchView> batch_iter(const MultiViewDataset& ds, int batch_size, bool shuffle,
                                  std::uint64_t seed);

Matrix take_rows(const Matrix& m, std::span<const int> indices);

}  // namespace dealmvc
