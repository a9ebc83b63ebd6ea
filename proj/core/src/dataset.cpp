#include "dealmvc/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/QR>

#include "dealmvc/csv.hpp"
#include "dealmvc/errors.hpp"
#include "dealmvc/random.hpp"

namespace dealmvc {

std::vector<int> MultiViewDataset::view_dims() const {
  std::vector<int> dims;
  dims.reserve(views.size());
  for (const Matrix& v : views) dims.push_back(static_cast<int>(v.cols()));
  return dims;
}

int MultiViewDataset::cluster_count() const {
  if (!labels) return 0;
  int k = 0;
  for (int y : *labels) k = std::max(k, y + 1);
  return k;
}

void MultiViewDataset::validate(int min_views) const {
  require(view_count() >= min_views, ErrorKind::TooFewViews,
          "need at least " + std::to_string(min_views) + " views, got " +
              std::to_string(view_count()));
  const int n = sample_count();
  for (int v = 0; v < view_count(); ++v) {
    require(views[static_cast<std::size_t>(v)].rows() > 0 && views[static_cast<std::size_t>(v)].cols() > 0,
            ErrorKind::EmptyView, "view " + std::to_string(v) + " is empty");
    require(static_cast<int>(views[static_cast<std::size_t>(v)].rows()) == n, ErrorKind::MismatchedRows,
            "view " + std::to_string(v) + " has " +
                std::to_string(views[static_cast<std::size_t>(v)].rows()) + " rows, expected " +
                std::to_string(n));
  }
  if (labels) {
    require(static_cast<int>(labels->size()) == n, ErrorKind::MismatchedRows,
            "labels length " + std::to_string(labels->size()) + " vs N=" + std::to_string(n));
    const int k = cluster_count();
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (int y : *labels) {
      require(y >= 0 && y < k, ErrorKind::LabelOutOfRange, "label " + std::to_string(y));
      seen[static_cast<std::size_t>(y)] = true;
    }
    for (int c = 0; c < k; ++c) {
      require(seen[static_cast<std::size_t>(c)], ErrorKind::LabelOutOfRange,
              "cluster id " + std::to_string(c) + " has no samples");
    }
  }
}

NormalizeMode parse_normalize_mode(const std::string& s) {
  if (s == "none") return NormalizeMode::none;
  if (s == "minmax") return NormalizeMode::minmax;
  if (s == "zscore") return NormalizeMode::zscore;
  raise(ErrorKind::InvalidInput, "unknown normalize mode '" + s + "'");
}

std::string to_string(NormalizeMode mode) {
  switch (mode) {
    case NormalizeMode::none: return "none";
    case NormalizeMode::minmax: return "minmax";
    case NormalizeMode::zscore: return "zscore";
  }
  return "none";
}

namespace {

std::map<std::string, std::string> read_manifest_kv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::MissingDataset, "cannot open manifest " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}

}  // namespace

MultiViewDataset load_dataset(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::exists(manifest_path)) {
    raise(ErrorKind::MissingDataset, manifest_path.string() + " does not exist");
  }
  auto kv = read_manifest_kv(manifest_path);
  const auto base = manifest_path.parent_path();

  MultiViewDataset ds;
  for (int v = 0;; ++v) {
    auto it = kv.find("view." + std::to_string(v) + ".path");
    if (it == kv.end()) break;
    ds.views.push_back(csv::read_matrix(base / it->second));
    ds.names.push_back("view." + std::to_string(v));
  }
  require(ds.view_count() >= 2, ErrorKind::TooFewViews,
          "manifest must list at least 2 views (view.0.path, view.1.path, ...)");
  if (auto it = kv.find("name"); it != kv.end() && !it->second.empty()) {
    for (int v = 0; v < ds.view_count(); ++v)
      ds.names[static_cast<std::size_t>(v)] = it->second + "/view." + std::to_string(v);
  }
  if (auto it = kv.find("labels.path"); it != kv.end()) {
    ds.labels = csv::read_labels(base / it->second);
  }
  ds.validate();
  return ds;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const MultiViewDataset& ds,
                                    const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (int v = 0; v < ds.view_count(); ++v) {
    csv::write_matrix(dir / ("view_" + std::to_string(v) + ".csv"),
                      ds.views[static_cast<std::size_t>(v)]);
  }
  if (ds.labels) csv::write_labels(dir / "labels.csv", *ds.labels);

  const auto manifest = dir / "manifest.txt";
  std::ofstream out(manifest);
  if (!out) raise(ErrorKind::IOFailure, "cannot write " + manifest.string());
  if (!name.empty()) out << "name = " << name << "\n";
  for (int v = 0; v < ds.view_count(); ++v) {
    out << "view." << v << ".path = view_" << v << ".csv\n";
  }
  if (ds.labels) out << "labels.path = labels.csv\n";
  if (!out) raise(ErrorKind::IOFailure, "write failed: " + manifest.string());
  return manifest;
}

MultiViewDataset generate_synthetic(int k, int n, const std::vector<int>& dims, double separation,
                                    double noise, std::uint64_t seed) {
  require(k >= 2, ErrorKind::InvalidShape, "need K >= 2 clusters");
  require(n >= k, ErrorKind::InvalidShape, "need N >= K samples");
  require(!dims.empty(), ErrorKind::InvalidShape, "need at least one view dimension");
  for (int d : dims) require(d >= 1, ErrorKind::InvalidShape, "view dimensions must be positive");
  require(separation >= 0.0, ErrorKind::InvalidShape, "separation must be >= 0");
  require(noise > 0.0, ErrorKind::InvalidShape, "noise must be > 0");

  auto rng = make_rng(seed, rng_stream::synthetic);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Latent space R^K with centers on scaled basis vectors; every pair of
  // centers is exactly `separation * noise` apart.
  const int latent_dim = k;
  const double center_scale = separation * noise / std::sqrt(2.0);

  std::vector<int> labels(static_cast<std::size_t>(n));
  Matrix latent(n, latent_dim);
  for (int i = 0; i < n; ++i) {
    const int y = i % k;
    labels[static_cast<std::size_t>(i)] = y;
    for (int d = 0; d < latent_dim; ++d) {
      latent(i, d) = (d == y ? center_scale : 0.0) + noise * gauss(rng);
    }
  }

  MultiViewDataset ds;
  for (std::size_t v = 0; v < dims.size(); ++v) {
    const int dv = dims[v];
    // Orthonormal map: isometric embedding when d_v >= K, projection otherwise.
    Matrix g(std::max(dv, latent_dim), std::min(dv, latent_dim));
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = gauss(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
    Matrix map = dv >= latent_dim ? q : Matrix(q.transpose());  // d_v x K

    Matrix x = latent * map.transpose();
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) += noise * gauss(rng);
    ds.views.push_back(std::move(x));
    ds.names.push_back("synthetic/view." + std::to_string(v));
  }
  ds.labels = std::move(labels);
  ds.validate();
  return ds;
}

MultiViewDataset normalize_views(const MultiViewDataset& ds, NormalizeMode mode) {
  if (mode == NormalizeMode::none) return ds;
  MultiViewDataset out = ds;
  for (Matrix& x : out.views) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (mode == NormalizeMode::minmax) {
        const double lo = x.col(j).minCoeff();
        const double hi = x.col(j).maxCoeff();
        if (hi - lo < 1e-12) {
          x.col(j).setZero();
        } else {
          x.col(j) = (x.col(j).array() - lo) / (hi - lo);
        }
      } else {
        const double mean = x.col(j).mean();
        const double var = (x.col(j).array() - mean).square().mean();
        if (var < 1e-24) {
          x.col(j).setZero();
        } else {
          x.col(j) = (x.col(j).array() - mean) / std::sqrt(var);
        }
      }
    }
  }
  return out;
}

Matrix BatchView::view(const MultiViewDataset& ds, int v) const {
  return take_rows(ds.views.at(static_cast<std::size_t>(v)), indices);
}

std::vector<BatchView> batch_iter(int n, int batch_size, bool shuffle, std::uint64_t seed) {
  require(batch_size >= 2, ErrorKind::BatchTooSmall, "batch size must be >= 2");
  require(n >= 2, ErrorKind::BatchTooSmall, "need at least 2 samples to form batches");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    auto rng = make_rng(seed, rng_stream::shuffle);
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<BatchView> batches;
  for (int at = 0; at < n; at += batch_size) {
    const int len = std::min(batch_size, n - at);
    BatchView b;
    b.indices.assign(order.begin() + at, order.begin() + at + len);
    batches.push_back(std::move(b));
  }
  if (batches.size() >= 2 && batches.back().size() == 1) {
    batches[batches.size() - 2].indices.push_back(batches.back().indices[0]);
    batches.pop_back();
  }
  return batches;
}

std::vector<BatchView> batch_iter(const MultiViewDataset& ds, int batch_size, bool shuffle,
                                  std::uint64_t seed) {
  return batch_iter(ds.sample_count(), batch_size, shuffle, seed);
}

Matrix take_rows(const Matrix& m, std::span<const int> indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(indices[i]);
  }
  return out;
}

}  // namespace dealmvc
