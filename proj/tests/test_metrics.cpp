#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "dealmvc/errors.hpp"
#include "dealmvc/metrics.hpp"
#include "doctest.h"

using namespace dealmvc;

namespace {

// Exhaustive maximization over one-to-one cluster-to-class mappings;
// feasible for <= 5 clusters on either side.
double brute_force_acc(const std::vector<int>& pred, const std::vector<int>& truth) {
  auto compact = [](const std::vector<int>& labels) {
    std::map<int, int> remap;
    std::vector<int> out;
    for (int y : labels) out.push_back(remap.emplace(y, static_cast<int>(remap.size())).first->second);
    return out;
  };
  std::vector<int> p = compact(pred);
  std::vector<int> t = compact(truth);
  const int np = *std::max_element(p.begin(), p.end()) + 1;
  const int nt = *std::max_element(t.begin(), t.end()) + 1;
  const int side = std::max(np, nt);

  std::vector<int> perm(static_cast<std::size_t>(side));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    int hits = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (perm[static_cast<std::size_t>(p[i])] == t[i]) ++hits;
    }
    best = std::max(best, static_cast<double>(hits) / static_cast<double>(p.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::vector<int> random_labels(int n, int k, std::mt19937_64& rng) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int& y : out) y = static_cast<int>(rng() % static_cast<std::uint64_t>(k));
  return out;
}

}  // namespace

TEST_CASE("clustering_accuracy: hand values") {
  std::vector<int> a = {0, 1, 2, 0, 1};
  CHECK(clustering_accuracy(a, a) == doctest::Approx(1.0));

  std::vector<int> renamed = {2, 0, 1, 2, 0};
  CHECK(clustering_accuracy(renamed, a) == doctest::Approx(1.0));

  std::vector<int> pred = {0, 0, 1, 1};
  std::vector<int> truth = {1, 1, 1, 0};
  CHECK(clustering_accuracy(pred, truth) == doctest::Approx(0.75));
  CHECK(brute_force_acc(pred, truth) == doctest::Approx(0.75));
}

TEST_CASE("clustering_accuracy: error paths") {
  std::vector<int> a = {0, 1};
  std::vector<int> b = {0, 1, 2};
  try {
    clustering_accuracy(a, b);
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LengthMismatch);
  }
  std::vector<int> empty;
  try {
    clustering_accuracy(empty, empty);
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyInput);
  }
}

TEST_CASE("nmi: hand values") {
  std::vector<int> a = {0, 0, 1, 1};
  CHECK(nmi(a, a) == doctest::Approx(1.0));

  std::vector<int> constant = {0, 0, 0, 0};
  CHECK(nmi(constant, a) == doctest::Approx(0.0));

  std::vector<int> independent = {0, 1, 0, 1};
  std::vector<int> other = {0, 0, 1, 1};
  CHECK(nmi(independent, other) == doctest::Approx(0.0).epsilon(1e-9));

  // identical up to renaming
  std::vector<int> renamed = {7, 7, 3, 3};
  CHECK(nmi(renamed, a) == doctest::Approx(1.0));
}

TEST_CASE("purity: hand values") {
  std::vector<int> a = {0, 1, 0, 1};
  CHECK(purity(a, a) == doctest::Approx(1.0));

  std::vector<int> singletons = {0, 1, 2, 3};
  std::vector<int> truth = {0, 0, 1, 1};
  CHECK(purity(singletons, truth) == doctest::Approx(1.0));

  std::vector<int> pred = {0, 0, 1, 1};
  std::vector<int> t2 = {0, 1, 1, 1};
  CHECK(purity(pred, t2) == doctest::Approx(0.75));
}

TEST_CASE("permutation invariance of all three metrics") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10 + static_cast<int>(rng() % 40);
    const int k = 2 + static_cast<int>(rng() % 4);
    std::vector<int> pred = random_labels(n, k, rng);
    std::vector<int> truth = random_labels(n, k, rng);

    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> pred_renamed, truth_renamed;
    for (int y : pred) pred_renamed.push_back(perm[static_cast<std::size_t>(y)] + 100);
    for (int y : truth) truth_renamed.push_back(perm[static_cast<std::size_t>(y)] - 50);

    CHECK(clustering_accuracy(pred_renamed, truth) ==
          doctest::Approx(clustering_accuracy(pred, truth)).epsilon(1e-12));
    CHECK(nmi(pred_renamed, truth_renamed) == doctest::Approx(nmi(pred, truth)).epsilon(1e-12));
    CHECK(purity(pred_renamed, truth) == doctest::Approx(purity(pred, truth)).epsilon(1e-12));
  }
}

TEST_CASE("accuracy equals brute-force permutation maximum for <= 5 clusters") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 30);
    const int kp = 2 + static_cast<int>(rng() % 4);  // up to 5 predicted clusters
    const int kt = 2 + static_cast<int>(rng() % 4);
    std::vector<int> pred = random_labels(n, kp, rng);
    std::vector<int> truth = random_labels(n, kt, rng);
    CHECK(clustering_accuracy(pred, truth) ==
          doctest::Approx(brute_force_acc(pred, truth)).epsilon(1e-12));
  }
}

TEST_CASE("metric bounds on random label pairs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 50);
    const int kp = 1 + static_cast<int>(rng() % 6);
    const int kt = 1 + static_cast<int>(rng() % 6);
    std::vector<int> pred = random_labels(n, kp, rng);
    std::vector<int> truth = random_labels(n, kt, rng);
    const double acc = clustering_accuracy(pred, truth);
    const double mi = nmi(pred, truth);
    const double pur = purity(pred, truth);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    CHECK(mi >= 0.0);
    CHECK(mi <= 1.0);
    CHECK(pur >= 0.0);
    CHECK(pur <= 1.0);
  }
}

TEST_CASE("cluster result record") {
  ClusterResult result = evaluate_clustering({0, 0, 1, 1}, {1, 1, 1, 0});
  CHECK(result.acc == doctest::Approx(0.75));
  CHECK(result.record().find("acc=0.75") != std::string::npos);
}
