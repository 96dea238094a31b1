#pragma once
// Helpers shared by the unit tests and the acceptance suite. The oracles here
// are written from the definitions and share no code with the library.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <unistd.h>
#include <string>
#include <vector>

#include "creditx/common.hpp"
#include "creditx/dataset.hpp"
#include "creditx/models.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using creditx::Matrix;
using creditx::Rng;
using creditx::models::RegressionTree;
using creditx::models::TreeEnsemble;
using creditx::models::TreeNode;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("creditx-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------- random trees

// Random binary tree with additive covers; nodes are stored parent-first.
inline RegressionTree random_tree(Rng& rng, std::size_t p, std::size_t max_depth) {
  RegressionTree t;
  std::function<int(std::size_t)> grow = [&](std::size_t depth) -> int {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    const bool split = depth < max_depth && (depth == 0 || rng.uniform() < 0.75);
    if (!split) {
      t.nodes[id].value = rng.normal();
      // Occasionally an empty leaf, as happens in bootstrapped trees.
      t.nodes[id].cover = rng.uniform() < 0.08 ? 0.0 : 1.0 + static_cast<double>(rng.below(40));
      return id;
    }
    t.nodes[id].feature = static_cast<int>(rng.below(p));
    t.nodes[id].threshold = std::round(rng.normal() * 8.0) / 8.0;
    const int l = grow(depth + 1);
    const int r = grow(depth + 1);
    auto& n = t.nodes[id];
    n.left = l;
    n.right = r;
    n.cover = t.nodes[l].cover + t.nodes[r].cover;
    n.default_left = t.nodes[l].cover >= t.nodes[r].cover;
    return id;
  };
  grow(0);
  if (!(t.nodes[0].cover > 0.0)) t.nodes[0].cover = 0.0;
  return t;
}

inline RegressionTree random_oblivious_tree(Rng& rng, std::size_t p, std::size_t depth) {
  std::vector<std::pair<int, double>> levels;
  for (std::size_t d = 0; d < depth; ++d)
    levels.emplace_back(static_cast<int>(rng.below(p)), std::round(rng.normal() * 8.0) / 8.0);
  const std::size_t leaves = std::size_t{1} << depth;
  std::vector<double> values(leaves), covers(2 * leaves - 1);
  for (std::size_t i = 0; i < leaves; ++i) {
    values[i] = rng.normal();
    covers[leaves - 1 + i] = rng.uniform() < 0.1 ? 0.0 : 1.0 + static_cast<double>(rng.below(30));
  }
  for (std::size_t i = leaves - 1; i-- > 0;) covers[i] = covers[2 * i + 1] + covers[2 * i + 2];
  return RegressionTree::make_oblivious(std::move(levels), std::move(values), std::move(covers));
}

// Ensemble of `trees` random trees whose root covers are positive.
inline TreeEnsemble random_ensemble(Rng& rng, std::size_t trees, std::size_t depth, std::size_t p, bool oblivious) {
  TreeEnsemble e;
  e.kind = oblivious ? creditx::models::EnsembleKind::oblivious_boosting
                     : creditx::models::EnsembleKind::gradient_boosting;
  e.base_score = rng.normal();
  e.learning_rate = 0.05 + 0.5 * rng.uniform();
  for (std::size_t j = 0; j < p; ++j) e.feature_names.push_back("f" + std::to_string(j));
  while (e.trees.size() < trees) {
    auto t = oblivious ? random_oblivious_tree(rng, p, 1 + rng.below(depth)) : random_tree(rng, p, depth);
    if (t.nodes[0].cover > 0.0) e.trees.push_back(std::move(t));
  }
  return e;
}

inline std::vector<double> random_row(Rng& rng, std::size_t p, double missing_rate = 0.0) {
  std::vector<double> x(p);
  for (auto& v : x) v = rng.uniform() < missing_rate ? creditx::kMissing : rng.normal();
  return x;
}

// ---------------------------------------------------------------- oracles

// Straight recursive walk; missing values follow the node's default child.
inline double walk(const RegressionTree& t, const std::vector<double>& x, std::size_t node = 0) {
  const TreeNode& n = t.nodes[node];
  if (n.feature < 0) return n.value;
  const double v = x[static_cast<std::size_t>(n.feature)];
  const bool go_left = std::isnan(v) ? n.default_left : v <= n.threshold;
  return walk(t, x, static_cast<std::size_t>(go_left ? n.left : n.right));
}

inline double walk_margin(const TreeEnsemble& e, const std::vector<double>& x) {
  double s = 0.0;
  for (const auto& t : e.trees) s += walk(t, x);
  return e.base_score + e.learning_rate * s;
}

// Path-dependent coalition value of one tree: splits on features in the
// coalition follow x, the others average their children by cover.
inline double coalition_value(const RegressionTree& t, const std::vector<double>& x, std::uint32_t coalition,
                              std::size_t node = 0) {
  const TreeNode& n = t.nodes[node];
  if (n.feature < 0) return n.value;
  const auto l = static_cast<std::size_t>(n.left), r = static_cast<std::size_t>(n.right);
  if (coalition >> n.feature & 1u) {
    const double v = x[static_cast<std::size_t>(n.feature)];
    const bool go_left = std::isnan(v) ? n.default_left : v <= n.threshold;
    return coalition_value(t, x, coalition, go_left ? l : r);
  }
  double wl = t.nodes[l].cover, wr = t.nodes[r].cover;
  if (!(n.cover > 0.0)) wl = wr = 0.5;
  const double total = wl + wr;
  return (wl > 0 ? wl / total * coalition_value(t, x, coalition, l) : 0.0) +
         (wr > 0 ? wr / total * coalition_value(t, x, coalition, r) : 0.0);
}

inline double ensemble_coalition_value(const TreeEnsemble& e, const std::vector<double>& x, std::uint32_t s) {
  double v = 0.0;
  for (const auto& t : e.trees) v += coalition_value(t, x, s);
  return e.base_score + e.learning_rate * v;
}

// Exact Shapley values over every subset of all p features (p <= ~12).
inline std::vector<double> naive_shapley(const TreeEnsemble& e, const std::vector<double>& x, double* phi0 = nullptr) {
  const std::size_t p = x.size();
  const std::uint32_t full = (1u << p);
  std::vector<double> value(full);
  for (std::uint32_t s = 0; s < full; ++s) value[s] = ensemble_coalition_value(e, x, s);
  std::vector<double> fact(p + 1, 1.0);
  for (std::size_t i = 1; i <= p; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> phi(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::uint32_t s = 0; s < full; ++s) {
      if (s >> i & 1u) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcount(s));
      const double weight = fact[size] * fact[p - size - 1] / fact[p];
      phi[i] += weight * (value[s | (1u << i)] - value[s]);
    }
  }
  if (phi0) *phi0 = value[0];
  return phi;
}

// Pair-counting AUC: P(score_bad > score_good) + 0.5 P(tie).
inline double mann_whitney_auc(const std::vector<int>& y, const std::vector<double>& s) {
  long double wins = 0.0L;
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    ++pos;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] == 1) continue;
      wins += s[i] > s[j] ? 1.0L : (s[i] == s[j] ? 0.5L : 0.0L);
    }
  }
  neg = y.size() - pos;
  return static_cast<double>(wins / (static_cast<long double>(pos) * static_cast<long double>(neg)));
}

inline creditx::Dataset gaussian_dataset(std::uint64_t seed, std::size_t n, std::size_t p,
                                         const std::function<double(std::span<const double>)>& score) {
  Rng rng(seed);
  Matrix x(n, p);
  std::vector<int> y(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) x(r, c) = rng.normal();
    y[r] = rng.uniform() < creditx::sigmoid(score(x.row(r))) ? 1 : 0;
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < p; ++c) names.push_back("x" + std::to_string(c));
  return creditx::Dataset::from_arrays(std::move(names), std::move(x), std::move(y));
}

}  // namespace testing_support
