#include <algorithm>
#include <cmath>

#include "creditx/models.hpp"

namespace creditx::models {

int RegressionTree::leaf_index(std::span<const double> x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    const double v = x[static_cast<std::size_t>(n.feature)];
    const bool left = is_missing(v) ? n.default_left : v <= n.threshold;
    i = left ? n.left : n.right;
  }
  return i;
}

std::size_t RegressionTree::depth() const {
  if (oblivious) return levels.size();
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) {
      best = std::max(best, d[i]);
      continue;
    }
    d[static_cast<std::size_t>(n.left)] = d[i] + 1;
    d[static_cast<std::size_t>(n.right)] = d[i] + 1;
  }
  return best;
}

bool RegressionTree::has_covers() const {
  return !nodes.empty() && std::all_of(nodes.begin(), nodes.end(), [](const TreeNode& n) {
           return std::isfinite(n.cover) && n.cover >= 0.0;
         }) && nodes[0].cover > 0.0;
}

void RegressionTree::check() const {
  if (nodes.empty()) throw ComputeError("tree without nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) {
      if (!std::isfinite(n.value)) throw ComputeError("non-finite leaf value");
      continue;
    }
    if (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) ||
        n.left >= static_cast<int>(nodes.size()) || n.right >= static_cast<int>(nodes.size())) {
      throw ComputeError("tree children must follow their parent");
    }
    if (has_covers()) {
      const double sum = nodes[static_cast<std::size_t>(n.left)].cover + nodes[static_cast<std::size_t>(n.right)].cover;
      if (std::abs(sum - n.cover) > 1e-9 * std::max(1.0, n.cover)) throw ComputeError("cover additivity violated");
    }
  }
  if (oblivious) {
    const std::size_t internal = (std::size_t{1} << levels.size()) - 1;
    if (nodes.size() != 2 * internal + 1) throw ComputeError("oblivious tree layout is not complete");
    for (std::size_t i = 0; i < internal; ++i) {
      std::size_t level = 0;
      while (((std::size_t{1} << (level + 1)) - 1) <= i) ++level;
      if (nodes[i].feature != levels[level].first || nodes[i].threshold != levels[level].second) {
        throw ComputeError("oblivious level uses more than one split");
      }
    }
  }
}

RegressionTree RegressionTree::leaf(double value, double cover) {
  RegressionTree t;
  TreeNode n;
  n.value = value;
  n.cover = cover;
  t.nodes.push_back(n);
  return t;
}

RegressionTree RegressionTree::make_oblivious(std::vector<std::pair<int, double>> levels,
                                              std::vector<double> leaf_values, std::vector<double> node_covers) {
  RegressionTree t;
  t.oblivious = true;
  const std::size_t depth = levels.size();
  const std::size_t internal = (std::size_t{1} << depth) - 1;
  const std::size_t total = 2 * internal + 1;
  if (leaf_values.size() != internal + 1) throw ComputeError("oblivious tree needs 2^depth leaf values");
  if (!node_covers.empty() && node_covers.size() != total) throw ComputeError("oblivious cover count mismatch");
  t.nodes.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    auto& n = t.nodes[i];
    n.cover = node_covers.empty() ? kMissing : node_covers[i];
    if (i < internal) {
      std::size_t level = 0;
      while (((std::size_t{1} << (level + 1)) - 1) <= i) ++level;
      n.feature = levels[level].first;
      n.threshold = levels[level].second;
      n.left = static_cast<int>(2 * i + 1);
      n.right = static_cast<int>(2 * i + 2);
    } else {
      n.value = leaf_values[i - internal];
    }
  }
  for (std::size_t i = 0; i < internal; ++i) {
    auto& n = t.nodes[i];
    const double cl = t.nodes[2 * i + 1].cover, cr = t.nodes[2 * i + 2].cover;
    n.default_left = !(std::isfinite(cl) && std::isfinite(cr)) || cl >= cr;
  }
  t.levels = std::move(levels);
  return t;
}

double TreeEnsemble::margin(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return base_score + learning_rate * s;
}

double TreeEnsemble::link(double raw) const {
  if (kind == EnsembleKind::random_forest) return std::clamp(raw, 0.0, 1.0);
  return sigmoid(raw);
}

double TreeEnsemble::probability(std::span<const double> x) const { return link(margin(x)); }

double log_loss(const std::vector<int>& y, std::span<const double> p, const std::vector<double>& w) {
  double s = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = clamp_prob(p[i]);
    s -= w[i] * (y[i] == 1 ? std::log(q) : std::log(1.0 - q));
    sw += w[i];
  }
  return s / sw;
}

}  // namespace creditx::models
