#include <algorithm>
#include <cmath>
#include <numeric>

#include "creditx/models.hpp"
#include "feature_bins.hpp"

namespace creditx::models {

namespace {

using detail::FeatureBins;

struct ClassMass {
  double w0 = 0.0, w1 = 0.0, rows = 0.0;  // weighted class mass and bootstrap row count

  double total() const { return w0 + w1; }
  ClassMass& operator+=(const ClassMass& o) {
    w0 += o.w0;
    w1 += o.w1;
    rows += o.rows;
    return *this;
  }
  friend ClassMass operator-(ClassMass a, const ClassMass& b) {
    a.w0 -= b.w0;
    a.w1 -= b.w1;
    a.rows -= b.rows;
    return a;
  }
};

// Weighted Gini impurity times node mass.
double gini_mass(const ClassMass& m) {
  const double t = m.total();
  if (t <= 0.0) return 0.0;
  return t - (m.w0 * m.w0 + m.w1 * m.w1) / t;
}

struct TreeBuilder {
  const Dataset& data;
  const FeatureBins& fb;
  const TrainConfig& cfg;
  std::size_t mtry;
  std::vector<double> mult;  // bootstrap multiplicity per row
  Rng rng;
  RegressionTree tree;

  ClassMass mass_of(std::size_t r) const {
    const double m = mult[r] * data.w[r];
    return data.y[r] == 1 ? ClassMass{0.0, m, mult[r]} : ClassMass{m, 0.0, mult[r]};
  }

  int build(std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    ClassMass node;
    for (auto r : rows) node += mass_of(r);
    auto make_leaf = [&]() {
      auto& n = tree.nodes[static_cast<std::size_t>(id)];
      n.value = node.total() > 0.0 ? node.w1 / node.total() : 0.0;
      n.cover = node.total();
      return id;
    };
    const auto min_leaf = static_cast<double>(cfg.rf_min_leaf);
    if (node.w0 <= 0.0 || node.w1 <= 0.0 || node.rows < 2.0 * min_leaf ||
        (cfg.rf_max_depth > 0 && depth >= cfg.rf_max_depth)) {
      return make_leaf();
    }

    // Random feature subset without replacement.
    std::vector<std::size_t> candidates(fb.thresholds.size());
    std::iota(candidates.begin(), candidates.end(), 0);
    for (std::size_t i = 0; i < mtry; ++i) std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
    candidates.resize(mtry);

    const double parent = gini_mass(node);
    double best_gain = -1.0;  // any admissible split beats a leaf, as in CART
    int best_f = -1;
    std::size_t best_b = 0;
    bool best_missing_left = true;
    std::vector<ClassMass> hist;
    for (auto f : candidates) {
      const std::size_t nb = fb.n_bins(f);
      if (nb < 2) continue;
      hist.assign(nb, ClassMass{});
      ClassMass miss, total;
      for (auto r : rows) {
        const auto b = fb.bins[f][r];
        if (b == FeatureBins::kMissingBin) miss += mass_of(r);
        else hist[b] += mass_of(r);
      }
      for (const auto& h : hist) total += h;
      ClassMass left;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        left += hist[b];
        const ClassMass right_nm = total - left;
        const bool mleft = left.total() >= right_nm.total();
        ClassMass l = left, r = right_nm;
        if (mleft) l += miss;
        else r += miss;
        if (l.rows < min_leaf || r.rows < min_leaf) continue;
        const double gain = parent - gini_mass(l) - gini_mass(r);
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_b = b;
          best_missing_left = mleft;
        }
      }
    }
    if (best_f < 0) return make_leaf();

    const auto f = static_cast<std::size_t>(best_f);
    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows) {
      const auto b = fb.bins[f][r];
      const bool go_left = b == FeatureBins::kMissingBin ? best_missing_left : b <= best_b;
      (go_left ? lrows : rrows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int left = build(lrows, depth + 1);
    const int right = build(rrows, depth + 1);
    auto& n = tree.nodes[static_cast<std::size_t>(id)];
    n.feature = best_f;
    n.threshold = fb.thresholds[f][best_b];
    n.left = left;
    n.right = right;
    n.default_left = best_missing_left;
    n.cover = tree.nodes[static_cast<std::size_t>(left)].cover + tree.nodes[static_cast<std::size_t>(right)].cover;
    return id;
  }
};

}  // namespace

TreeEnsemble fit_random_forest(const Dataset& data, const TrainConfig& cfg) {
  data.validate();
  cfg.validate();
  const std::size_t n = data.rows(), p = data.cols();
  if (n == 0) throw DataError("random forest needs at least one row");
  const FeatureBins fb = FeatureBins::build(data.x, cfg.max_bins);
  const std::size_t mtry =
      std::clamp<std::size_t>(cfg.rf_max_features > 0 ? cfg.rf_max_features
                                                      : static_cast<std::size_t>(std::floor(std::sqrt(double(p)))),
                              1, std::max<std::size_t>(p, 1));

  TreeEnsemble ens;
  ens.kind = EnsembleKind::random_forest;
  ens.base_score = 0.0;
  ens.learning_rate = 1.0 / static_cast<double>(cfg.rf_trees);
  ens.feature_names = data.feature_names;
  ens.trees.resize(cfg.rf_trees);

  auto grow = [&](std::size_t t) {
    TreeBuilder b{data, fb, cfg, mtry, std::vector<double>(n, 0.0), Rng(derive_seed(cfg.seed, "tree" + std::to_string(t))), {}};
    for (std::size_t i = 0; i < n; ++i) b.mult[b.rng.below(n)] += 1.0;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (b.mult[i] > 0.0) rows.push_back(i);
    if (p == 0) {
      ClassMass m;
      for (auto r : rows) m += b.mass_of(r);
      ens.trees[t] = RegressionTree::leaf(m.total() > 0 ? m.w1 / m.total() : 0.0, m.total());
      return;
    }
    b.build(rows, 0);
    ens.trees[t] = std::move(b.tree);
  };

  // Trees are independent given their derived seeds; any worker count gives the same forest.
  parallel_for(cfg.rf_trees, grow);
  return ens;
}

}  // namespace creditx::models
