#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "creditx/models.hpp"
#include "feature_bins.hpp"
#include "holdout.hpp"

namespace creditx::models {

namespace {

using detail::FeatureBins;

struct Stats {
  double g = 0.0;
  double h = 0.0;
  double c = 0.0;  // summed sample weight

  Stats& operator+=(const Stats& o) {
    g += o.g;
    h += o.h;
    c += o.c;
    return *this;
  }
  friend Stats operator+(Stats a, const Stats& b) { return a += b; }
  friend Stats operator-(Stats a, const Stats& b) {
    a.g -= b.g;
    a.h -= b.h;
    a.c -= b.c;
    return a;
  }
};

double score(const Stats& s, double l2) { return s.c > 0.0 ? s.g * s.g / (s.h + l2) : 0.0; }

double newton_leaf(const Stats& s, double l2) { return s.c > 0.0 ? -s.g / (s.h + l2) : 0.0; }

// A candidate split of one node at one border; missing rows follow the child
// with the larger non-missing cover.
struct SplitEval {
  double gain = 0.0;
  bool missing_left = true;
  Stats left, right;
};

SplitEval evaluate(const Stats& left_nm, const Stats& total_nm, const Stats& miss, double l2) {
  SplitEval e;
  const Stats right_nm = total_nm - left_nm;
  e.missing_left = left_nm.c >= right_nm.c;
  e.left = e.missing_left ? left_nm + miss : left_nm;
  e.right = e.missing_left ? right_nm : right_nm + miss;
  e.gain = score(e.left, l2) + score(e.right, l2) - score(e.left + e.right, l2);
  return e;
}

constexpr double kMinGain = 1e-12;
constexpr double kMinHessian = 1e-12;

struct GradientBuffers {
  std::vector<double> g, h;
};

void logistic_gradients(const std::vector<int>& y, const std::vector<double>& w, const std::vector<std::size_t>& rows,
                        const std::vector<double>& margin, GradientBuffers& out) {
  out.g.resize(rows.size());
  out.h.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    const double p = sigmoid(margin[i]);
    out.g[i] = w[r] * (p - y[r]);
    out.h[i] = w[r] * p * (1.0 - p);
  }
}

double rows_loss(const Dataset& d, const std::vector<std::size_t>& rows, const std::vector<double>& margin) {
  double s = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    const double q = clamp_prob(sigmoid(margin[i]));
    s -= d.w[r] * (d.y[r] == 1 ? std::log(q) : std::log(1.0 - q));
    sw += d.w[r];
  }
  return s / sw;
}

// Level-wise growth of an unconstrained tree on local rows 0..n-1 (indices into
// `local_rows`, which map to dataset rows).
RegressionTree grow_plain(const FeatureBins& fb, const std::vector<std::size_t>& local_rows, const GradientBuffers& gb,
                          const std::vector<double>& w, std::size_t max_depth, double l2,
                          std::vector<int>& leaf_of_row) {
  struct Pending {
    int node;
    std::vector<std::size_t> members;  // local indices
  };
  RegressionTree tree;
  std::vector<Pending> frontier;
  {
    TreeNode root;
    tree.nodes.push_back(root);
    std::vector<std::size_t> all(local_rows.size());
    std::iota(all.begin(), all.end(), 0);
    frontier.push_back({0, std::move(all)});
  }
  leaf_of_row.assign(local_rows.size(), 0);
  const std::size_t p = fb.thresholds.size();
  std::vector<Stats> hist;

  auto finish_leaf = [&](Pending& pend) {
    Stats s;
    for (auto i : pend.members) s += Stats{gb.g[i], gb.h[i], w[local_rows[i]]};
    auto& node = tree.nodes[static_cast<std::size_t>(pend.node)];
    node.value = newton_leaf(s, l2);
    node.cover = s.c;
    for (auto i : pend.members) leaf_of_row[i] = pend.node;
  };

  for (std::size_t depth = 0; depth <= max_depth && !frontier.empty(); ++depth) {
    std::vector<Pending> next;
    for (auto& pend : frontier) {
      if (depth == max_depth || pend.members.size() < 2) {
        finish_leaf(pend);
        continue;
      }
      SplitEval best;
      int best_f = -1;
      std::size_t best_b = 0;
      for (std::size_t f = 0; f < p; ++f) {
        const std::size_t nb = fb.n_bins(f);
        if (nb < 2) continue;
        hist.assign(nb, Stats{});
        Stats miss, total;
        for (auto i : pend.members) {
          const Stats s{gb.g[i], gb.h[i], w[local_rows[i]]};
          const auto b = fb.bins[f][local_rows[i]];
          if (b == FeatureBins::kMissingBin) miss += s;
          else hist[b] += s;
        }
        for (const auto& s : hist) total += s;
        Stats left;
        for (std::size_t b = 0; b + 1 < nb; ++b) {
          left += hist[b];
          if (left.c <= 0.0) continue;
          if (left.c >= total.c) break;
          const auto e = evaluate(left, total, miss, l2);
          if (e.left.h < kMinHessian || e.right.h < kMinHessian) continue;
          if (e.gain > best.gain + kMinGain) {
            best = e;
            best_f = static_cast<int>(f);
            best_b = b;
          }
        }
      }
      if (best_f < 0) {
        finish_leaf(pend);
        continue;
      }
      const auto f = static_cast<std::size_t>(best_f);
      Pending l, r;
      for (auto i : pend.members) {
        const auto b = fb.bins[f][local_rows[i]];
        const bool go_left = b == FeatureBins::kMissingBin ? best.missing_left : b <= best_b;
        (go_left ? l : r).members.push_back(i);
      }
      l.node = static_cast<int>(tree.nodes.size());
      r.node = l.node + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(pend.node)];
      node.feature = best_f;
      node.threshold = fb.thresholds[f][best_b];
      node.left = l.node;
      node.right = r.node;
      node.default_left = best.missing_left;
      next.push_back(std::move(l));
      next.push_back(std::move(r));
    }
    frontier = std::move(next);
  }
  // Internal covers from the leaves up; children always follow their parent.
  for (std::size_t i = tree.nodes.size(); i-- > 0;) {
    auto& n = tree.nodes[i];
    if (!n.is_leaf())
      n.cover = tree.nodes[static_cast<std::size_t>(n.left)].cover + tree.nodes[static_cast<std::size_t>(n.right)].cover;
  }
  return tree;
}

struct ObliviousStructure {
  std::vector<std::pair<int, std::size_t>> splits;  // (feature, border)
  std::vector<bool> missing_left;                   // per node of the complete layout
};

// Chooses one (feature, border) per level maximizing the gain summed over all
// current leaves.
ObliviousStructure choose_oblivious(const FeatureBins& fb, const std::vector<std::size_t>& local_rows,
                                    const GradientBuffers& gb, const std::vector<double>& w, std::size_t depth,
                                    double l2, std::vector<std::uint32_t>& node_of_row) {
  ObliviousStructure st;
  const std::size_t n = local_rows.size();
  const std::size_t p = fb.thresholds.size();
  node_of_row.assign(n, 0);  // index within the current level
  std::vector<Stats> hist, miss, total;
  for (std::size_t level = 0; level < depth; ++level) {
    const std::size_t width = std::size_t{1} << level;
    double best_gain = kMinGain;
    int best_f = -1;
    std::size_t best_b = 0;
    for (std::size_t f = 0; f < p; ++f) {
      const std::size_t nb = fb.n_bins(f);
      if (nb < 2) continue;
      hist.assign(width * nb, Stats{});
      miss.assign(width, Stats{});
      total.assign(width, Stats{});
      const auto& bins = fb.bins[f];
      for (std::size_t i = 0; i < n; ++i) {
        const Stats s{gb.g[i], gb.h[i], w[local_rows[i]]};
        const auto b = bins[local_rows[i]];
        const std::size_t node = node_of_row[i];
        if (b == FeatureBins::kMissingBin) miss[node] += s;
        else hist[node * nb + b] += s;
      }
      for (std::size_t node = 0; node < width; ++node)
        for (std::size_t b = 0; b < nb; ++b) total[node] += hist[node * nb + b];
      std::vector<Stats> left(width);
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        double gain = 0.0;
        for (std::size_t node = 0; node < width; ++node) {
          left[node] += hist[node * nb + b];
          gain += evaluate(left[node], total[node], miss[node], l2).gain;
        }
        if (gain > best_gain + kMinGain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_b = b;
        }
      }
    }
    if (best_f < 0) break;
    // Route rows and record each node's missing direction.
    const auto f = static_cast<std::size_t>(best_f);
    std::vector<Stats> lnm(width), tnm(width);
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = fb.bins[f][local_rows[i]];
      if (b == FeatureBins::kMissingBin) continue;
      const Stats s{0.0, 0.0, w[local_rows[i]]};
      tnm[node_of_row[i]] += s;
      if (b <= best_b) lnm[node_of_row[i]] += s;
    }
    std::vector<bool> mleft(width);
    for (std::size_t node = 0; node < width; ++node) mleft[node] = lnm[node].c >= (tnm[node] - lnm[node]).c;
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = fb.bins[f][local_rows[i]];
      const bool go_left = b == FeatureBins::kMissingBin ? mleft[node_of_row[i]] : b <= best_b;
      node_of_row[i] = static_cast<std::uint32_t>(2 * node_of_row[i] + (go_left ? 0 : 1));
    }
    st.splits.emplace_back(best_f, best_b);
    st.missing_left.insert(st.missing_left.end(), mleft.begin(), mleft.end());
  }
  return st;
}

// Complete-layout covers from per-leaf covers.
std::vector<double> oblivious_covers(const std::vector<double>& leaf_cover, std::size_t depth) {
  const std::size_t internal = (std::size_t{1} << depth) - 1;
  std::vector<double> covers(2 * internal + 1, 0.0);
  for (std::size_t l = 0; l <= internal; ++l) covers[internal + l] = leaf_cover[l];
  for (std::size_t i = internal; i-- > 0;) covers[i] = covers[2 * i + 1] + covers[2 * i + 2];
  return covers;
}

enum class Shape { plain, oblivious };

TreeEnsemble boost(const Dataset& data, const TrainConfig& cfg, Shape shape, const RoundObserver& observer,
                   FitTrace* trace) {
  data.validate();
  cfg.validate();
  const std::size_t depth = shape == Shape::plain ? cfg.gb_depth : cfg.oblivious_depth;
  if (shape == Shape::oblivious && depth > 16) throw ConfigError("oblivious depth above 16 is not supported");

  TreeEnsemble ens;
  ens.kind = shape == Shape::plain ? EnsembleKind::gradient_boosting : EnsembleKind::oblivious_boosting;
  ens.learning_rate = cfg.learning_rate;
  ens.feature_names = data.feature_names;
  const bool ordered = shape == Shape::oblivious && cfg.ordered;
  ens.boosting_mode = ordered ? "ordered" : "plain";

  const auto split = detail::holdout(data, cfg.validation_fraction, derive_seed(cfg.seed, "early-stopping"));
  const auto& fit = split.fit;
  double sy = 0.0, sw = 0.0;
  for (auto r : fit) {
    sy += data.w[r] * data.y[r];
    sw += data.w[r];
  }
  ens.base_score = logit(sy / sw);

  FitTrace own_trace;
  FitTrace& tr = trace ? *trace : own_trace;
  tr = FitTrace{};
  tr.fit_rows = fit.size();
  tr.valid_rows = split.valid.size();
  if (sy <= 0.0 || sy >= sw) return ens;  // single class: prior only

  const Matrix fit_x = data.x.select_rows(fit);
  const FeatureBins fb = FeatureBins::build(fit_x, cfg.max_bins);
  std::vector<std::size_t> local(fit.size());
  std::iota(local.begin(), local.end(), 0);
  std::vector<double> fit_w(fit.size());
  std::vector<int> fit_y(fit.size());
  for (std::size_t i = 0; i < fit.size(); ++i) {
    fit_w[i] = data.w[fit[i]];
    fit_y[i] = data.y[fit[i]];
  }
  Dataset fit_view;
  fit_view.y = fit_y;
  fit_view.w = fit_w;

  std::vector<double> margin(fit.size(), ens.base_score);
  std::vector<double> valid_margin(split.valid.size(), ens.base_score);

  // Ordered mode: prefix models over blocks of one random permutation; prefix
  // model b has only seen rows of blocks < b.
  std::size_t blocks = ordered ? std::max<std::size_t>(2, cfg.ordered_blocks) : 0;
  std::vector<std::size_t> block_of(fit.size(), 0);
  std::vector<std::vector<double>> prefix_margin;
  if (ordered) {
    std::vector<std::size_t> perm(fit.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(cfg.seed, "ordered-permutation"));
    rng.shuffle(perm);
    for (std::size_t pos = 0; pos < perm.size(); ++pos) block_of[perm[pos]] = pos * blocks / perm.size();
    prefix_margin.assign(blocks, std::vector<double>(fit.size(), ens.base_score));
  }

  GradientBuffers gb, structure_gb;
  auto valid_loss = [&]() {
    return split.valid.empty() ? kMissing : rows_loss(data, split.valid, valid_margin);
  };
  double best_valid = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t round = 0; round < cfg.boost_rounds; ++round) {
    logistic_gradients(fit_y, fit_w, local, margin, gb);
    if (observer) {
      observer(RoundInfo{round, gb.g, gb.h, rows_loss(fit_view, local, margin), valid_loss()});
    }
    const GradientBuffers* for_structure = &gb;
    if (ordered) {
      structure_gb.g.resize(fit.size());
      structure_gb.h.resize(fit.size());
      for (std::size_t i = 0; i < fit.size(); ++i) {
        const double pr = sigmoid(prefix_margin[block_of[i]][i]);
        structure_gb.g[i] = fit_w[i] * (pr - fit_y[i]);
        structure_gb.h[i] = fit_w[i] * pr * (1.0 - pr);
      }
      for_structure = &structure_gb;
    }

    RegressionTree tree;
    std::vector<int> leaf_node(fit.size(), 0);
    if (shape == Shape::plain) {
      tree = grow_plain(fb, local, gb, fit_w, depth, cfg.l2, leaf_node);
    } else {
      std::vector<std::uint32_t> leaf;
      auto st = choose_oblivious(fb, local, *for_structure, fit_w, depth, cfg.l2, leaf);
      const std::size_t d = st.splits.size();
      const std::size_t nleaves = std::size_t{1} << d;
      std::vector<Stats> ls(nleaves);
      for (std::size_t i = 0; i < fit.size(); ++i) ls[leaf[i]] += Stats{gb.g[i], gb.h[i], fit_w[i]};
      std::vector<double> values(nleaves), leaf_cover(nleaves);
      for (std::size_t l = 0; l < nleaves; ++l) {
        values[l] = newton_leaf(ls[l], cfg.l2);
        leaf_cover[l] = ls[l].c;
      }
      std::vector<std::pair<int, double>> levels;
      for (auto [f, b] : st.splits)
        levels.emplace_back(f, fb.thresholds[static_cast<std::size_t>(f)][b]);
      tree = RegressionTree::make_oblivious(std::move(levels), values, oblivious_covers(leaf_cover, d));
      // Missing direction follows the node's training cover split.
      for (std::size_t i = 0; i < st.missing_left.size(); ++i)
        tree.nodes[i].default_left = st.missing_left[i];
      const std::size_t internal = nleaves - 1;
      for (std::size_t i = 0; i < fit.size(); ++i) leaf_node[i] = static_cast<int>(internal + leaf[i]);

      if (ordered) {
        for (std::size_t b = 1; b < blocks; ++b) {
          std::vector<Stats> ps(nleaves);
          for (std::size_t i = 0; i < fit.size(); ++i) {
            if (block_of[i] >= b) continue;
            const double pr = sigmoid(prefix_margin[b][i]);
            ps[leaf[i]] += Stats{fit_w[i] * (pr - fit_y[i]), fit_w[i] * pr * (1.0 - pr), fit_w[i]};
          }
          for (std::size_t i = 0; i < fit.size(); ++i)
            prefix_margin[b][i] += cfg.learning_rate * newton_leaf(ps[leaf[i]], cfg.l2);
        }
      }
    }

    for (std::size_t i = 0; i < fit.size(); ++i)
      margin[i] += cfg.learning_rate * tree.nodes[static_cast<std::size_t>(leaf_node[i])].value;
    for (std::size_t i = 0; i < split.valid.size(); ++i)
      valid_margin[i] += cfg.learning_rate * tree.predict(data.x.row(split.valid[i]));
    ens.trees.push_back(std::move(tree));

    tr.train_loss.push_back(rows_loss(fit_view, local, margin));
    const double vl = valid_loss();
    tr.valid_loss.push_back(vl);
    if (!split.valid.empty()) {
      if (vl < best_valid - 1e-12) {
        best_valid = vl;
        since_best = 0;
        tr.best_round = ens.trees.size();
      } else if (++since_best >= cfg.patience) {
        break;
      }
    } else {
      tr.best_round = ens.trees.size();
    }
  }
  ens.trees.resize(tr.best_round);
  return ens;
}

}  // namespace

TreeEnsemble fit_gradient_boosting(const Dataset& data, const TrainConfig& config, const RoundObserver& observer,
                                   FitTrace* trace) {
  return boost(data, config, Shape::plain, observer, trace);
}

TreeEnsemble fit_oblivious_boosting(const Dataset& data, const TrainConfig& config, const RoundObserver& observer,
                                    FitTrace* trace) {
  return boost(data, config, Shape::oblivious, observer, trace);
}

}  // namespace creditx::models
