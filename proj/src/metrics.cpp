#include "creditx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace creditx {

// The single place allowed to mint train/test partitions.
struct PartitionAccess {
  static TrainView train(const Dataset& d, std::vector<std::size_t> rows) {
    auto part = d.subset(rows);  // before `rows` is moved from
    return TrainView(std::move(part), std::move(rows));
  }
  static TestView test(const Dataset& d, std::vector<std::size_t> rows) {
    auto part = d.subset(rows);  // before `rows` is moved from
    return TestView(std::move(part), std::move(rows));
  }
};

namespace metrics {

namespace {

double ratio(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

std::array<std::vector<std::size_t>, 2> rows_by_class(const Dataset& d) {
  std::array<std::vector<std::size_t>, 2> out;
  for (std::size_t i = 0; i < d.rows(); ++i) out[d.y[i] == 1 ? 1 : 0].push_back(i);
  return out;
}

}  // namespace

double ConfusionMatrix::tpr() const { return ratio(tp, tp + fn); }
double ConfusionMatrix::fpr() const { return ratio(fp, fp + tn); }
double ConfusionMatrix::accuracy() const { return ratio(tp + tn, total()); }

nlohmann::json ConfusionMatrix::to_json() const {
  return {{"tp", tp}, {"fp", fp}, {"tn", tn}, {"fn", fn}, {"tpr", tpr()}, {"fpr", fpr()}};
}

ConfusionMatrix confusion_matrix(const std::vector<int>& y, const std::vector<int>& predicted) {
  if (y.size() != predicted.size()) throw DataError("confusion matrix: label and prediction lengths differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if ((y[i] != 0 && y[i] != 1) || (predicted[i] != 0 && predicted[i] != 1))
      throw DataError("confusion matrix: labels must be 0 or 1");
    if (y[i] == 1) (predicted[i] == 1 ? cm.tp : cm.fn)++;
    else (predicted[i] == 1 ? cm.fp : cm.tn)++;
  }
  return cm;
}

ConfusionMatrix confusion_at(const std::vector<int>& y, std::span<const double> p, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  std::vector<int> pred(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) pred[i] = p[i] > threshold ? 1 : 0;
  return confusion_matrix(y, pred);
}

nlohmann::json RocCurve::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) pts.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}});
  return {{"auc", auc}, {"gini", gini}, {"points", pts}};
}

RocCurve roc_curve(const std::vector<int>& y, std::span<const double> scores) {
  if (y.size() != scores.size()) throw DataError("roc: label and score lengths differ");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(scores[i])) throw DataError("roc: scores must be finite");
    pos += y[i] == 1;
  }
  const std::size_t neg = y.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("roc: both classes must be present");

  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0});
  // Twice the area in units of (one negative) x (one positive): integral, so exact.
  double area2 = 0.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t dtp = 0, dfp = 0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (y[order[i]] == 1 ? dtp : dfp)++;
    area2 += static_cast<double>(dfp) * static_cast<double>(2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    roc.points.push_back({ratio(fp, neg), ratio(tp, pos)});
  }
  roc.auc = area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  roc.gini = gini(roc.auc);
  return roc;
}

double roc_auc(const std::vector<int>& y, std::span<const double> scores) { return roc_curve(y, scores).auc; }

double gini(double auc) {
  if (!(auc >= 0.0 && auc <= 1.0)) throw ComputeError("gini: auc must lie in [0, 1]");
  return 2.0 * auc - 1.0;
}

Split train_test_split(const Dataset& data, double train_fraction, std::uint64_t seed, bool stratified) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  Rng rng(derive_seed(seed, "train-test-split"));
  std::vector<std::size_t> train, test;
  if (stratified) {
    auto groups = rows_by_class(data);
    if (groups[0].empty() || groups[1].empty()) throw DataError("stratified split needs both classes");
    const auto n = static_cast<double>(data.rows());
    const auto want = static_cast<std::size_t>(std::llround(train_fraction * n));
    std::array<std::size_t, 2> take{};
    std::array<double, 2> frac{};
    for (int c = 0; c < 2; ++c) {
      const double exact = train_fraction * static_cast<double>(groups[c].size());
      take[c] = static_cast<std::size_t>(std::floor(exact));
      frac[c] = exact - std::floor(exact);
    }
    // Largest remainder so the total matches round(fraction * n).
    while (take[0] + take[1] < want) {
      const int c = frac[1] > frac[0] ? 1 : 0;
      ++take[c];
      frac[c] = -1.0;
    }
    for (int c = 0; c < 2; ++c) {
      rng.shuffle(groups[c]);
      for (std::size_t i = 0; i < groups[c].size(); ++i) (i < take[c] ? train : test).push_back(groups[c][i]);
    }
  } else {
    std::vector<std::size_t> all(data.rows());
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(all);
    const auto want = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(all.size())));
    train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(want));
    test.assign(all.begin() + static_cast<std::ptrdiff_t>(want), all.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return Split{PartitionAccess::train(data, std::move(train)), PartitionAccess::test(data, std::move(test))};
}

std::vector<Split> stratified_kfold(const Dataset& data, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs k >= 2");
  if (k > data.rows()) throw ConfigError("cross-validation k exceeds the row count");
  auto groups = rows_by_class(data);
  Rng rng(derive_seed(seed, "kfold"));
  std::vector<std::size_t> fold_of(data.rows());
  std::size_t dealt = 0;
  for (auto& g : groups) {
    rng.shuffle(g);
    for (auto r : g) fold_of[r] = dealt++ % k;
  }
  std::vector<Split> out;
  out.reserve(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train, test;
    std::array<std::size_t, 2> test_cls{}, train_cls{};
    for (std::size_t r = 0; r < data.rows(); ++r) {
      const int c = data.y[r] == 1 ? 1 : 0;
      if (fold_of[r] == f) {
        test.push_back(r);
        ++test_cls[c];
      } else {
        train.push_back(r);
        ++train_cls[c];
      }
    }
    if (test_cls[0] == 0 || test_cls[1] == 0 || train_cls[0] == 0 || train_cls[1] == 0) {
      throw DataError("fold " + std::to_string(f) + " lacks a class; stratification cannot supply " +
                      std::to_string(k) + " folds");
    }
    out.push_back(Split{PartitionAccess::train(data, std::move(train)), PartitionAccess::test(data, std::move(test))});
  }
  return out;
}

TrainView full_training_view(const Dataset& data) {
  std::vector<std::size_t> all(data.rows());
  std::iota(all.begin(), all.end(), 0);
  return PartitionAccess::train(data, std::move(all));
}

double mean(std::span<const double> v) {
  if (v.empty()) return kMissing;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace metrics
}  // namespace creditx
