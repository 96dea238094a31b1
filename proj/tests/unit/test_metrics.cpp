#include <gtest/gtest.h>

#include <set>

#include "creditx/evaluation.hpp"
#include "creditx/metrics.hpp"
#include "support.hpp"

using namespace creditx;
using namespace creditx::metrics;
namespace ts = testing_support;

namespace {

Dataset labelled(std::size_t good, std::size_t bad) {
  Matrix x(good + bad, 1);
  std::vector<int> y(good + bad, 0);
  for (std::size_t i = 0; i < good + bad; ++i) {
    x(i, 0) = static_cast<double>(i);
    if (i >= good) y[i] = 1;
  }
  return Dataset::from_arrays({"x"}, x, y);
}

std::size_t bads(const Dataset& d) { return d.class_counts()[1]; }

}  // namespace

TEST(Confusion, CountsAndRates) {
  const auto cm = confusion_matrix({1, 1, 0, 0, 0}, {1, 0, 1, 0, 0});
  EXPECT_EQ(cm.tp, 1u);
  EXPECT_EQ(cm.fn, 1u);
  EXPECT_EQ(cm.fp, 1u);
  EXPECT_EQ(cm.tn, 2u);
  EXPECT_DOUBLE_EQ(cm.tpr(), 0.5);
  EXPECT_DOUBLE_EQ(cm.fpr(), 1.0 / 3.0);
  EXPECT_EQ(cm.to_json()["tn"], 2);
}

TEST(Confusion, ThresholdIsStrict) {
  const std::vector<double> p{0.5, 0.51, 0.2, 0.9};
  const auto cm = confusion_at({1, 1, 0, 0}, p);
  EXPECT_EQ(cm.tp, 1u);
  EXPECT_EQ(cm.fn, 1u);
  EXPECT_EQ(cm.fp, 1u);
  EXPECT_THROW(confusion_at({1}, std::vector<double>{0.2}, -0.1), ConfigError);
  EXPECT_THROW(confusion_matrix({1, 0}, {1}), DataError);
}

TEST(Roc, PerfectAndInvertedRankings) {
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(roc_auc(y, std::vector<double>{0.1, 0.2, 0.8, 0.9}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(y, std::vector<double>{0.9, 0.8, 0.2, 0.1}), 0.0);
  EXPECT_DOUBLE_EQ(gini(1.0), 1.0);
  EXPECT_DOUBLE_EQ(gini(0.5), 0.0);
  EXPECT_DOUBLE_EQ(gini(0.84), 0.68);
  EXPECT_THROW(gini(1.2), ComputeError);
}

TEST(Roc, TiesFormOneDiagonalStep) {
  const std::vector<int> y{0, 1, 0, 1};
  const auto curve = roc_curve(y, std::vector<double>{0.5, 0.5, 0.5, 0.5});
  EXPECT_DOUBLE_EQ(curve.auc, 0.5);
  ASSERT_EQ(curve.points.size(), 2u);
  EXPECT_EQ(curve.points.front().fpr, 0.0);
  EXPECT_EQ(curve.points.back().tpr, 1.0);
}

TEST(Roc, MatchesPairCountingOnRandomScores) {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 5 + rng.below(80);
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.below(2));
      s[i] = std::round(rng.normal() * 4.0) / 4.0;  // plenty of ties
    }
    EXPECT_NEAR(roc_auc(y, s), ts::mann_whitney_auc(y, s), 1e-12);
  }
}

TEST(Roc, InvariantUnderMonotoneTransform) {
  Rng rng(4);
  std::vector<int> y(60);
  std::vector<double> s(60), t(60);
  for (std::size_t i = 0; i < 60; ++i) {
    y[i] = i % 3 == 0;
    s[i] = rng.normal();
    t[i] = std::exp(3.0 * s[i]) + 2.0;
  }
  EXPECT_DOUBLE_EQ(roc_auc(y, s), roc_auc(y, t));
}

TEST(Roc, RejectsDegenerateInput) {
  EXPECT_THROW(roc_auc({1, 1}, std::vector<double>{0.1, 0.2}), DataError);
  EXPECT_THROW(roc_auc({1, 0}, std::vector<double>{0.1}), DataError);
  EXPECT_THROW(roc_auc({1, 0}, std::vector<double>{0.1, std::nan("")}), DataError);
}

TEST(Split, SeventyFiveTwentyFive) {
  const auto s = train_test_split(labelled(60, 40), 0.75, 1);
  EXPECT_EQ(s.train.data().rows(), 75u);
  EXPECT_EQ(s.test.data().rows(), 25u);
  EXPECT_EQ(bads(s.train.data()), 30u);
}

TEST(Split, StratifiedKeepsTheBadRate) {
  const auto s = train_test_split(labelled(88, 12), 0.75, 2);
  EXPECT_EQ(s.test.data().class_counts()[0], 22u);
  EXPECT_EQ(bads(s.test.data()), 3u);
  std::set<std::size_t> all(s.train.source_rows().begin(), s.train.source_rows().end());
  for (auto r : s.test.source_rows()) EXPECT_TRUE(all.insert(r).second);
  EXPECT_EQ(all.size(), 100u);
}

TEST(Split, DeterministicPerSeed) {
  const auto d = labelled(50, 20);
  EXPECT_EQ(train_test_split(d, 0.7, 9).test.source_rows(), train_test_split(d, 0.7, 9).test.source_rows());
  EXPECT_NE(train_test_split(d, 0.7, 9).test.source_rows(), train_test_split(d, 0.7, 10).test.source_rows());
  EXPECT_THROW(train_test_split(d, 1.0, 1), ConfigError);
}

TEST(KFold, FoldsPartitionRowsAndKeepBothClasses) {
  const auto d = labelled(90, 11);
  const auto folds = stratified_kfold(d, 5, 3);
  ASSERT_EQ(folds.size(), 5u);
  std::multiset<std::size_t> seen;
  for (const auto& f : folds) {
    EXPECT_GE(bads(f.test.data()), 2u);
    EXPECT_LE(bads(f.test.data()), 3u);
    EXPECT_EQ(f.train.data().rows() + f.test.data().rows(), 101u);
    seen.insert(f.test.source_rows().begin(), f.test.source_rows().end());
  }
  EXPECT_EQ(seen.size(), 101u);
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 101u);
}

TEST(KFold, Errors) {
  EXPECT_THROW(stratified_kfold(labelled(10, 3), 1, 0), ConfigError);
  EXPECT_THROW(stratified_kfold(labelled(10, 3), 5, 0), DataError);  // 3 bad rows cannot fill 5 folds
  EXPECT_THROW(stratified_kfold(labelled(2, 1), 4, 0), ConfigError);
}

TEST(Stats, MeanAndSampleStd) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(mean(v), 5.0);
  EXPECT_NEAR(sample_std(v), std::sqrt(32.0 / 7.0), 1e-15);
  EXPECT_EQ(sample_std(std::vector<double>{3.0}), 0.0);
}

TEST(CrossValidate, ConstantFoldsHaveZeroSpread) {
  // Perfectly separable on x: every fold scores Gini 1.
  const auto d = labelled(40, 20);
  evaluation::ModelSpec spec;
  spec.family = models::Family::logistic;
  const auto r = evaluation::cross_validate(spec, {}, d, 4, 5);
  ASSERT_EQ(r.folds.size(), 4u);
  for (double g : r.folds) EXPECT_DOUBLE_EQ(g, 1.0);
  EXPECT_EQ(r.std, 0.0);
  EXPECT_DOUBLE_EQ(r.mean, 1.0);
}

TEST(CrossValidate, SeedDeterminesTheResult) {
  const auto d = ts::gaussian_dataset(6, 200, 3, [](std::span<const double> x) { return x[0] - 1.0; });
  evaluation::ModelSpec spec;
  spec.family = models::Family::gradient_boosting;
  spec.config.boost_rounds = 20;
  const resampling::ResamplingStrategy smote{resampling::Kind::smote, 5, 0};
  const auto a = evaluation::cross_validate(spec, smote, d, 3, 11);
  const auto b = evaluation::cross_validate(spec, smote, d, 3, 11);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(CrossValidate, ClassWeightsOnlyForWeightedLossModels) {
  evaluation::ModelSpec spec;
  spec.family = models::Family::random_forest;
  const resampling::ResamplingStrategy cw{resampling::Kind::class_weight_proportional, 5, 0};
  EXPECT_THROW(evaluation::cross_validate(spec, cw, labelled(40, 20), 4, 5), ConfigError);
}

TEST(Holdout, ReportsSizesAndConfusion) {
  const auto d = ts::gaussian_dataset(7, 160, 2, [](std::span<const double> x) { return 2.0 * x[0]; });
  evaluation::ModelSpec spec;
  spec.family = models::Family::logistic;
  const auto h = evaluation::evaluate_holdout(spec, {}, d, 0.75, 1);
  EXPECT_EQ(h.train_rows + h.test_rows, 160u);
  EXPECT_EQ(h.confusion.total(), h.test_rows);
  EXPECT_GT(h.roc.auc, 0.7);
}
