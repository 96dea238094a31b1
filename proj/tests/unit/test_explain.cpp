#include <gtest/gtest.h>

#include "creditx/explain.hpp"
#include "support.hpp"

using namespace creditx;
using namespace creditx::explain;
using models::RegressionTree;
using models::TreeEnsemble;
namespace ts = testing_support;

namespace {

// x0 <= 0.5 -> -1 (cover 3), else +1 (cover 1).
TreeEnsemble stump_model() {
  RegressionTree t;
  t.nodes.resize(3);
  t.nodes[0].feature = 0;
  t.nodes[0].threshold = 0.5;
  t.nodes[0].left = 1;
  t.nodes[0].right = 2;
  t.nodes[0].cover = 4;
  t.nodes[1].value = -1;
  t.nodes[1].cover = 3;
  t.nodes[2].value = 1;
  t.nodes[2].cover = 1;
  TreeEnsemble e;
  e.base_score = 0.2;
  e.learning_rate = 0.5;
  e.feature_names = {"a", "b"};
  e.trees.push_back(t);
  return e;
}

Matrix random_rows(Rng& rng, std::size_t n, std::size_t p, double missing = 0.1) {
  Matrix x(n, p);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = ts::random_row(rng, p, missing);
    std::copy(row.begin(), row.end(), x.row(r).begin());
  }
  return x;
}

}  // namespace

TEST(TreeShap, StumpExample) {
  const auto e = stump_model();
  const std::vector<double> x{1.0, 9.0};
  const auto s = tree_shap(e, x);
  EXPECT_NEAR(s.phi0, 0.2 + 0.5 * -0.5, 1e-15);
  EXPECT_NEAR(s.phi[0], 0.5 * 1.5, 1e-15);
  EXPECT_EQ(s.phi[1], 0.0);
  EXPECT_NEAR(s.margin, 0.7, 1e-15);
  EXPECT_LT(s.additivity_gap(), 1e-15);
}

TEST(TreeShap, UnusedFeatureIsANullPlayer) {
  Rng rng(1);
  auto e = ts::random_ensemble(rng, 5, 4, 3, false);
  e.feature_names.push_back("unused");
  for (int rep = 0; rep < 20; ++rep) {
    auto row = ts::random_row(rng, 4, 0.1);
    EXPECT_EQ(tree_shap(e, row).phi[3], 0.0);
  }
}

TEST(TreeShap, MatchesNaiveEnumeration) {
  Rng rng(2);
  for (int rep = 0; rep < 30; ++rep) {
    const bool oblivious = rep % 3 == 0;
    const std::size_t p = 3 + rng.below(4);
    const auto e = ts::random_ensemble(rng, 1 + rng.below(6), 5, p, oblivious);
    for (int k = 0; k < 5; ++k) {
      const auto x = ts::random_row(rng, p, 0.15);
      double phi0 = 0;
      const auto oracle = ts::naive_shapley(e, x, &phi0);
      const auto s = tree_shap(e, x);
      EXPECT_NEAR(s.phi0, phi0, 1e-10);
      for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(s.phi[j], oracle[j], 1e-10) << "rep " << rep;
      const auto brute = brute_force_shapley(CoalitionEvaluator(e), x);
      for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(brute.phi[j], oracle[j], 1e-10);
    }
  }
}

TEST(CoalitionEvaluatorTest, AgreesWithRecursiveOracle) {
  Rng rng(3);
  const auto e = ts::random_ensemble(rng, 4, 4, 4, false);
  const CoalitionEvaluator ev(e);
  const auto x = ts::random_row(rng, 4, 0.2);
  for (std::uint32_t s = 0; s < 16; ++s) {
    std::vector<bool> in(4);
    for (std::size_t j = 0; j < 4; ++j) in[j] = s >> j & 1u;
    EXPECT_NEAR(ev.value(x, in), ts::ensemble_coalition_value(e, x, s), 1e-12);
  }
  EXPECT_THROW(ev.value(x, std::vector<bool>(3)), DataError);
}

TEST(TreeShap, ZeroTreeModel) {
  TreeEnsemble e;
  e.base_score = 1.7;
  e.feature_names = {"a", "b", "c"};
  const std::vector<double> x{1, 2, 3};
  const auto s = tree_shap(e, x);
  EXPECT_EQ(s.phi0, 1.7);
  EXPECT_EQ(s.phi, std::vector<double>(3, 0.0));
  EXPECT_EQ(s.margin, 1.7);
}

TEST(TreeShap, DuplicatedTreeDoublesAttributions) {
  Rng rng(4);
  auto once = ts::random_ensemble(rng, 1, 5, 5, false);
  once.base_score = 0.0;
  auto twice = once;
  twice.trees.push_back(once.trees[0]);
  for (int rep = 0; rep < 10; ++rep) {
    const auto x = ts::random_row(rng, 5, 0.1);
    const auto a = tree_shap(once, x), b = tree_shap(twice, x);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(b.phi[j], 2.0 * a.phi[j], 1e-12);
  }
}

TEST(TreeShap, AdditivityOnManyRows) {
  Rng rng(5);
  const auto e = ts::random_ensemble(rng, 40, 6, 12, false);
  const auto x = random_rows(rng, 200, 12, 0.2);
  for (const auto& s : tree_shap(e, x)) {
    EXPECT_LT(s.additivity_gap(), 1e-9);
    EXPECT_NEAR(s.margin, ts::walk_margin(e, s.x), 1e-12);
  }
}

TEST(TreeShap, TreesWithoutCoversRejected) {
  auto e = stump_model();
  e.trees[0].nodes[1].cover = kMissing;
  const std::vector<double> x{0, 0};
  EXPECT_THROW(tree_shap(e, x), ComputeError);
  EXPECT_THROW(CoalitionEvaluator{e}, ComputeError);
}

TEST(TreeShap, RowWidthMustMatch) {
  const auto e = stump_model();
  const std::vector<double> x{0};
  EXPECT_THROW(tree_shap(e, x), DataError);
}

TEST(BruteForce, RefusesMoreThanTwentyFeatures) {
  TreeEnsemble e;
  for (int j = 0; j < 21; ++j) e.feature_names.push_back("f" + std::to_string(j));
  const std::vector<double> x(21, 0.0);
  EXPECT_THROW(brute_force_shapley(CoalitionEvaluator(e), x), ComputeError);
}

TEST(GlobalImportanceTest, MeanAbsoluteAndRanking) {
  ShapValues a, b;
  a.phi = {1.0, -2.0, 0.5};
  b.phi = {-1.0, 0.0, 0.5};
  const auto gi = global_importance({a, b}, {"x", "y", "z"});
  EXPECT_EQ(gi.importance, (std::vector<double>{1.0, 1.0, 0.5}));
  EXPECT_EQ(gi.ranking, (std::vector<std::size_t>{0, 1, 2}));  // tie keeps column order
  EXPECT_EQ(gi.to_json()["importance"][0]["feature"], "x");
}

TEST(GlobalImportanceTest, SingleRowAndUnusedFeature) {
  const auto e = stump_model();
  Matrix x(1, 2);
  x(0, 0) = 0.0;
  x(0, 1) = 3.0;
  const auto gi = global_importance(e, x);
  EXPECT_NEAR(gi.importance[0], 0.25, 1e-15);
  EXPECT_EQ(gi.importance[1], 0.0);
  EXPECT_THROW(global_importance(std::vector<ShapValues>{}, {"a"}), DataError);
}

TEST(Plots, WaterfallSumsToTheMargin) {
  Rng rng(6);
  const auto e = ts::random_ensemble(rng, 8, 4, 5, true);
  const auto x = random_rows(rng, 10, 5);
  PlotRequest req;
  req.kind = PlotKind::waterfall;
  req.row = 3;
  const auto out = emit_explanation_data(req, e, x, e.feature_names);
  double sum = out.data["phi0"].get<double>();
  double last = 1e300;
  for (const auto& c : out.data["contributions"]) {
    sum += c["phi"].get<double>();
    EXPECT_LE(std::abs(c["phi"].get<double>()), last);
    last = std::abs(c["phi"].get<double>());
  }
  EXPECT_NEAR(sum, out.data["margin"].get<double>(), 1e-9);
  EXPECT_NEAR(out.data["margin"].get<double>(), ts::walk_margin(e, std::vector<double>(x.row(3).begin(), x.row(3).end())),
              1e-12);
  EXPECT_NE(out.svg.find("<svg"), std::string::npos);
  EXPECT_EQ(out.csv.rfind("feature,value,phi,cumulative\n", 0), 0u);
  req.row = 10;
  EXPECT_THROW(emit_explanation_data(req, e, x, e.feature_names), DataError);
}

TEST(Plots, SummaryOrderedByImportance) {
  Rng rng(7);
  const auto e = ts::random_ensemble(rng, 10, 4, 6, false);
  const auto x = random_rows(rng, 30, 6);
  const auto out = emit_explanation_data(PlotRequest{}, e, x, e.feature_names);
  const auto& feats = out.data["features"];
  ASSERT_EQ(feats.size(), 6u);
  for (std::size_t k = 1; k < feats.size(); ++k)
    EXPECT_GE(feats[k - 1]["importance"].get<double>(), feats[k]["importance"].get<double>());
  EXPECT_EQ(feats[0]["points"].size(), 30u);
  EXPECT_EQ(out.data["space"], "margin");
}

TEST(Plots, DependenceOfUnusedFeatureIsFlatZero) {
  const auto e = stump_model();
  Rng rng(8);
  const auto x = random_rows(rng, 15, 2, 0.0);
  PlotRequest req;
  req.kind = PlotKind::dependence;
  req.feature = "b";
  req.color_feature = "a";
  const auto out = emit_explanation_data(req, e, x, e.feature_names);
  for (const auto& pt : out.data["points"]) EXPECT_EQ(pt["phi"].get<double>(), 0.0);
  EXPECT_EQ(out.data["color_feature"], "a");
  req.feature = "nope";
  EXPECT_THROW(emit_explanation_data(req, e, x, e.feature_names), DataError);
  EXPECT_THROW(emit_explanation_data(req, e, x, {"a", "c"}), DataError);
  EXPECT_THROW(parse_plot_kind("histogram"), ConfigError);
}
