#include <gtest/gtest.h>

#include <numeric>

#include "creditx/metrics.hpp"
#include "creditx/models.hpp"
#include "support.hpp"

using namespace creditx;
using namespace creditx::models;
namespace ts = testing_support;

namespace {

Dataset linear_data(std::uint64_t seed, std::size_t n = 300) {
  return ts::gaussian_dataset(seed, n, 3, [](std::span<const double> x) { return 0.4 + 1.5 * x[0] - 0.8 * x[1]; });
}

TrainConfig small_boost() {
  TrainConfig c;
  c.seed = 3;
  c.boost_rounds = 40;
  c.learning_rate = 0.2;
  c.oblivious_depth = 3;
  return c;
}

// Gradient ascent on the ridge-penalized log-likelihood (penalty skips the intercept).
std::vector<double> ascent_oracle(const Dataset& d, double ridge, std::size_t iters) {
  const std::size_t p = d.cols();
  std::vector<double> beta(p + 1, 0.0), g(p + 1);
  const double n = static_cast<double>(d.rows());
  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t r = 0; r < d.rows(); ++r) {
      double eta = beta[0];
      for (std::size_t c = 0; c < p; ++c) eta += beta[c + 1] * d.x(r, c);
      const double resid = d.w[r] * (d.y[r] - 1.0 / (1.0 + std::exp(-eta)));
      g[0] += resid;
      for (std::size_t c = 0; c < p; ++c) g[c + 1] += resid * d.x(r, c);
    }
    for (std::size_t c = 1; c <= p; ++c) g[c] -= ridge * beta[c];
    for (std::size_t c = 0; c <= p; ++c) beta[c] += 2.0 * g[c] / n;
  }
  return beta;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0) /
         std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0) *
                   std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
}

double auc_of(const Model& m, const Dataset& d) {
  const auto p = predict_proba(m, d);
  return metrics::roc_auc(d.y, p);
}

}  // namespace

// ---------------------------------------------------------------- logistic

TEST(Logistic, SymmetricDataGivesZeroSlope) {
  Matrix x(10, 1);
  std::vector<int> y(10);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = (i / 2) - 2;
    y[i] = i % 2;
  }
  const auto m = fit_logistic(Dataset::from_arrays({"x"}, x, y), TrainConfig{});
  EXPECT_NEAR(m.coefficients[0], 0.0, 1e-9);
  EXPECT_NEAR(m.intercept, 0.0, 1e-9);
  EXPECT_TRUE(m.converged);
}

TEST(Logistic, SignFollowsTheRelationship) {
  const auto m = fit_logistic(linear_data(4, 600), TrainConfig{});
  EXPECT_GT(m.coefficients[0], 0.0);
  EXPECT_LT(m.coefficients[1], 0.0);
}

TEST(Logistic, MatchesGradientAscentOracle) {
  const auto d = linear_data(5, 200);
  TrainConfig c;
  c.ridge = 1.0;
  c.newton_tol = 1e-12;
  const auto m = fit_logistic(d, c);
  const auto beta = ascent_oracle(d, 1.0, 20000);
  EXPECT_NEAR(m.intercept, beta[0], 1e-5);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m.coefficients[j], beta[j + 1], 1e-5);
}

TEST(Logistic, AffineRescalingLeavesPredictionsUnchanged) {
  auto d = linear_data(6, 300);
  TrainConfig c;
  c.ridge = 0.0;
  c.newton_tol = 1e-11;
  const auto base = fit_logistic(d, c);
  auto shifted = d;
  for (std::size_t r = 0; r < d.rows(); ++r) shifted.x(r, 0) = 4.0 * d.x(r, 0) - 7.0;
  const auto moved = fit_logistic(shifted, c);
  EXPECT_NEAR(moved.coefficients[0], base.coefficients[0] / 4.0, 1e-7);
  const auto pa = predict_proba(Model{base}, d), pb = predict_proba(Model{moved}, shifted);
  for (std::size_t r = 0; r < d.rows(); ++r) EXPECT_NEAR(pa[r], pb[r], 1e-8);
}

TEST(Logistic, SingleClassIsRejected) {
  Matrix x(3, 1, 1.0);
  EXPECT_THROW(fit_logistic(Dataset::from_arrays({"x"}, x, {1, 1, 1}), TrainConfig{}), DataError);
}

TEST(Binning, HundredValuesIntoTenBins) {
  Matrix x(100, 1);
  for (int i = 0; i < 100; ++i) x(i, 0) = i + 1;
  const auto b = QuantileBinning::fit(x, 10);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 100; ++i) ++counts[b.bin_of(0, i + 1)];
  for (int c : counts) EXPECT_EQ(c, 10);
  EXPECT_EQ(b.bin_of(0, -50.0), 0u);
  EXPECT_EQ(b.bin_of(0, 1e6), 9u);
}

TEST(Binning, ConstantColumnIsOneBin) {
  Matrix x(20, 1, 3.0);
  const auto b = QuantileBinning::fit(x, 10);
  EXPECT_EQ(b.bins(0), 1u);
  const auto design = b.transform(x);
  EXPECT_EQ(design.cols(), 1u);  // only the missing indicator
}

TEST(Binning, MissingGetsItsOwnIndicator) {
  Matrix x(6, 1);
  for (int i = 0; i < 6; ++i) x(i, 0) = i;
  x(5, 0) = kMissing;
  const auto b = QuantileBinning::fit(x, 2);
  const auto design = b.transform(x);
  ASSERT_EQ(design.cols(), b.bins(0));
  EXPECT_EQ(design(5, design.cols() - 1), 1.0);
  EXPECT_EQ(design(0, design.cols() - 1), 0.0);
  EXPECT_FALSE(design.data().empty());
}

TEST(Binning, BinnedLogisticLearnsAStep) {
  const auto d = ts::gaussian_dataset(8, 800, 2, [](std::span<const double> x) { return x[0] > 0.5 ? 2.0 : -2.0; });
  const auto m = fit_model(Family::logistic_binned, d, TrainConfig{});
  EXPECT_GT(auc_of(m, d), 0.8);
}

// ------------------------------------------------------------------- trees

TEST(RandomForest, SolvesXor) {
  const auto d = ts::gaussian_dataset(9, 600, 2, [](std::span<const double> x) { return x[0] * x[1] > 0 ? 6.0 : -6.0; });
  TrainConfig c;
  c.seed = 1;
  c.rf_trees = 100;
  c.rf_max_features = 2;
  const auto m = fit_model(Family::random_forest, d, c);
  EXPECT_GT(auc_of(m, d), 0.95);
}

TEST(RandomForest, PureClassPredictsThatClass) {
  Matrix x(30, 2);
  Rng rng(2);
  for (auto& v : x.data()) v = rng.normal();
  TrainConfig c;
  c.rf_trees = 10;
  const auto m = fit_model(Family::random_forest, Dataset::from_arrays({"a", "b"}, x, std::vector<int>(30, 1)), c);
  for (double p : predict_proba(m, x, {"a", "b"})) EXPECT_GT(p, 0.99);
}

TEST(RandomForest, TreesCarryAdditiveCovers) {
  TrainConfig c;
  c.rf_trees = 5;
  const auto e = fit_random_forest(linear_data(10), c);
  for (const auto& t : e.trees) {
    EXPECT_TRUE(t.has_covers());
    EXPECT_NO_THROW(t.check());
  }
}

TEST(GradientBoosting, ConstantTargetAddsNoTrees) {
  Matrix x(20, 1);
  for (int i = 0; i < 20; ++i) x(i, 0) = i;
  const auto e = fit_gradient_boosting(Dataset::from_arrays({"x"}, x, std::vector<int>(20, 1)), small_boost());
  EXPECT_TRUE(e.trees.empty());
  EXPECT_NEAR(e.base_score, std::log((1 - 1e-9) / 1e-9), 1e-6);
}

TEST(GradientBoosting, TrainingLossDecreases) {
  FitTrace trace;
  auto c = small_boost();
  c.validation_fraction = 0.0;
  fit_gradient_boosting(linear_data(11), c, {}, &trace);
  ASSERT_EQ(trace.train_loss.size(), 40u);
  for (std::size_t i = 1; i < trace.train_loss.size(); ++i) EXPECT_LE(trace.train_loss[i], trace.train_loss[i - 1] + 1e-12);
  EXPECT_EQ(trace.fit_rows, 300u);
}

TEST(GradientBoosting, FirstRoundGradientsAreWeightedResiduals) {
  auto d = linear_data(12, 150);
  Rng rng(5);
  for (auto& w : d.w) w = 0.5 + rng.uniform();
  auto c = small_boost();
  c.validation_fraction = 0.0;
  std::vector<double> first;
  fit_gradient_boosting(d, c, [&](const RoundInfo& info) {
    if (info.round == 0) first.assign(info.gradients.begin(), info.gradients.end());
  });
  double sy = 0, sw = 0;
  for (std::size_t r = 0; r < d.rows(); ++r) sy += d.w[r] * d.y[r], sw += d.w[r];
  const double p0 = sy / sw;
  ASSERT_EQ(first.size(), d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) EXPECT_NEAR(first[r], d.w[r] * (p0 - d.y[r]), 1e-12);
}

TEST(GradientBoosting, EarlyStoppingKeepsBestRound) {
  FitTrace trace;
  auto c = small_boost();
  c.boost_rounds = 300;
  c.learning_rate = 0.5;
  c.patience = 5;
  const auto e = fit_gradient_boosting(linear_data(13, 400), c, {}, &trace);
  EXPECT_EQ(e.trees.size(), trace.best_round);
  EXPECT_LT(e.trees.size(), 300u);
  EXPECT_GT(trace.valid_rows, 0u);
}

TEST(ObliviousBoosting, EveryTreeIsSymmetric) {
  const auto e = fit_oblivious_boosting(linear_data(14), small_boost());
  ASSERT_FALSE(e.trees.empty());
  for (const auto& t : e.trees) {
    EXPECT_TRUE(t.oblivious);
    EXPECT_LE(t.levels.size(), 3u);
    EXPECT_EQ(t.nodes.size(), (std::size_t{2} << t.levels.size()) - 1);
    EXPECT_NO_THROW(t.check());
  }
}

TEST(ObliviousBoosting, OrderedModeFitsToo) {
  auto c = small_boost();
  c.ordered = true;
  const auto e = fit_oblivious_boosting(linear_data(15), c);
  EXPECT_EQ(e.boosting_mode, "ordered");
  EXPECT_GT(auc_of(Model{e}, linear_data(15)), 0.7);
}

TEST(ObliviousBoosting, DepthAboveSixteenRejected) {
  auto c = small_boost();
  c.oblivious_depth = 17;
  EXPECT_THROW(fit_oblivious_boosting(linear_data(16), c), ConfigError);
}

TEST(ObliviousBoosting, HandlesMissingValues) {
  auto d = linear_data(17);
  for (std::size_t r = 0; r < d.rows(); r += 3) d.x(r, 0) = kMissing;
  const auto e = fit_oblivious_boosting(d, small_boost());
  for (double p : predict_proba(Model{e}, d)) EXPECT_TRUE(p > 0.0 && p < 1.0);
}

// --------------------------------------------------------------------- mlp

class MlpGradient : public ::testing::TestWithParam<Activation> {};

TEST_P(MlpGradient, MatchesCentralDifferences) {
  auto raw = linear_data(18, 40);
  const auto d = prepare_scaled(raw);
  TrainConfig c;
  c.seed = 4;
  c.hidden = {5, 3};
  c.epochs = 2;
  c.activation = GetParam();
  const auto m = fit_mlp(d, c);
  auto [loss, grad] = mlp_loss_and_gradient(m, d.x, d.y, d.w);
  auto probe = m;
  auto theta = m.parameters();
  std::vector<double> numeric(theta.size());
  const double eps = 1e-6;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + eps;
    probe.set_parameters(theta);
    const double up = mlp_loss_and_gradient(probe, d.x, d.y, d.w).first;
    theta[i] = keep - eps;
    probe.set_parameters(theta);
    const double down = mlp_loss_and_gradient(probe, d.x, d.y, d.w).first;
    theta[i] = keep;
    numeric[i] = (up - down) / (2 * eps);
  }
  double diff = 0, norm = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    diff += (grad[i] - numeric[i]) * (grad[i] - numeric[i]);
    norm += std::max(grad[i] * grad[i], numeric[i] * numeric[i]);
  }
  EXPECT_LT(std::sqrt(diff / norm), 1e-4);
  EXPECT_TRUE(std::isfinite(loss));
}

INSTANTIATE_TEST_SUITE_P(Activations, MlpGradient,
                         ::testing::Values(Activation::relu, Activation::tanh, Activation::logistic));

TEST(Mlp, ConstantInputsGetZeroGradient) {
  auto raw = linear_data(19, 60);
  for (std::size_t r = 0; r < raw.rows(); ++r) raw.x(r, 2) = 5.0;
  const auto d = prepare_scaled(raw);
  TrainConfig c;
  c.hidden = {4};
  c.epochs = 3;
  const auto m = fit_mlp(d, c);
  EXPECT_FALSE(m.active[2]);
  const auto [loss, grad] = mlp_loss_and_gradient(m, d.x, d.y, d.w);
  // First-layer weights are stored out x in, row-major.
  for (std::size_t h = 0; h < 4; ++h) EXPECT_EQ(grad[h * 3 + 2], 0.0);
  auto row = std::vector<double>(d.x.row(0).begin(), d.x.row(0).end());
  const double before = m.margin_scaled(row);
  row[2] = 40.0;
  EXPECT_EQ(m.margin_scaled(row), before);
}

TEST(Mlp, NoHiddenLayerAgreesWithLogisticRegression) {
  const auto d = prepare_scaled(linear_data(20, 800));
  TrainConfig c;
  c.seed = 2;
  c.hidden = {};
  c.epochs = 300;
  c.validation_fraction = 0.0;
  const auto m = fit_mlp(d, c);
  TrainConfig lc;
  lc.ridge = 0.0;
  const auto lr = fit_logistic(d, lc);
  std::vector<double> w(m.layers[0].weights.data().begin(), m.layers[0].weights.data().end());
  EXPECT_GT(cosine(w, lr.coefficients), 0.99);
}

TEST(Mlp, UnscaledInputRejected) {
  EXPECT_THROW(fit_mlp(linear_data(21), TrainConfig{}), DataError);
}

TEST(Mlp, FitModelStandardizesInternally) {
  TrainConfig c;
  c.hidden = {8};
  c.epochs = 30;
  const auto d = linear_data(22, 400);
  EXPECT_GT(auc_of(fit_model(Family::mlp, d, c), d), 0.75);
}

// ------------------------------------------------------------------ predict

TEST(Predict, ZeroTreeEnsembleReturnsSigmoidOfBase) {
  TreeEnsemble e;
  e.base_score = -1.3;
  e.feature_names = {"a"};
  Matrix x(2, 1, 0.0);
  for (double p : predict_proba(Model{e}, x, {"a"})) EXPECT_NEAR(p, 1.0 / (1.0 + std::exp(1.3)), 1e-15);
}

TEST(Predict, ZeroCoefficientsGiveOneHalf) {
  LogisticModel m;
  m.feature_names = m.design_names = {"a", "b"};
  m.coefficients = {0.0, 0.0};
  m.imputer.medians = {0.0, 0.0};
  Matrix x(3, 2, 4.0);
  for (double p : predict_proba(Model{m}, x, {"a", "b"})) EXPECT_EQ(p, 0.5);
}

TEST(Predict, EnsembleMatchesTreeWalk) {
  Rng rng(30);
  for (int rep = 0; rep < 10; ++rep) {
    const auto e = ts::random_ensemble(rng, 6, 4, 5, rep % 2 == 1);
    Matrix x(20, 5);
    for (std::size_t r = 0; r < 20; ++r) {
      const auto row = ts::random_row(rng, 5, 0.1);
      std::copy(row.begin(), row.end(), x.row(r).begin());
    }
    const auto margins = predict_margin(Model{e}, x, e.feature_names);
    for (std::size_t r = 0; r < 20; ++r) {
      const std::vector<double> row(x.row(r).begin(), x.row(r).end());
      EXPECT_NEAR(margins[r], ts::walk_margin(e, row), 1e-12);
    }
  }
}

TEST(Predict, SchemaMismatchRejected) {
  const auto m = fit_model(Family::logistic, linear_data(31), TrainConfig{});
  Matrix x(1, 3, 0.0);
  EXPECT_THROW(predict_proba(m, x, {"x0", "x2", "x1"}), DataError);
  Matrix narrow(1, 2, 0.0);
  EXPECT_THROW(predict_proba(m, narrow, {"x0", "x1"}), DataError);
}

TEST(Classify, ThresholdIsStrict) {
  EXPECT_EQ(classify(0.57), 1);
  EXPECT_EQ(classify(0.5), 0);
  EXPECT_EQ(classify(0.001), 0);
  EXPECT_EQ(classify(0.3, 0.2), 1);
  EXPECT_THROW(classify(0.5, 1.5), ConfigError);
}

// ------------------------------------------------------------- persistence

class RoundTrip : public ::testing::TestWithParam<Family> {};

TEST_P(RoundTrip, JsonReloadIsBitIdentical) {
  auto d = linear_data(40, 200);
  for (std::size_t r = 0; r < d.rows(); r += 7) d.x(r, 1) = kMissing;
  TrainConfig c;
  c.seed = 9;
  c.rf_trees = 10;
  c.boost_rounds = 15;
  c.hidden = {6};
  c.epochs = 5;
  const auto m = fit_model(GetParam(), d, c);
  const auto text = to_json(m).dump();
  const auto back = model_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(to_json(back).dump(), text);
  EXPECT_EQ(kind_label(back), kind_label(m));
  const auto a = predict_proba(m, d), b = predict_proba(back, d);
  for (std::size_t r = 0; r < d.rows(); ++r) EXPECT_EQ(a[r], b[r]) << r;
}

INSTANTIATE_TEST_SUITE_P(Families, RoundTrip,
                         ::testing::Values(Family::logistic, Family::logistic_binned, Family::random_forest,
                                           Family::gradient_boosting, Family::oblivious_boosting, Family::mlp));

TEST(Persistence, MalformedJsonIsADataError) {
  EXPECT_THROW(model_from_json(nlohmann::json::parse(R"({"kind": "tree_ensemble"})")), DataError);
  EXPECT_THROW(model_from_json(nlohmann::json::array()), DataError);
}

TEST(TrainConfigTest, ValidationAndJson) {
  TrainConfig c;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.hidden = {3, 0};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(TrainConfig::from_json({{"no_such_option", 1}}), ConfigError);
  EXPECT_THROW(TrainConfig::from_json({{"learning_rate", "fast"}}), ConfigError);
  c = TrainConfig{};
  c.learning_rate = 0.3;
  c.activation = Activation::tanh;
  const auto back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(parse_family("oblivious_boosting"), Family::oblivious_boosting);
  EXPECT_THROW(parse_family("svm"), ConfigError);
}
