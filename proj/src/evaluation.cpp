#include "creditx/evaluation.hpp"

#include <numeric>

namespace creditx::evaluation {

std::vector<double> fit_and_score(const ModelSpec& spec, const resampling::ResamplingStrategy& strategy,
                                  const TrainView& train, const TestView& test, std::vector<std::string>* notes) {
  if (resampling::is_class_weighting(strategy.kind) && !models::accepts_class_weights(spec.family)) {
    throw ConfigError("class weighting is not offered for " + models::label(spec.family));
  }
  auto resampled = resampling::apply(strategy, train);
  if (notes) notes->insert(notes->end(), resampled.notes.begin(), resampled.notes.end());
  const auto model = models::fit_model(spec.family, resampled.data, spec.config);
  return models::predict_proba(model, test.data());
}

CvResult cross_validate(const ModelSpec& spec, const resampling::ResamplingStrategy& strategy, const Dataset& data,
                        std::size_t k, std::uint64_t seed, const std::string& feature_set) {
  spec.config.validate();
  const auto splits = metrics::stratified_kfold(data, k, seed);
  CvResult out;
  out.model = models::label(spec.family);
  out.resampling = resampling::label(strategy.kind);
  out.feature_set = feature_set;
  out.folds.resize(k);
  out.fold_auc.resize(k);
  std::vector<std::vector<double>> scores(k);
  std::vector<std::vector<std::string>> notes(k);
  parallel_for(k, [&](std::size_t f) {
    ModelSpec fold_spec = spec;
    fold_spec.config.seed = derive_seed(seed, "fold-model-" + std::to_string(f));
    auto fold_strategy = strategy;
    fold_strategy.seed = derive_seed(seed, "fold-resample-" + std::to_string(f));
    scores[f] = fit_and_score(fold_spec, fold_strategy, splits[f].train, splits[f].test, &notes[f]);
    out.fold_auc[f] = metrics::roc_auc(splits[f].test.data().y, scores[f]);
    out.folds[f] = metrics::gini(out.fold_auc[f]);
  });
  out.mean = metrics::mean(out.folds);
  out.std = metrics::sample_std(out.folds);
  std::vector<int> pooled_y(data.rows());
  std::vector<double> pooled(data.rows());
  for (std::size_t f = 0; f < k; ++f) {
    const auto& rows = splits[f].test.source_rows();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      pooled_y[rows[i]] = data.y[rows[i]];
      pooled[rows[i]] = scores[f][i];
    }
    for (const auto& n : notes[f]) out.notes.push_back("fold " + std::to_string(f) + ": " + n);
  }
  out.roc = metrics::roc_curve(pooled_y, pooled);
  return out;
}

nlohmann::json CvResult::to_json() const {
  nlohmann::json roc_points = nlohmann::json::array();
  for (const auto& p : roc.points) roc_points.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}});
  return {{"model", model},
          {"resampling", resampling},
          {"feature_set", feature_set},
          {"folds", folds},
          {"fold_auc", fold_auc},
          {"mean", mean},
          {"std", std},
          {"std_kind", "sample standard deviation over folds (k - 1 denominator)"},
          {"pooled_auc", roc.auc},
          {"roc", roc_points},
          {"notes", notes}};
}

nlohmann::json HoldoutResult::to_json() const {
  return {{"train_rows", train_rows},
          {"test_rows", test_rows},
          {"confusion", confusion.to_json()},
          {"threshold", 0.5},
          {"auc", roc.auc},
          {"gini", roc.gini},
          {"roc", roc.to_json()["points"]}};
}

HoldoutResult evaluate_holdout(const ModelSpec& spec, const resampling::ResamplingStrategy& strategy,
                               const Dataset& data, double train_fraction, std::uint64_t seed) {
  const auto split = metrics::train_test_split(data, train_fraction, seed, true);
  ModelSpec s = spec;
  s.config.seed = derive_seed(seed, "holdout-model");
  auto st = strategy;
  st.seed = derive_seed(seed, "holdout-resample");
  const auto p = fit_and_score(s, st, split.train, split.test);
  HoldoutResult out;
  out.train_rows = split.train.data().rows();
  out.test_rows = split.test.data().rows();
  out.confusion = metrics::confusion_at(split.test.data().y, p, 0.5);
  out.roc = metrics::roc_curve(split.test.data().y, p);
  return out;
}

}  // namespace creditx::evaluation
