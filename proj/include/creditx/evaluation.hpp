#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditx/metrics.hpp"
#include "creditx/models.hpp"
#include "creditx/resampling.hpp"

namespace creditx::evaluation {

struct ModelSpec {
  models::Family family = models::Family::oblivious_boosting;
  models::TrainConfig config;
};

/// Resamples the training partition, fits, and returns probabilities for the
/// test partition. Nothing from `test` reaches fitting.
std::vector<double> fit_and_score(const ModelSpec& spec, const resampling::ResamplingStrategy& strategy,
                                  const TrainView& train, const TestView& test,
                                  std::vector<std::string>* notes = nullptr);

struct CvResult {
  std::string model;
  std::string resampling;
  std::string feature_set;
  std::vector<double> folds;  // Gini per fold
  std::vector<double> fold_auc;
  double mean = 0.0;
  double std = 0.0;  // sample std over folds (k - 1 denominator)
  metrics::RocCurve roc;  // pooled out-of-fold scores
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

/// Stratified k-fold. Each fold fits imputation, scaling, binning and
/// resampling on its own training rows only.
CvResult cross_validate(const ModelSpec& spec, const resampling::ResamplingStrategy& strategy, const Dataset& data,
                        std::size_t k, std::uint64_t seed, const std::string& feature_set = "full");

struct HoldoutResult {
  metrics::ConfusionMatrix confusion;
  metrics::RocCurve roc;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;

  nlohmann::json to_json() const;
};

/// Single stratified train/test split evaluation.
HoldoutResult evaluate_holdout(const ModelSpec& spec, const resampling::ResamplingStrategy& strategy,
                               const Dataset& data, double train_fraction, std::uint64_t seed);

}  // namespace creditx::evaluation
