#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditx/dataset.hpp"

namespace creditx::metrics {

/// Positive class = bad (label 1).
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  double tpr() const;
  double fpr() const;
  double accuracy() const;
  nlohmann::json to_json() const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& y, const std::vector<int>& predicted);
/// Classifies with `p > threshold` first.
ConfusionMatrix confusion_at(const std::vector<int>& y, std::span<const double> p, double threshold = 0.5);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) ... (1,1)
  double auc = 0.0;
  double gini = 0.0;

  nlohmann::json to_json() const;
};

/// Threshold sweep over distinct scores (ties form one step); trapezoid AUC.
RocCurve roc_curve(const std::vector<int>& y, std::span<const double> scores);
double roc_auc(const std::vector<int>& y, std::span<const double> scores);
/// 2 * auc - 1.
double gini(double auc);

/// Stratified (or plain) shuffled split; train gets round(fraction * n_class) rows of each class.
Split train_test_split(const Dataset& data, double train_fraction = 0.75, std::uint64_t seed = 0,
                       bool stratified = true);

/// Stratified k-fold: each class is shuffled and dealt round-robin to folds.
/// Throws DataError when a test or training fold would lack a class.
std::vector<Split> stratified_kfold(const Dataset& data, std::size_t k, std::uint64_t seed);

/// Whole dataset as a training partition, for final fits where no evaluation follows.
TrainView full_training_view(const Dataset& data);

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> v);

}  // namespace creditx::metrics
