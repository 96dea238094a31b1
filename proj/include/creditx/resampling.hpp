#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "creditx/dataset.hpp"

namespace creditx::resampling {

enum class Kind {
  none,
  undersample,
  oversample,
  smote,
  borderline_smote,
  svm_smote,
  class_weight_proportional,
  class_weight_sqrt_balanced,
};

struct ResamplingStrategy {
  Kind kind = Kind::none;
  std::size_t k_neighbors = 5;
  std::uint64_t seed = 0;
};

/// Accepts the config labels `none`, `undersample`, `oversample`, `smote`,
/// `borderline_smote`, `svm_smote`, `class_weight`, `sqrt_balanced`.
Kind parse_kind(const std::string& label);
std::string label(Kind kind);
bool is_class_weighting(Kind kind);

/// Provenance of a synthetic row: x = parent + lambda * (neighbor - parent).
struct SyntheticOrigin {
  std::size_t row = 0;       // index in the output dataset
  std::size_t parent = 0;    // index in the input training rows
  std::size_t neighbor = 0;  // index in the input training rows
  double lambda = 0.0;
};

struct ResampleResult {
  Dataset data;
  std::vector<SyntheticOrigin> synthetic;
  /// For each output row, the training row it copies (synthetic rows: the parent).
  std::vector<std::size_t> source;
  std::vector<std::string> notes;
};

ResampleResult undersample_majority(const TrainView& train, std::uint64_t seed);
ResampleResult oversample_minority(const TrainView& train, std::uint64_t seed);
ResampleResult smote(const TrainView& train, std::size_t k, std::uint64_t seed);
ResampleResult borderline_smote(const TrainView& train, std::size_t k, std::uint64_t seed);

struct LinearSvm {
  std::vector<double> w;
  double b = 0.0;
  double decision(std::span<const double> x) const;
};

/// Hinge-loss linear SVM (C = 1) by subgradient descent on +-1 labels.
LinearSvm fit_linear_svm(const Matrix& x, const std::vector<int>& y, std::size_t epochs = 200, double c = 1.0);

ResampleResult svm_smote(const TrainView& train, std::size_t k, std::uint64_t seed);

/// Weight per class label, index 0 and 1.
struct ClassWeights {
  std::array<double, 2> weight{1.0, 1.0};
};

enum class WeightMode { proportional, sqrt_balanced };

/// Proportional: w0 = 1, w1 = n0 / n1. Sqrt-balanced: CW_k = sqrt(max_c W_c / W_k),
/// W_c the summed sample weight of class c (unit weights when `sample_weights` is empty).
ClassWeights class_weights(const std::vector<int>& y, WeightMode mode, const std::vector<double>& sample_weights = {});

/// Dispatches on the strategy; class-weight kinds rescale the sample weights.
ResampleResult apply(const ResamplingStrategy& strategy, const TrainView& train);

}  // namespace creditx::resampling
