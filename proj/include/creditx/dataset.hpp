#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "creditx/common.hpp"
#include "creditx/features.hpp"

namespace creditx {

/// Model-ready design: features, binary labels and positive sample weights.
struct Dataset {
  std::vector<std::string> feature_names;
  Matrix x;
  std::vector<int> y;
  std::vector<double> w;
  /// Set when `x` holds z-scores produced by this scaler (required by the MLP).
  std::optional<features::ScalerParams> scaling;

  std::size_t rows() const { return x.rows(); }
  std::size_t cols() const { return x.cols(); }

  /// Row counts per class {n0, n1}.
  std::array<std::size_t, 2> class_counts() const;
  bool has_missing() const;

  Dataset subset(const std::vector<std::size_t>& rows) const;
  /// Throws DataError on shape mismatch, non-binary labels or non-positive weights.
  void validate() const;

  static Dataset from_matrix(const features::FeatureMatrix& m);
  static Dataset from_arrays(std::vector<std::string> names, Matrix x, std::vector<int> y,
                             std::vector<double> w = {});
};

struct PartitionAccess;

/// Rows that may be used for fitting, resampling and preprocessing statistics.
/// Only the splitting functions in `metrics` can create one.
class TrainView {
 public:
  const Dataset& data() const { return data_; }
  const std::vector<std::size_t>& source_rows() const { return rows_; }

 private:
  TrainView(Dataset d, std::vector<std::size_t> rows) : data_(std::move(d)), rows_(std::move(rows)) {}
  Dataset data_;
  std::vector<std::size_t> rows_;
  friend struct PartitionAccess;
};

/// Held-out rows; accepted only by scoring functions.
class TestView {
 public:
  const Dataset& data() const { return data_; }
  const std::vector<std::size_t>& source_rows() const { return rows_; }

 private:
  TestView(Dataset d, std::vector<std::size_t> rows) : data_(std::move(d)), rows_(std::move(rows)) {}
  Dataset data_;
  std::vector<std::size_t> rows_;
  friend struct PartitionAccess;
};

struct Split {
  TrainView train;
  TestView test;
};

}  // namespace creditx
