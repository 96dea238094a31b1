#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditx/features.hpp"

namespace creditx::selection {

enum class Reason { constant, missing, correlated, not_in_top_k };

const char* to_string(Reason r);

struct Removal {
  std::string column;
  Reason reason = Reason::constant;
  std::string correlated_with;  // set for Reason::correlated
  double value = 0.0;           // |r| for correlated, fraction for missing, importance for top-k
};

struct SelectionReport {
  std::vector<std::string> original;
  std::vector<Removal> removed;
  std::vector<std::string> surviving;  // original order

  /// Merges a later stage's report (whose `original` must equal this report's `surviving`).
  void chain(const SelectionReport& next);
  nlohmann::json to_json() const;
  std::string table() const;
};

/// Columns with at most one distinct non-missing value.
std::pair<features::FeatureMatrix, SelectionReport> drop_constant(const features::FeatureMatrix& m);

/// (missing [+ zeros]) / rows, per column.
std::vector<double> missing_fraction(const features::FeatureMatrix& m, bool treat_zero_as_missing);

/// Removes columns whose fraction is strictly above `threshold`.
std::pair<features::FeatureMatrix, SelectionReport> prune_missing(const features::FeatureMatrix& m,
                                                                  bool treat_zero_as_missing,
                                                                  double threshold = 0.5);

/// Pearson correlation over rows where both values are present; 0 with fewer
/// than two such rows or a degenerate column.
double pairwise_pearson(std::span<const double> a, std::span<const double> b);

/// Ordered-pair scan: for i < j with |r| > threshold, the later column j is removed.
std::pair<features::FeatureMatrix, SelectionReport> correlation_prune(const features::FeatureMatrix& m,
                                                                      double threshold = 0.95);

/// Indices of the k most important columns (ties by column order), in original order.
std::vector<std::size_t> select_top_k(const std::vector<double>& importance, std::size_t k);

std::pair<features::FeatureMatrix, SelectionReport> select_top_k_by_shap(const features::FeatureMatrix& m,
                                                                         const std::vector<double>& importance,
                                                                         std::size_t k = 20);

}  // namespace creditx::selection
