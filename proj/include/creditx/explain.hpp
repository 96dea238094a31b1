#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditx/models.hpp"

namespace creditx::explain {

/// Attribution of one row in margin space: phi0 + sum(phi) = margin.
struct ShapValues {
  double phi0 = 0.0;
  std::vector<double> phi;
  double margin = 0.0;
  std::vector<double> x;

  double additivity_gap() const;
  nlohmann::json to_json(const std::vector<std::string>& names) const;
};

/// Path-dependent coalition values f_S(x): splits on features in S follow x,
/// other splits average both children by training cover (0.5/0.5 when a node
/// saw no training weight).
class CoalitionEvaluator {
 public:
  explicit CoalitionEvaluator(const models::TreeEnsemble& ensemble);

  const models::TreeEnsemble& ensemble() const { return ensemble_; }
  std::size_t n_features() const { return ensemble_.feature_names.size(); }

  /// f_S(x) of the whole ensemble; `in_s[j]` marks membership of feature j.
  double value(std::span<const double> x, const std::vector<bool>& in_s) const;
  /// Unscaled contribution of one tree.
  double tree_value(std::size_t tree, std::span<const double> x, const std::vector<bool>& in_s) const;
  /// Cover-weighted expectation of one tree (f_S with S empty).
  double tree_expectation(std::size_t tree) const;

 private:
  const models::TreeEnsemble& ensemble_;
};

/// Largest feature count the exhaustive enumeration accepts.
inline constexpr std::size_t kBruteForceMaxFeatures = 20;

/// Exact Shapley values by subset enumeration (per tree over the features it
/// uses). Throws ComputeError when the model has more than 20 features.
ShapValues brute_force_shapley(const CoalitionEvaluator& evaluator, std::span<const double> x);

/// Polynomial-time path-dependent TreeSHAP. Throws ComputeError for trees
/// without training covers.
ShapValues tree_shap(const models::TreeEnsemble& ensemble, std::span<const double> x);
std::vector<ShapValues> tree_shap(const models::TreeEnsemble& ensemble, const Matrix& x);

struct GlobalImportance {
  std::vector<std::string> names;
  std::vector<double> importance;  // mean |phi|
  std::vector<std::size_t> ranking;  // descending, ties by column order

  nlohmann::json to_json() const;
};

GlobalImportance global_importance(const std::vector<ShapValues>& shap, const std::vector<std::string>& names);
GlobalImportance global_importance(const models::TreeEnsemble& ensemble, const Matrix& x);

enum class PlotKind { summary, dependence, waterfall };

PlotKind parse_plot_kind(const std::string& label);

struct PlotRequest {
  PlotKind kind = PlotKind::summary;
  std::string feature;        // dependence
  std::string color_feature;  // dependence, optional
  std::size_t row = 0;        // waterfall
};

struct PlotData {
  nlohmann::json data;
  std::string csv;
  std::string svg;
};

/// Plot-ready data for one figure. Throws DataError for unknown features or rows.
PlotData emit_explanation_data(const PlotRequest& request, const models::TreeEnsemble& ensemble, const Matrix& x,
                               const std::vector<std::string>& names);
/// Same, reusing precomputed attributions for the rows of `x`.
PlotData emit_explanation_data(const PlotRequest& request, const models::TreeEnsemble& ensemble, const Matrix& x,
                               const std::vector<std::string>& names, const std::vector<ShapValues>& shap);

}  // namespace creditx::explain
