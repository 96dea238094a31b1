#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditx/dataset.hpp"
#include "creditx/features.hpp"

namespace creditx::models {

enum class Family { logistic, logistic_binned, random_forest, gradient_boosting, oblivious_boosting, mlp };

Family parse_family(const std::string& label);
std::string label(Family f);
/// Families whose loss accepts per-sample weights in the experiment grid.
bool accepts_class_weights(Family f);

enum class Activation { relu, tanh, logistic };

struct TrainConfig {
  std::uint64_t seed = 0;

  // logistic
  double ridge = 1e-6;
  std::size_t newton_max_iter = 100;
  double newton_tol = 1e-8;
  std::size_t n_bins = 10;

  // random forest
  std::size_t rf_trees = 500;
  std::size_t rf_min_leaf = 5;
  std::size_t rf_max_depth = 0;     // 0 = unlimited
  std::size_t rf_max_features = 0;  // 0 = floor(sqrt(p))

  // boosting
  std::size_t boost_rounds = 500;
  double learning_rate = 0.05;
  std::size_t gb_depth = 3;
  std::size_t oblivious_depth = 6;
  std::size_t patience = 20;
  double validation_fraction = 0.1;
  double l2 = 1.0;
  std::size_t max_bins = 255;
  bool ordered = false;
  std::size_t ordered_blocks = 8;

  // mlp
  std::vector<std::size_t> hidden{64, 32};
  Activation activation = Activation::relu;
  double mlp_learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::size_t mlp_patience = 20;

  void validate() const;
  nlohmann::json to_json() const;
  /// Reads the keys present in `j`, keeping defaults for the rest.
  static TrainConfig from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------- logistic

/// Equal-frequency bins fitted on training columns. Each column becomes
/// indicators for bins 1..B-1 (bin 0 is the reference) plus a missing indicator.
struct QuantileBinning {
  std::vector<std::vector<double>> cuts;  // per input column, ascending; bin = #cuts < value
  std::size_t n_bins = 10;

  static QuantileBinning fit(const Matrix& x, std::size_t n_bins);
  std::size_t bin_of(std::size_t col, double value) const;
  std::size_t bins(std::size_t col) const { return cuts[col].size() + 1; }
  Matrix transform(const Matrix& x) const;
  std::vector<std::string> design_names(const std::vector<std::string>& names) const;

  nlohmann::json to_json() const;
  static QuantileBinning from_json(const nlohmann::json& j);
};

struct LogisticModel {
  std::vector<std::string> feature_names;
  std::vector<std::string> design_names;
  double intercept = 0.0;
  std::vector<double> coefficients;  // one per design column
  features::Imputer imputer;         // used when no binning is attached
  std::optional<QuantileBinning> binning;
  bool converged = false;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;

  double margin(std::span<const double> raw_row) const;
};

/// Ridge-damped (on non-intercept terms) maximum likelihood by Newton's method.
/// Works on a design that has no missing values.
LogisticModel fit_logistic_design(const Matrix& design, const std::vector<int>& y, const std::vector<double>& w,
                                  const TrainConfig& config);

/// Median-imputes, then fits on the raw columns.
LogisticModel fit_logistic(const Dataset& data, const TrainConfig& config);
/// Quantile-bins every column, then fits on the indicator design.
LogisticModel fit_logistic_binned(const Dataset& data, const TrainConfig& config);

// ------------------------------------------------------------------- trees

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  bool default_left = true;  // direction for missing values
  double cover = kMissing;   // summed training weight reaching the node
  double value = 0.0;        // leaf output

  bool is_leaf() const { return feature < 0; }
};

/// Binary tree: x[feature] <= threshold goes left. Oblivious trees keep a
/// complete layout (children of i at 2i+1, 2i+2) and one split per level.
struct RegressionTree {
  std::vector<TreeNode> nodes;
  bool oblivious = false;
  std::vector<std::pair<int, double>> levels;  // oblivious only

  int leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes[static_cast<std::size_t>(leaf_index(x))].value; }
  std::size_t depth() const;
  bool has_covers() const;
  /// Throws ComputeError when cover additivity or the oblivious layout is violated.
  void check() const;

  static RegressionTree leaf(double value, double cover);
  /// Builds the complete node layout of an oblivious tree.
  static RegressionTree make_oblivious(std::vector<std::pair<int, double>> levels, std::vector<double> leaf_values,
                                       std::vector<double> node_covers);
};

enum class EnsembleKind { random_forest, gradient_boosting, oblivious_boosting };

struct TreeEnsemble {
  EnsembleKind kind = EnsembleKind::gradient_boosting;
  double base_score = 0.0;
  double learning_rate = 1.0;
  std::vector<RegressionTree> trees;
  std::vector<std::string> feature_names;
  std::string boosting_mode = "plain";

  /// Raw additive output base + lr * sum(tree outputs): log-odds for boosted
  /// kinds, probability for random forests.
  double margin(std::span<const double> x) const;
  double probability(std::span<const double> x) const;
  /// Link from raw output to probability.
  double link(double raw) const;
};

/// Per-round diagnostics emitted by the boosting learners.
struct RoundInfo {
  std::size_t round = 0;
  std::span<const double> gradients;  // dL/dmargin per fit row, weighted
  std::span<const double> hessians;
  double train_loss = 0.0;
  double valid_loss = kMissing;
};

struct FitTrace {
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
  std::size_t best_round = 0;  // number of trees kept
  std::size_t fit_rows = 0;
  std::size_t valid_rows = 0;
};

using RoundObserver = std::function<void(const RoundInfo&)>;

TreeEnsemble fit_random_forest(const Dataset& data, const TrainConfig& config);
TreeEnsemble fit_gradient_boosting(const Dataset& data, const TrainConfig& config, const RoundObserver& observer = {},
                                   FitTrace* trace = nullptr);
TreeEnsemble fit_oblivious_boosting(const Dataset& data, const TrainConfig& config,
                                    const RoundObserver& observer = {}, FitTrace* trace = nullptr);

/// Weighted mean cross-entropy with probabilities clamped to [1e-9, 1 - 1e-9].
double log_loss(const std::vector<int>& y, std::span<const double> p, const std::vector<double>& w);

// --------------------------------------------------------------------- mlp

struct DenseLayer {
  Matrix weights;  // out x in
  std::vector<double> bias;
};

struct MlpModel {
  std::vector<std::string> feature_names;
  features::Imputer imputer;
  features::ScalerParams scaler;
  std::vector<bool> active;  // inputs that are not constant in training
  std::vector<DenseLayer> layers;  // last layer has one output
  Activation activation = Activation::relu;
  std::size_t epochs_run = 0;

  /// Output logit for an already imputed and standardized row.
  double margin_scaled(std::span<const double> z) const;
  double margin(std::span<const double> raw_row) const;

  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);
};

/// Median-imputes and standardizes `data` with train statistics, tagging it
/// for `fit_mlp`.
Dataset prepare_scaled(const Dataset& data, features::Imputer* imputer_out = nullptr);

/// Requires `data.scaling` (see prepare_scaled); throws DataError otherwise.
MlpModel fit_mlp(const Dataset& data, const TrainConfig& config, const features::Imputer& imputer = {});

/// Weighted mean cross-entropy and its gradient w.r.t. the flattened parameters,
/// evaluated on standardized rows.
std::pair<double, std::vector<double>> mlp_loss_and_gradient(const MlpModel& model, const Matrix& z,
                                                             const std::vector<int>& y, const std::vector<double>& w);

// ----------------------------------------------------------- common surface

using Model = std::variant<LogisticModel, TreeEnsemble, MlpModel>;

std::string kind_label(const Model& m);
const std::vector<std::string>& feature_names(const Model& m);

/// Fits the requested family; the MLP path standardizes internally.
Model fit_model(Family family, const Dataset& data, const TrainConfig& config);

/// Default probabilities in (0, 1). Throws DataError when `names` differ from
/// the training schema.
std::vector<double> predict_proba(const Model& model, const Matrix& x, const std::vector<std::string>& names);
std::vector<double> predict_proba(const Model& model, const Dataset& data);

/// Raw additive output (log-odds for boosted ensembles, logistic, MLP).
std::vector<double> predict_margin(const Model& model, const Matrix& x, const std::vector<std::string>& names);

/// 1 iff p > threshold.
int classify(double p, double threshold = 0.5);

nlohmann::json to_json(const Model& m);
Model model_from_json(const nlohmann::json& j);

nlohmann::json ensemble_to_json(const TreeEnsemble& e);
TreeEnsemble ensemble_from_json(const nlohmann::json& j);

}  // namespace creditx::models
