#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditx/evaluation.hpp"
#include "creditx/explain.hpp"
#include "creditx/features.hpp"
#include "creditx/ingest.hpp"
#include "creditx/selection.hpp"

namespace creditx::pipeline {

struct GridSpec {
  std::vector<models::Family> models{models::Family::logistic, models::Family::logistic_binned,
                                     models::Family::random_forest, models::Family::gradient_boosting,
                                     models::Family::oblivious_boosting, models::Family::mlp};
  std::vector<resampling::Kind> resamplers{resampling::Kind::none,
                                           resampling::Kind::undersample,
                                           resampling::Kind::oversample,
                                           resampling::Kind::smote,
                                           resampling::Kind::borderline_smote,
                                           resampling::Kind::svm_smote,
                                           resampling::Kind::class_weight_proportional,
                                           resampling::Kind::class_weight_sqrt_balanced};
  std::vector<std::string> feature_sets{"full", "top"};
};

/// Whether a (model, resampler) cell exists: class weighting only applies to
/// weighted-loss models, and the square-root variant only to oblivious boosting.
bool compatible(models::Family family, resampling::Kind kind);

struct PipelineConfig {
  std::string data_dir;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;

  bool drop_inactive = true;
  double correlation_threshold = 0.95;
  double missing_threshold = 0.5;
  bool zero_as_missing = false;
  std::size_t top_k = 20;

  resampling::Kind resampling = resampling::Kind::none;
  std::size_t k_neighbors = 5;
  models::Family family = models::Family::oblivious_boosting;
  models::TrainConfig train;
  std::string feature_set = "full";  // full | top

  std::size_t cv_folds = 5;
  double train_fraction = 0.75;
  GridSpec grid;
  std::size_t workers = 0;

  std::string explain_row;  // row id; empty = one account per confusion cell
  std::string dependence_feature;
  std::string color_feature;

  /// Accepts flat dotted keys ("model.learning_rate") or nested objects.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
  /// Applies one dotted key; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const nlohmann::json& value);
  /// Parses `key=value`, reading the value as JSON when possible and as a string otherwise.
  void set_assignment(const std::string& assignment);
  void validate() const;
  std::uint64_t seed_value() const;
  /// Canonical flat form (sorted keys).
  nlohmann::json to_json() const;
  /// Hex FNV-1a of the canonical form.
  std::string hash() const;
};

/// {config_hash, seed} stamped into every artifact.
nlohmann::json provenance(const PipelineConfig& config);

// ------------------------------------------------------------------ stages

struct SelectionStage {
  selection::SelectionReport report;  // constant -> missing -> correlated -> top-k
  features::FeatureMatrix full;       // after pruning
  features::FeatureMatrix top;        // SHAP top-k of `full`
  explain::GlobalImportance importance;  // benchmark model on `full`
};

features::FeatureMatrix featurize(const ingest::LedgerBundle& bundle, const PipelineConfig& config);

/// Constant, missing and correlation pruning, then SHAP top-k from an
/// oblivious-boosting benchmark fitted on every pruned row.
SelectionStage select_features(const features::FeatureMatrix& matrix, const PipelineConfig& config);

const features::FeatureMatrix& feature_set(const SelectionStage& s, const std::string& name);
std::string feature_set_label(const SelectionStage& s, const std::string& name);

struct GridRow {
  std::string model;
  std::string resampling;
  std::string feature_set;
  std::string label;
  std::optional<evaluation::CvResult> result;
  std::string error;
};

struct GridReport {
  std::vector<GridRow> rows;

  std::string csv() const;
  /// Table with one line per (model, resampler) and one column per feature set.
  std::string text() const;
  nlohmann::json to_json() const;
};

/// "0.68 (0.08)".
std::string format_cell(double mean, double std);

/// Evaluates every compatible cell by k-fold CV on a worker pool. Cell seeds
/// derive from (seed, cell label), so results do not depend on scheduling.
/// A failing cell records its error and the grid continues.
GridReport run_grid(const GridSpec& grid, const SelectionStage& selected, const models::TrainConfig& train,
                    std::size_t k, std::size_t k_neighbors, std::uint64_t seed, std::size_t workers = 0);

enum class Outcome { true_positive, true_negative, false_positive, false_negative };
std::string label(Outcome o);
Outcome outcome_of(double probability, int label, double threshold = 0.5);

struct AccountExplanation {
  std::string row_id;
  int label = 0;
  double probability = 0.0;
  Outcome outcome = Outcome::true_negative;
  explain::PlotData waterfall;
};

/// Waterfall for one row of `matrix`, labelled TP/TN/FP/FN at threshold 0.5.
AccountExplanation explain_account(const models::TreeEnsemble& model, const features::FeatureMatrix& matrix,
                                   const std::string& row_id);

/// Writes files as `<name>.partial` and renames them only on commit, so an
/// aborted run leaves its outputs flagged.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir);
  ~ArtifactWriter();
  ArtifactWriter(const ArtifactWriter&) = delete;
  ArtifactWriter& operator=(const ArtifactWriter&) = delete;

  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const nlohmann::json& j);
  void commit();
  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::string>& written() const { return names_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
  bool committed_ = false;
};

/// Stage names accepted by `run_stage`.
const std::vector<std::string>& stage_names();

/// Runs `stage` (and everything upstream of it) for `config`, writing its
/// artifacts to config.out_dir. `report` runs the whole pipeline.
/// Errors are rethrown after prefixing the failing stage's name.
std::vector<std::string> run_stage(const std::string& stage, const PipelineConfig& config);

}  // namespace creditx::pipeline
