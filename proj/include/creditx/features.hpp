#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "creditx/common.hpp"
#include "creditx/ingest.hpp"

namespace creditx::features {

/// Half-open window [lo, hi) of day offsets t = application_date - event_date.
struct WindowSpec {
  std::string label;
  int lo = 0;
  int hi = 0;

  bool contains(int offset) const { return offset >= lo && offset < hi; }
};

/// last30, 30_60, 60_90, 90_120.
const std::vector<WindowSpec>& canonical_windows();

enum class TrxStat { min, max, mean, sum, count, std };
enum class Direction { incoming, outgoing, all };
enum class BalanceStat { var, max_pos, max_neg, min, max, mean, std, slope };

const char* to_string(TrxStat s);
const char* to_string(Direction d);
const char* to_string(BalanceStat s);

std::vector<ingest::TransactionRecord> window_slice(const std::vector<ingest::TransactionRecord>& txns,
                                                    Date application_date, const WindowSpec& spec);

/// Balances for the days of the window that the series covers, oldest first.
std::vector<Cents> window_slice(const ingest::DailyBalanceSeries& series, Date application_date,
                                const WindowSpec& spec);

/// `count` yields 0 on an empty filter; every other statistic yields missing.
double aggregate_transactions(const std::vector<ingest::TransactionRecord>& txns, TrxStat stat, Direction dir);

/// Missing when `balances` is empty.
double aggregate_balance(const std::vector<Cents>& balances, BalanceStat stat);

struct FeatureMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> columns;
  Matrix values;  // NaN = missing
  std::vector<int> labels;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }
  std::optional<std::size_t> column_index(const std::string& name) const;
  std::size_t require_column(const std::string& name) const;

  FeatureMatrix select_rows(const std::vector<std::size_t>& idx) const;
  FeatureMatrix select_columns(const std::vector<std::size_t>& idx) const;
};

/// KPI names in generation order.
std::vector<std::string> kpi_names(const std::vector<WindowSpec>& windows = canonical_windows());

inline constexpr const char* kTotalCountColumn = "trx_count_all_0_120";
inline constexpr const char* kActiveDaysColumn = "trx_active_days_0_120";

/// One row per labeled account: 26 KPIs per window plus two 120-day globals.
FeatureMatrix build_feature_matrix(const ingest::LedgerBundle& bundle,
                                   const std::vector<WindowSpec>& windows = canonical_windows());

/// Removes rows without any transaction in the 120-day horizon.
FeatureMatrix drop_inactive_accounts(const FeatureMatrix& matrix);

/// Train-fitted column medians used to fill missing values.
struct Imputer {
  std::vector<double> medians;

  static Imputer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
  void apply_row(std::span<double> row) const;
};

/// Column mean and population standard deviation.
struct ScalerParams {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> constant;  // sigma == 0: column passed through unscaled

  static ScalerParams fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
  void apply_row(std::span<double> row) const;
  Matrix invert(const Matrix& z) const;

  nlohmann::json to_json() const;
  static ScalerParams from_json(const nlohmann::json& j);
};

/// Fits on `matrix` (which must not contain missing values) and returns z-scores.
std::pair<Matrix, ScalerParams> standardize(const Matrix& matrix);

/// Header `row_id,<columns>,performance`; missing values are empty fields.
std::string csv_text(const FeatureMatrix& m);
void write_csv(const FeatureMatrix& m, const std::string& path);
/// Skips leading `#` comment lines.
FeatureMatrix read_csv(const std::string& path);
nlohmann::json to_json(const FeatureMatrix& m);
FeatureMatrix from_json(const nlohmann::json& j);

}  // namespace creditx::features
