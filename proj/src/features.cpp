#include "creditx/features.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace creditx::features {

namespace {

constexpr TrxStat kTrxStats[] = {TrxStat::min, TrxStat::max, TrxStat::mean,
                                 TrxStat::sum, TrxStat::count, TrxStat::std};
constexpr Direction kDirections[] = {Direction::incoming, Direction::outgoing, Direction::all};
constexpr BalanceStat kBalanceStats[] = {BalanceStat::var, BalanceStat::max_pos, BalanceStat::max_neg,
                                         BalanceStat::min, BalanceStat::max,     BalanceStat::mean,
                                         BalanceStat::std, BalanceStat::slope};

bool keep(const ingest::TransactionRecord& t, Direction d) {
  switch (d) {
    case Direction::incoming: return t.amount.value() > 0;
    case Direction::outgoing: return t.amount.value() < 0;
    case Direction::all: return true;
  }
  return true;
}

double population_std(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / n);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<WindowSpec>& canonical_windows() {
  static const std::vector<WindowSpec> w{{"last30", 0, 30}, {"30_60", 30, 60}, {"60_90", 60, 90}, {"90_120", 90, 120}};
  return w;
}

const char* to_string(TrxStat s) {
  switch (s) {
    case TrxStat::min: return "min";
    case TrxStat::max: return "max";
    case TrxStat::mean: return "mean";
    case TrxStat::sum: return "sum";
    case TrxStat::count: return "count";
    case TrxStat::std: return "std";
  }
  return "?";
}

const char* to_string(Direction d) {
  switch (d) {
    case Direction::incoming: return "incoming";
    case Direction::outgoing: return "outgoing";
    case Direction::all: return "all";
  }
  return "?";
}

const char* to_string(BalanceStat s) {
  switch (s) {
    case BalanceStat::var: return "var";
    case BalanceStat::max_pos: return "max_pos";
    case BalanceStat::max_neg: return "max_neg";
    case BalanceStat::min: return "min";
    case BalanceStat::max: return "max";
    case BalanceStat::mean: return "mean";
    case BalanceStat::std: return "std";
    case BalanceStat::slope: return "slope";
  }
  return "?";
}

std::vector<ingest::TransactionRecord> window_slice(const std::vector<ingest::TransactionRecord>& txns,
                                                    Date application_date, const WindowSpec& spec) {
  std::vector<ingest::TransactionRecord> out;
  for (const auto& t : txns) {
    if (spec.contains(application_date - t.date)) out.push_back(t);
  }
  return out;
}

std::vector<Cents> window_slice(const ingest::DailyBalanceSeries& series, Date application_date,
                                const WindowSpec& spec) {
  std::vector<Cents> out;
  // Oldest day first: offsets hi-1 down to lo.
  for (int offset = spec.hi - 1; offset >= spec.lo; --offset) {
    const Date d = application_date - offset;
    if (series.covers(d)) out.push_back(series.at(d));
  }
  return out;
}

double aggregate_transactions(const std::vector<ingest::TransactionRecord>& txns, TrxStat stat, Direction dir) {
  std::vector<double> v;
  for (const auto& t : txns)
    if (keep(t, dir)) v.push_back(t.amount.units());
  if (stat == TrxStat::count) return static_cast<double>(v.size());
  if (v.empty()) return kMissing;
  switch (stat) {
    case TrxStat::min: return *std::min_element(v.begin(), v.end());
    case TrxStat::max: return *std::max_element(v.begin(), v.end());
    case TrxStat::sum: {
      std::int64_t cents = 0;
      for (const auto& t : txns)
        if (keep(t, dir)) cents += t.amount.value();
      return Cents(cents).units();
    }
    case TrxStat::mean: {
      std::int64_t cents = 0;
      for (const auto& t : txns)
        if (keep(t, dir)) cents += t.amount.value();
      return static_cast<double>(cents) / 100.0 / static_cast<double>(v.size());
    }
    case TrxStat::std: return population_std(v);
    case TrxStat::count: break;
  }
  return kMissing;
}

double aggregate_balance(const std::vector<Cents>& balances, BalanceStat stat) {
  if (balances.empty()) return kMissing;
  std::vector<double> v;
  v.reserve(balances.size());
  for (auto c : balances) v.push_back(c.units());
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  switch (stat) {
    case BalanceStat::var: return (balances.back() - balances.front()).units();
    case BalanceStat::max_pos: return std::max(0.0, *mx);
    case BalanceStat::max_neg: return std::abs(std::min(0.0, *mn));
    case BalanceStat::min: return *mn;
    case BalanceStat::max: return *mx;
    case BalanceStat::mean: return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    case BalanceStat::std: return population_std(v);
    case BalanceStat::slope: {
      const std::size_t n = v.size();
      if (n < 2) return 0.0;
      const double tbar = static_cast<double>(n - 1) / 2.0;
      const double ybar = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dt = static_cast<double>(i) - tbar;
        num += dt * (v[i] - ybar);
        den += dt * dt;
      }
      return num / den;
    }
  }
  return kMissing;
}

std::optional<std::size_t> FeatureMatrix::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns.begin());
}

std::size_t FeatureMatrix::require_column(const std::string& name) const {
  auto idx = column_index(name);
  if (!idx) throw DataError("unknown feature '" + name + "'");
  return *idx;
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<std::size_t>& idx) const {
  FeatureMatrix out;
  out.columns = columns;
  out.values = values.select_rows(idx);
  for (auto i : idx) {
    out.row_ids.push_back(row_ids[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::size_t>& idx) const {
  FeatureMatrix out;
  out.row_ids = row_ids;
  out.labels = labels;
  out.values = values.select_cols(idx);
  for (auto i : idx) out.columns.push_back(columns[i]);
  return out;
}

std::vector<std::string> kpi_names(const std::vector<WindowSpec>& windows) {
  std::vector<std::string> names;
  for (const auto& w : windows) {
    for (auto s : kTrxStats)
      for (auto d : kDirections)
        names.push_back(std::string("trx_") + to_string(s) + "_" + to_string(d) + "_" + w.label);
    for (auto s : kBalanceStats) names.push_back(std::string("acc_bal_") + to_string(s) + "_" + w.label);
  }
  names.emplace_back(kTotalCountColumn);
  names.emplace_back(kActiveDaysColumn);
  return names;
}

FeatureMatrix build_feature_matrix(const ingest::LedgerBundle& bundle, const std::vector<WindowSpec>& windows) {
  if (bundle.labeled_count() == 0) throw DataError("no labeled accounts to featurize");
  for (const auto& w : windows) {
    if (w.lo < 0 || w.lo >= w.hi) throw ConfigError("invalid window '" + w.label + "'");
  }
  const int horizon = std::max_element(windows.begin(), windows.end(), [](auto& a, auto& b) {
                        return a.hi < b.hi;
                      })->hi;
  const WindowSpec full{"horizon", 0, horizon};

  FeatureMatrix m;
  m.columns = kpi_names(windows);
  m.values = Matrix(0, m.columns.size());
  std::vector<double> row;
  for (std::size_t a = 0; a < bundle.accounts.size(); ++a) {
    if (!bundle.account_outcome[a]) continue;
    const auto& outcome = bundle.outcomes[*bundle.account_outcome[a]];
    const auto txns = bundle.transactions_of(a);
    const auto& series = bundle.balances[a];
    row.clear();
    for (const auto& w : windows) {
      const auto in_window = window_slice(txns, outcome.application_date, w);
      for (auto s : kTrxStats)
        for (auto d : kDirections) row.push_back(aggregate_transactions(in_window, s, d));
      const auto bal = window_slice(series, outcome.application_date, w);
      for (auto s : kBalanceStats) row.push_back(aggregate_balance(bal, s));
    }
    const auto in_horizon = window_slice(txns, outcome.application_date, full);
    std::set<std::int32_t> days;
    for (const auto& t : in_horizon) days.insert(t.date.days());
    row.push_back(static_cast<double>(in_horizon.size()));
    row.push_back(static_cast<double>(days.size()));
    m.values.append_row(row);
    m.row_ids.push_back(bundle.accounts[a].account_id);
    m.labels.push_back(outcome.performance);
  }
  return m;
}

FeatureMatrix drop_inactive_accounts(const FeatureMatrix& matrix) {
  const auto col = matrix.require_column(kTotalCountColumn);
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < matrix.rows(); ++r)
    if (matrix.values(r, col) > 0) keep.push_back(r);
  if (keep.empty()) throw DataError("empty dataset: every account is inactive over the horizon");
  return matrix.select_rows(keep);
}

Imputer Imputer::fit(const Matrix& x) {
  Imputer imp;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const double m = median(x.column(c));
    imp.medians.push_back(is_missing(m) ? 0.0 : m);
  }
  return imp;
}

void Imputer::apply_row(std::span<double> row) const {
  for (std::size_t c = 0; c < row.size(); ++c)
    if (is_missing(row[c])) row[c] = medians[c];
}

Matrix Imputer::apply(const Matrix& x) const {
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) apply_row(out.row(r));
  return out;
}

ScalerParams ScalerParams::fit(const Matrix& x) {
  ScalerParams p;
  const double n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= n;
    double ss = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(ss / n);
    p.mean.push_back(mean);
    p.stddev.push_back(sd);
    // Relative guard: a column whose spread is pure rounding noise counts as constant.
    p.constant.push_back(!(sd > 1e-12 * std::max(1.0, std::abs(mean))));
  }
  return p;
}

void ScalerParams::apply_row(std::span<double> row) const {
  for (std::size_t c = 0; c < row.size(); ++c)
    if (!constant[c]) row[c] = (row[c] - mean[c]) / stddev[c];
}

Matrix ScalerParams::apply(const Matrix& x) const {
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) apply_row(out.row(r));
  return out;
}

Matrix ScalerParams::invert(const Matrix& z) const {
  Matrix out = z;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c)
      if (!constant[c]) out(r, c) = z(r, c) * stddev[c] + mean[c];
  return out;
}

nlohmann::json ScalerParams::to_json() const {
  return {{"mean", mean}, {"stddev", stddev}, {"constant", constant}};
}

ScalerParams ScalerParams::from_json(const nlohmann::json& j) {
  ScalerParams p;
  p.mean = j.at("mean").get<std::vector<double>>();
  p.stddev = j.at("stddev").get<std::vector<double>>();
  p.constant = j.at("constant").get<std::vector<bool>>();
  return p;
}

std::pair<Matrix, ScalerParams> standardize(const Matrix& matrix) {
  for (double v : matrix.data())
    if (is_missing(v)) throw DataError("standardize: impute missing values first");
  auto params = ScalerParams::fit(matrix);
  return {params.apply(matrix), std::move(params)};
}

std::string csv_text(const FeatureMatrix& m) {
  std::ostringstream out;
  out << "row_id";
  for (const auto& c : m.columns) out << ',' << c;
  out << ",performance\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << m.row_ids[r];
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out << ',';
      if (!is_missing(m.values(r, c))) out << format_double(m.values(r, c));
    }
    out << ',' << m.labels[r] << '\n';
  }
  return out.str();
}

void write_csv(const FeatureMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << csv_text(m);
}

FeatureMatrix read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  auto split = [](const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    return f;
  };
  std::string line;
  std::size_t line_no = 0;
  // Leading '#' lines carry provenance comments.
  do {
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    ++line_no;
  } while (!line.empty() && line.front() == '#');
  auto header = split(line);
  if (header.size() < 2 || header.front() != "row_id" || header.back() != "performance") {
    throw DataError(path + ": expected 'row_id,...,performance' header");
  }
  FeatureMatrix m;
  m.columns.assign(header.begin() + 1, header.end() - 1);
  m.values = Matrix(0, m.columns.size());
  std::vector<double> row(m.columns.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != header.size()) throw DataError(path + ": row " + std::to_string(line_no) + " width mismatch");
    m.row_ids.push_back(f.front());
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
      const auto& s = f[c + 1];
      if (s.empty()) {
        row[c] = kMissing;
        continue;
      }
      try {
        std::size_t used = 0;
        row[c] = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw DataError(path + ": row " + std::to_string(line_no) + ", column '" + m.columns[c] +
                        "': not a number");
      }
    }
    if (f.back() != "0" && f.back() != "1") {
      throw DataError(path + ": row " + std::to_string(line_no) + ": performance must be 0 or 1");
    }
    m.labels.push_back(f.back() == "1" ? 1 : 0);
    m.values.append_row(row);
  }
  return m;
}

nlohmann::json to_json(const FeatureMatrix& m) {
  nlohmann::json values = nlohmann::json::array();
  nlohmann::json mask = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    nlohmann::json vr = nlohmann::json::array();
    nlohmann::json mr = nlohmann::json::array();
    for (double v : m.values.row(r)) {
      const bool miss = is_missing(v);
      vr.push_back(miss ? nlohmann::json(nullptr) : nlohmann::json(v));
      mr.push_back(miss);
    }
    values.push_back(std::move(vr));
    mask.push_back(std::move(mr));
  }
  return {{"version", 1},  {"columns", m.columns}, {"row_ids", m.row_ids},
          {"labels", m.labels}, {"values", values}, {"missing", mask}};
}

FeatureMatrix from_json(const nlohmann::json& j) {
  FeatureMatrix m;
  m.columns = j.at("columns").get<std::vector<std::string>>();
  m.row_ids = j.at("row_ids").get<std::vector<std::string>>();
  m.labels = j.at("labels").get<std::vector<int>>();
  m.values = Matrix(0, m.columns.size());
  const auto& values = j.at("values");
  const auto& mask = j.at("missing");
  std::vector<double> row(m.columns.size());
  for (std::size_t r = 0; r < values.size(); ++r) {
    for (std::size_t c = 0; c < m.columns.size(); ++c)
      row[c] = mask[r][c].get<bool>() ? kMissing : values[r][c].get<double>();
    m.values.append_row(row);
  }
  return m;
}

}  // namespace creditx::features
