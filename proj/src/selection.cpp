#include "creditx/selection.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

namespace creditx::selection {

namespace {

SelectionReport make_report(const features::FeatureMatrix& m, std::vector<Removal> removed) {
  SelectionReport r;
  r.original = m.columns;
  std::set<std::string> gone;
  for (const auto& x : removed) gone.insert(x.column);
  for (const auto& c : m.columns)
    if (!gone.contains(c)) r.surviving.push_back(c);
  r.removed = std::move(removed);
  return r;
}

std::vector<std::size_t> surviving_indices(const features::FeatureMatrix& m, const SelectionReport& r) {
  std::vector<std::size_t> idx;
  for (const auto& c : r.surviving) idx.push_back(m.require_column(c));
  return idx;
}

}  // namespace

const char* to_string(Reason r) {
  switch (r) {
    case Reason::constant: return "constant";
    case Reason::missing: return "missing";
    case Reason::correlated: return "correlated";
    case Reason::not_in_top_k: return "not_in_top_k";
  }
  return "?";
}

void SelectionReport::chain(const SelectionReport& next) {
  if (next.original != surviving) throw std::invalid_argument("selection reports do not chain");
  removed.insert(removed.end(), next.removed.begin(), next.removed.end());
  surviving = next.surviving;
}

nlohmann::json SelectionReport::to_json() const {
  nlohmann::json rem = nlohmann::json::array();
  for (const auto& r : removed) {
    nlohmann::json e{{"column", r.column}, {"reason", to_string(r.reason)}};
    switch (r.reason) {
      case Reason::correlated:
        e["with"] = r.correlated_with;
        e["r"] = r.value;
        break;
      case Reason::missing: e["fraction"] = r.value; break;
      case Reason::not_in_top_k: e["importance"] = r.value; break;
      case Reason::constant: break;
    }
    rem.push_back(std::move(e));
  }
  return {{"original_count", original.size()},
          {"surviving_count", surviving.size()},
          {"removed", rem},
          {"surviving", surviving},
          {"notes", {"correlation threshold is a Pearson coefficient (0.95), not a percentage"}}};
}

std::string SelectionReport::table() const {
  std::ostringstream os;
  os << "columns: " << original.size() << " -> " << surviving.size() << " kept\n";
  for (const auto& r : removed) {
    os << "  - " << r.column << "  " << to_string(r.reason);
    if (r.reason == Reason::correlated) {
      char rb[32];
      std::snprintf(rb, sizeof rb, "%.4f", r.value);
      os << " with " << r.correlated_with << " r=" << rb;
    } else if (r.reason == Reason::missing) {
      char rb[32];
      std::snprintf(rb, sizeof rb, "%.4f", r.value);
      os << " fraction=" << rb;
    }
    os << '\n';
  }
  return os.str();
}

std::pair<features::FeatureMatrix, SelectionReport> drop_constant(const features::FeatureMatrix& m) {
  std::vector<Removal> removed;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    std::optional<double> first;
    bool varies = false;
    for (std::size_t r = 0; r < m.rows() && !varies; ++r) {
      const double v = m.values(r, c);
      if (is_missing(v)) continue;
      if (!first) first = v;
      else if (v != *first) varies = true;
    }
    if (!varies) removed.push_back({m.columns[c], Reason::constant, {}, 0.0});
  }
  auto report = make_report(m, std::move(removed));
  return {m.select_columns(surviving_indices(m, report)), std::move(report)};
}

std::vector<double> missing_fraction(const features::FeatureMatrix& m, bool treat_zero_as_missing) {
  std::vector<double> out(m.cols(), 0.0);
  if (m.rows() == 0) return out;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    std::size_t count = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double v = m.values(r, c);
      if (is_missing(v) || (treat_zero_as_missing && v == 0.0)) ++count;
    }
    out[c] = static_cast<double>(count) / static_cast<double>(m.rows());
  }
  return out;
}

std::pair<features::FeatureMatrix, SelectionReport> prune_missing(const features::FeatureMatrix& m,
                                                                  bool treat_zero_as_missing, double threshold) {
  const auto frac = missing_fraction(m, treat_zero_as_missing);
  std::vector<Removal> removed;
  for (std::size_t c = 0; c < m.cols(); ++c)
    if (frac[c] > threshold) removed.push_back({m.columns[c], Reason::missing, {}, frac[c]});
  auto report = make_report(m, std::move(removed));
  return {m.select_columns(surviving_indices(m, report)), std::move(report)};
}

double pairwise_pearson(std::span<const double> a, std::span<const double> b) {
  double n = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (is_missing(a[i]) || is_missing(b[i])) continue;
    n += 1;
    sa += a[i];
    sb += b[i];
  }
  if (n < 2) return 0.0;
  const double ma = sa / n, mb = sb / n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (is_missing(a[i]) || is_missing(b[i])) continue;
    const double da = a[i] - ma, db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa <= 0 || sbb <= 0) return 0.0;
  const double r = sab / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

std::pair<features::FeatureMatrix, SelectionReport> correlation_prune(const features::FeatureMatrix& m,
                                                                      double threshold) {
  if (m.rows() < 2) throw DataError("correlation_prune needs at least two rows");
  std::vector<std::vector<double>> cols(m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) cols[c] = m.values.column(c);
  std::vector<bool> removed_flag(m.cols(), false);
  std::vector<Removal> removed;
  for (std::size_t i = 0; i < m.cols(); ++i) {
    if (removed_flag[i]) continue;
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      if (removed_flag[j]) continue;
      const double r = pairwise_pearson(cols[i], cols[j]);
      if (std::abs(r) > threshold) {
        removed_flag[j] = true;
        removed.push_back({m.columns[j], Reason::correlated, m.columns[i], std::abs(r)});
      }
    }
  }
  auto report = make_report(m, std::move(removed));
  return {m.select_columns(surviving_indices(m, report)), std::move(report)};
}

std::vector<std::size_t> select_top_k(const std::vector<double>& importance, std::size_t k) {
  if (k > importance.size()) {
    throw ConfigError("top-k of " + std::to_string(k) + " exceeds the " + std::to_string(importance.size()) +
                      " available columns");
  }
  std::vector<std::size_t> order(importance.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::pair<features::FeatureMatrix, SelectionReport> select_top_k_by_shap(const features::FeatureMatrix& m,
                                                                         const std::vector<double>& importance,
                                                                         std::size_t k) {
  if (importance.size() != m.cols()) throw std::invalid_argument("importance length differs from column count");
  const auto keep = select_top_k(importance, k);
  std::vector<bool> kept(m.cols(), false);
  for (auto i : keep) kept[i] = true;
  std::vector<Removal> removed;
  for (std::size_t c = 0; c < m.cols(); ++c)
    if (!kept[c]) removed.push_back({m.columns[c], Reason::not_in_top_k, {}, importance[c]});
  auto report = make_report(m, std::move(removed));
  return {m.select_columns(keep), std::move(report)};
}

}  // namespace creditx::selection
