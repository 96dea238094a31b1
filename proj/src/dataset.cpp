#include "creditx/dataset.hpp"

namespace creditx {

std::array<std::size_t, 2> Dataset::class_counts() const {
  std::array<std::size_t, 2> c{0, 0};
  for (int v : y) ++c[v == 1 ? 1 : 0];
  return c;
}

bool Dataset::has_missing() const {
  for (double v : x.data())
    if (is_missing(v)) return true;
  return false;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset d;
  d.feature_names = feature_names;
  d.x = x.select_rows(rows);
  d.scaling = scaling;
  d.y.reserve(rows.size());
  d.w.reserve(rows.size());
  for (auto r : rows) {
    d.y.push_back(y[r]);
    d.w.push_back(w[r]);
  }
  return d;
}

void Dataset::validate() const {
  if (feature_names.size() != x.cols()) throw DataError("feature name count differs from column count");
  if (y.size() != x.rows() || w.size() != x.rows()) throw DataError("label/weight length differs from row count");
  for (int v : y)
    if (v != 0 && v != 1) throw DataError("labels must be 0 or 1");
  for (double v : w)
    if (!(v > 0) || !std::isfinite(v)) throw DataError("sample weights must be positive and finite");
}

Dataset Dataset::from_matrix(const features::FeatureMatrix& m) {
  return from_arrays(m.columns, m.values, m.labels);
}

Dataset Dataset::from_arrays(std::vector<std::string> names, Matrix x, std::vector<int> y, std::vector<double> w) {
  Dataset d;
  d.feature_names = std::move(names);
  d.x = std::move(x);
  d.y = std::move(y);
  d.w = w.empty() ? std::vector<double>(d.y.size(), 1.0) : std::move(w);
  d.validate();
  return d;
}

}  // namespace creditx
