#include "creditx/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace creditx::explain {

namespace {

using models::RegressionTree;
using models::TreeEnsemble;
using models::TreeNode;

const TreeNode& node_at(const RegressionTree& t, int i) { return t.nodes[static_cast<std::size_t>(i)]; }

bool goes_left(const TreeNode& n, std::span<const double> x) {
  const double v = x[static_cast<std::size_t>(n.feature)];
  return is_missing(v) ? n.default_left : v <= n.threshold;
}

// Fractions of a node's cover sent left and right; even split when the node saw no weight.
std::pair<double, double> child_fractions(const RegressionTree& t, const TreeNode& n) {
  if (!(n.cover > 0.0)) return {0.5, 0.5};
  return {node_at(t, n.left).cover / n.cover, node_at(t, n.right).cover / n.cover};
}

void require_covers(const RegressionTree& t, std::size_t index) {
  if (!t.has_covers()) throw ComputeError("tree " + std::to_string(index) + " lacks training covers; SHAP needs them");
}

double expectation(const RegressionTree& t, int i) {
  const auto& n = node_at(t, i);
  if (n.is_leaf()) return n.value;
  const auto [fl, fr] = child_fractions(t, n);
  return fl * expectation(t, n.left) + fr * expectation(t, n.right);
}

// f_S for one tree where membership is given per used-feature slot.
double coalition(const RegressionTree& t, int i, std::span<const double> x, const std::vector<int>& slot,
                 std::uint32_t mask) {
  const auto& n = node_at(t, i);
  if (n.is_leaf()) return n.value;
  const int s = slot[static_cast<std::size_t>(n.feature)];
  if (mask >> s & 1u) return coalition(t, goes_left(n, x) ? n.left : n.right, x, slot, mask);
  const auto [fl, fr] = child_fractions(t, n);
  return fl * coalition(t, n.left, x, slot, mask) + fr * coalition(t, n.right, x, slot, mask);
}

std::vector<int> used_features(const RegressionTree& t) {
  std::vector<int> f;
  for (const auto& n : t.nodes)
    if (!n.is_leaf()) f.push_back(n.feature);
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

// ---------------------------------------------------------------- TreeSHAP

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void extend_path(PathElement* path, std::size_t depth, double zero_fraction, double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].pweight += one_fraction * path[i].pweight * static_cast<double>(i + 1) / d1;
    path[i].pweight = zero_fraction * path[i].pweight * static_cast<double>(depth - i) / d1;
  }
}

void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one = path[depth].pweight;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one * d1 / (static_cast<double>(i + 1) * one);
      next_one = tmp - path[i].pweight * zero * static_cast<double>(depth - i) / d1;
    } else {
      path[i].pweight = path[i].pweight * d1 / (zero * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total permutation weight of the path with element `index` removed.
double unwound_sum(const PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one = path[depth].pweight;
  double total = 0.0;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = next_one * d1 / (static_cast<double>(i + 1) * one);
      total += tmp;
      next_one = path[i].pweight - tmp * zero * static_cast<double>(depth - i) / d1;
    } else if (zero != 0.0) {
      total += path[i].pweight / zero / (static_cast<double>(depth - i) / d1);
    }
  }
  return total;
}

struct ShapWalker {
  const RegressionTree& tree;
  std::span<const double> x;
  std::vector<double>& phi;

  void recurse(int node_index, std::size_t depth, PathElement* parent_path, double zero_fraction, double one_fraction,
               int feature) {
    PathElement* path = parent_path + depth + 1;
    std::copy(parent_path, parent_path + depth + 1, path);
    extend_path(path, depth, zero_fraction, one_fraction, feature);
    const auto& n = node_at(tree, node_index);
    if (n.is_leaf()) {
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_sum(path, depth, i);
        const auto& el = path[i];
        phi[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * n.value;
      }
      return;
    }
    const bool left_hot = goes_left(n, x);
    const int hot = left_hot ? n.left : n.right;
    const int cold = left_hot ? n.right : n.left;
    const auto [fl, fr] = child_fractions(tree, n);
    const double hot_zero = left_hot ? fl : fr;
    const double cold_zero = left_hot ? fr : fl;

    double incoming_zero = 1.0, incoming_one = 1.0;
    std::size_t k = 0;
    for (; k <= depth; ++k)
      if (path[k].feature == n.feature) break;
    if (k != depth + 1) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, depth, k);
      --depth;
    }
    // A branch with both fractions zero carries no weight; skipping it also
    // avoids dividing by zero when it is later unwound.
    if (hot_zero * incoming_zero != 0.0 || incoming_one != 0.0)
      recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one, n.feature);
    if (cold_zero * incoming_zero != 0.0) recurse(cold, depth + 1, path, cold_zero * incoming_zero, 0.0, n.feature);
  }
};

std::size_t max_depth(const RegressionTree& t) {
  return t.depth();
}

void check_row(const TreeEnsemble& e, std::span<const double> x) {
  if (x.size() != e.feature_names.size())
    throw DataError("row has " + std::to_string(x.size()) + " values, model expects " +
                    std::to_string(e.feature_names.size()));
}

// ------------------------------------------------------------------- plots

std::string fmt(double v) {
  if (is_missing(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

nlohmann::json num(double v) { return is_missing(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Mid-rank percentile of each value within its column; missing stays missing.
std::vector<double> percentiles(const Matrix& x, std::size_t col) {
  std::vector<double> sorted;
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (!is_missing(x(r, col))) sorted.push_back(x(r, col));
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out(x.rows(), kMissing);
  const auto n = static_cast<double>(sorted.size());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double v = x(r, col);
    if (is_missing(v)) continue;
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin();
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), v) - sorted.begin();
    out[r] = (static_cast<double>(lo) + 0.5 * static_cast<double>(hi - lo)) / n;
  }
  return out;
}

// Blue (low) to red (high); grey for missing.
std::string heat(double t) {
  if (is_missing(t)) return "#999999";
  const int r = static_cast<int>(std::lround(30 + 225 * t));
  const int b = static_cast<int>(std::lround(255 - 225 * t));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x40%02x", r, b);
  return buf;
}

class Svg {
 public:
  Svg(double w, double h) : w_(w), h_(h) {}
  void line(double x1, double y1, double x2, double y2, const char* stroke = "#444") {
    out_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2 << "\" stroke=\"" << stroke
         << "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill) {
    out_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h << "\" fill=\"" << fill
         << "\"/>\n";
  }
  void dot(double x, double y, const std::string& fill) {
    out_ << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"2.5\" fill=\"" << fill << "\" fill-opacity=\"0.7\"/>\n";
  }
  void text(double x, double y, const std::string& s, const char* anchor = "start") {
    out_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\""
         << anchor << "\">" << xml_escape(s) << "</text>\n";
  }
  std::string str() const {
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_ << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << out_.str() << "</svg>\n";
    return s.str();
  }

 private:
  double w_, h_;
  std::ostringstream out_;
};

struct Range {
  double lo = 0.0, hi = 0.0;
  void include(double v) {
    if (is_missing(v)) return;
    if (empty_) {
      lo = hi = v;
      empty_ = false;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double map(double v, double a, double b) const { return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : 0.5 * (a + b); }

 private:
  bool empty_ = true;
};

std::size_t feature_index(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("unknown feature '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

nlohmann::json header(const char* kind, const TreeEnsemble& e) {
  return {{"schema_version", 1},
          {"kind", kind},
          {"model_kind", models::kind_label(e)},
          {"space", "margin"},
          {"note", "attributions are additive in margin space; probabilities are the link applied to the endpoints"}};
}

PlotData summary_plot(const TreeEnsemble& e, const Matrix& x, const std::vector<std::string>& names,
                      const std::vector<ShapValues>& shap) {
  const auto gi = global_importance(shap, names);
  PlotData out;
  out.data = header("summary", e);
  out.csv = "feature,rank,row,phi,value,percentile\n";
  nlohmann::json feats = nlohmann::json::array();
  const std::size_t shown = std::min<std::size_t>(gi.ranking.size(), 20);
  Range phi_range;
  for (const auto& s : shap)
    for (double v : s.phi) phi_range.include(v);
  const double row_h = 18.0, left = 200.0, width = 640.0;
  Svg svg(left + width + 40.0, 40.0 + row_h * static_cast<double>(shown) + 30.0);
  for (std::size_t rank = 0; rank < gi.ranking.size(); ++rank) {
    const std::size_t f = gi.ranking[rank];
    const auto pct = percentiles(x, f);
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t r = 0; r < shap.size(); ++r) {
      pts.push_back({{"row", r}, {"phi", shap[r].phi[f]}, {"value", num(x(r, f))}, {"percentile", num(pct[r])}});
      out.csv += names[f] + "," + std::to_string(rank + 1) + "," + std::to_string(r) + "," + fmt(shap[r].phi[f]) + "," +
                 fmt(x(r, f)) + "," + fmt(pct[r]) + "\n";
    }
    feats.push_back({{"name", names[f]}, {"rank", rank + 1}, {"importance", gi.importance[f]}, {"points", pts}});
    if (rank < shown) {
      const double y = 40.0 + row_h * (static_cast<double>(rank) + 0.5);
      svg.text(left - 8.0, y + 4.0, names[f], "end");
      for (std::size_t r = 0; r < shap.size(); ++r)
        svg.dot(phi_range.map(shap[r].phi[f], left, left + width), y, heat(pct[r]));
    }
  }
  const double zero_x = phi_range.map(0.0, left, left + width);
  svg.line(zero_x, 30.0, zero_x, 40.0 + row_h * static_cast<double>(shown));
  svg.text(left + width / 2, 20.0, "SHAP value (margin) per row; colour = feature percentile", "middle");
  out.data["features"] = feats;
  out.svg = svg.str();
  return out;
}

PlotData dependence_plot(const TreeEnsemble& e, const Matrix& x, const std::vector<std::string>& names,
                         const std::vector<ShapValues>& shap, const std::string& feature, const std::string& color) {
  const std::size_t f = feature_index(names, feature);
  const bool colored = !color.empty();
  const std::size_t c = colored ? feature_index(names, color) : f;
  const auto pct = percentiles(x, c);
  PlotData out;
  out.data = header("dependence", e);
  out.data["feature"] = feature;
  out.data["color_feature"] = colored ? nlohmann::json(color) : nlohmann::json(nullptr);
  out.csv = "row,value,phi,color_value\n";
  nlohmann::json pts = nlohmann::json::array();
  Range xr, yr;
  for (std::size_t r = 0; r < shap.size(); ++r) {
    const double cv = colored ? x(r, c) : kMissing;
    pts.push_back({{"row", r}, {"value", num(x(r, f))}, {"phi", shap[r].phi[f]}, {"color_value", num(cv)}});
    out.csv += std::to_string(r) + "," + fmt(x(r, f)) + "," + fmt(shap[r].phi[f]) + "," + fmt(cv) + "\n";
    xr.include(x(r, f));
    yr.include(shap[r].phi[f]);
  }
  out.data["points"] = pts;
  Svg svg(700, 460);
  svg.line(60, 420, 680, 420);
  svg.line(60, 20, 60, 420);
  for (std::size_t r = 0; r < shap.size(); ++r) {
    if (is_missing(x(r, f))) continue;
    svg.dot(xr.map(x(r, f), 70, 670), yr.map(shap[r].phi[f], 410, 30), colored ? heat(pct[r]) : "#1f77b4");
  }
  svg.text(370, 450, feature, "middle");
  svg.text(10, 15, "SHAP value of " + feature);
  out.svg = svg.str();
  return out;
}

PlotData waterfall_plot(const TreeEnsemble& e, const std::vector<std::string>& names, const ShapValues& s,
                        std::size_t row) {
  std::vector<std::size_t> order(s.phi.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(s.phi[a]) > std::abs(s.phi[b]); });
  PlotData out;
  out.data = header("waterfall", e);
  out.data["row"] = row;
  out.data["phi0"] = s.phi0;
  out.data["margin"] = s.margin;
  out.data["probability_base"] = e.link(s.phi0);
  out.data["probability"] = e.link(s.margin);
  out.csv = "feature,value,phi,cumulative\n";
  nlohmann::json contrib = nlohmann::json::array();
  double cum = s.phi0;
  Range xr;
  xr.include(cum);
  for (auto j : order) {
    cum += s.phi[j];
    xr.include(cum);
    contrib.push_back({{"feature", names[j]}, {"value", num(s.x[j])}, {"phi", s.phi[j]}});
    out.csv += names[j] + "," + fmt(s.x[j]) + "," + fmt(s.phi[j]) + "," + fmt(cum) + "\n";
  }
  out.data["contributions"] = contrib;

  const std::size_t shown = std::min<std::size_t>(order.size(), 20);
  const double row_h = 20.0, left = 240.0, width = 560.0;
  Svg svg(left + width + 60.0, 60.0 + row_h * static_cast<double>(shown + 1) + 30.0);
  svg.text(left + width / 2, 18, "f(x) = " + short_fmt(s.margin) + "  p = " + short_fmt(e.link(s.margin)), "middle");
  double at = s.phi0;
  for (std::size_t k = 0; k < shown; ++k) {
    const std::size_t j = order[k];
    const double y = 40.0 + row_h * static_cast<double>(k);
    const double a = xr.map(at, left, left + width), b = xr.map(at + s.phi[j], left, left + width);
    svg.rect(std::min(a, b), y, std::max(1.0, std::abs(b - a)), row_h - 4, s.phi[j] >= 0 ? "#d62728" : "#1f77b4");
    svg.text(left - 8, y + 12, names[j] + " = " + (is_missing(s.x[j]) ? std::string("missing") : short_fmt(s.x[j])),
             "end");
    svg.text(std::max(a, b) + 4, y + 12, (s.phi[j] >= 0 ? "+" : "") + short_fmt(s.phi[j]));
    at += s.phi[j];
  }
  const double base_x = xr.map(s.phi0, left, left + width);
  const double bottom = 40.0 + row_h * static_cast<double>(shown) + 10.0;
  svg.line(base_x, 30, base_x, bottom);
  svg.text(base_x, bottom + 14, "E[f(X)] = " + short_fmt(s.phi0) + "  p = " + short_fmt(e.link(s.phi0)), "middle");
  out.svg = svg.str();
  return out;
}

}  // namespace

double ShapValues::additivity_gap() const {
  double s = phi0;
  for (double v : phi) s += v;
  return std::abs(s - margin);
}

nlohmann::json ShapValues::to_json(const std::vector<std::string>& names) const {
  nlohmann::json contrib = nlohmann::json::object();
  for (std::size_t j = 0; j < phi.size(); ++j) contrib[names.at(j)] = phi[j];
  return {{"phi0", phi0}, {"margin", margin}, {"phi", contrib}};
}

CoalitionEvaluator::CoalitionEvaluator(const TreeEnsemble& ensemble) : ensemble_(ensemble) {
  for (std::size_t t = 0; t < ensemble.trees.size(); ++t) require_covers(ensemble.trees[t], t);
}

double CoalitionEvaluator::tree_value(std::size_t tree, std::span<const double> x, const std::vector<bool>& in_s) const {
  const auto& t = ensemble_.trees.at(tree);
  std::vector<int> slot(n_features(), 0);
  std::uint32_t mask = 0;
  for (std::size_t j = 0; j < n_features() && j < 32; ++j) {
    slot[j] = static_cast<int>(j);
    if (in_s[j]) mask |= 1u << j;
  }
  if (n_features() > 32) {
    // Re-slot by used features so the mask stays within 32 bits.
    const auto used = used_features(t);
    mask = 0;
    for (std::size_t k = 0; k < used.size(); ++k) {
      slot[static_cast<std::size_t>(used[k])] = static_cast<int>(k);
      if (in_s[static_cast<std::size_t>(used[k])]) mask |= 1u << k;
    }
  }
  return coalition(t, 0, x, slot, mask);
}

double CoalitionEvaluator::tree_expectation(std::size_t tree) const { return expectation(ensemble_.trees.at(tree), 0); }

double CoalitionEvaluator::value(std::span<const double> x, const std::vector<bool>& in_s) const {
  check_row(ensemble_, x);
  if (in_s.size() != n_features()) throw DataError("coalition mask has the wrong length");
  double s = 0.0;
  for (std::size_t t = 0; t < ensemble_.trees.size(); ++t) s += tree_value(t, x, in_s);
  return ensemble_.base_score + ensemble_.learning_rate * s;
}

ShapValues brute_force_shapley(const CoalitionEvaluator& evaluator, std::span<const double> x) {
  const auto& e = evaluator.ensemble();
  const std::size_t p = evaluator.n_features();
  if (p > kBruteForceMaxFeatures)
    throw ComputeError("brute-force Shapley enumeration is limited to " + std::to_string(kBruteForceMaxFeatures) +
                       " features, model has " + std::to_string(p));
  check_row(e, x);
  ShapValues out;
  out.x.assign(x.begin(), x.end());
  out.phi.assign(p, 0.0);
  double expected = 0.0;
  std::vector<double> tree_phi(p), values;
  for (std::size_t t = 0; t < e.trees.size(); ++t) {
    const auto& tree = e.trees[t];
    const auto used = used_features(tree);
    const std::size_t m = used.size();
    std::vector<int> slot(p, 0);
    for (std::size_t k = 0; k < m; ++k) slot[static_cast<std::size_t>(used[k])] = static_cast<int>(k);
    const std::uint32_t subsets = 1u << m;
    values.resize(subsets);
    for (std::uint32_t s = 0; s < subsets; ++s) values[s] = coalition(tree, 0, x, slot, s);
    expected += values[0];
    // weight(|S|) = |S|! (m - |S| - 1)! / m! = 1 / (m * C(m-1, |S|))
    std::vector<double> weight(m, 0.0);
    for (std::size_t s = 0; s < m; ++s) {
      double binom = 1.0;
      for (std::size_t i = 0; i < s; ++i) binom = binom * static_cast<double>(m - 1 - i) / static_cast<double>(i + 1);
      weight[s] = 1.0 / (static_cast<double>(m) * binom);
    }
    std::fill(tree_phi.begin(), tree_phi.end(), 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const std::uint32_t bit = 1u << k;
      double acc = 0.0;
      for (std::uint32_t s = 0; s < subsets; ++s) {
        if (s & bit) continue;
        acc += weight[static_cast<std::size_t>(__builtin_popcount(s))] * (values[s | bit] - values[s]);
      }
      tree_phi[static_cast<std::size_t>(used[k])] = acc;
    }
    for (std::size_t j = 0; j < p; ++j) out.phi[j] += tree_phi[j];
  }
  for (auto& v : out.phi) v *= e.learning_rate;
  out.phi0 = e.base_score + e.learning_rate * expected;
  out.margin = e.margin(x);
  return out;
}

ShapValues tree_shap(const TreeEnsemble& e, std::span<const double> x) {
  check_row(e, x);
  const std::size_t p = e.feature_names.size();
  ShapValues out;
  out.x.assign(x.begin(), x.end());
  out.phi.assign(p, 0.0);
  std::vector<double> tree_phi(p);
  std::vector<PathElement> buffer;
  double expected = 0.0;
  for (std::size_t t = 0; t < e.trees.size(); ++t) {
    const auto& tree = e.trees[t];
    require_covers(tree, t);
    expected += expectation(tree, 0);
    if (node_at(tree, 0).is_leaf()) continue;
    const std::size_t d = max_depth(tree) + 2;
    buffer.assign(d * (d + 1) / 2, PathElement{});
    std::fill(tree_phi.begin(), tree_phi.end(), 0.0);
    ShapWalker{tree, x, tree_phi}.recurse(0, 0, buffer.data(), 1.0, 1.0, -1);
    for (std::size_t j = 0; j < p; ++j) out.phi[j] += tree_phi[j];
  }
  for (auto& v : out.phi) v *= e.learning_rate;
  out.phi0 = e.base_score + e.learning_rate * expected;
  out.margin = e.margin(x);
  return out;
}

std::vector<ShapValues> tree_shap(const TreeEnsemble& e, const Matrix& x) {
  for (std::size_t t = 0; t < e.trees.size(); ++t) require_covers(e.trees[t], t);
  std::vector<ShapValues> out(x.rows());
  parallel_for(x.rows(), [&](std::size_t r) { out[r] = tree_shap(e, x.row(r)); });
  return out;
}

GlobalImportance global_importance(const std::vector<ShapValues>& shap, const std::vector<std::string>& names) {
  if (shap.empty()) throw DataError("global importance needs at least one row");
  GlobalImportance g;
  g.names = names;
  g.importance.assign(names.size(), 0.0);
  for (const auto& s : shap) {
    if (s.phi.size() != names.size()) throw DataError("SHAP width does not match the feature names");
    for (std::size_t j = 0; j < names.size(); ++j) g.importance[j] += std::abs(s.phi[j]);
  }
  for (auto& v : g.importance) v /= static_cast<double>(shap.size());
  g.ranking.resize(names.size());
  std::iota(g.ranking.begin(), g.ranking.end(), 0);
  std::stable_sort(g.ranking.begin(), g.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return g.importance[a] > g.importance[b]; });
  return g;
}

GlobalImportance global_importance(const TreeEnsemble& e, const Matrix& x) {
  if (x.rows() == 0) throw DataError("global importance needs at least one row");
  return global_importance(tree_shap(e, x), e.feature_names);
}

nlohmann::json GlobalImportance::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t k = 0; k < ranking.size(); ++k)
    rows.push_back({{"rank", k + 1}, {"feature", names[ranking[k]]}, {"mean_abs_shap", importance[ranking[k]]}});
  return {{"importance", rows}};
}

PlotKind parse_plot_kind(const std::string& l) {
  if (l == "summary") return PlotKind::summary;
  if (l == "dependence") return PlotKind::dependence;
  if (l == "waterfall") return PlotKind::waterfall;
  throw ConfigError("unknown plot kind '" + l + "'");
}

PlotData emit_explanation_data(const PlotRequest& req, const TreeEnsemble& e, const Matrix& x,
                               const std::vector<std::string>& names, const std::vector<ShapValues>& shap) {
  if (names != e.feature_names) throw DataError("explanation rows do not match the model schema");
  if (shap.size() != x.rows()) throw DataError("SHAP rows do not match the data rows");
  switch (req.kind) {
    case PlotKind::summary: return summary_plot(e, x, names, shap);
    case PlotKind::dependence: return dependence_plot(e, x, names, shap, req.feature, req.color_feature);
    case PlotKind::waterfall:
      if (req.row >= x.rows())
        throw DataError("row " + std::to_string(req.row) + " out of range (" + std::to_string(x.rows()) + " rows)");
      return waterfall_plot(e, names, shap[req.row], req.row);
  }
  throw ConfigError("unknown plot kind");
}

PlotData emit_explanation_data(const PlotRequest& req, const TreeEnsemble& e, const Matrix& x,
                               const std::vector<std::string>& names) {
  if (names != e.feature_names) throw DataError("explanation rows do not match the model schema");
  if (req.kind == PlotKind::waterfall) {
    if (req.row >= x.rows())
      throw DataError("row " + std::to_string(req.row) + " out of range (" + std::to_string(x.rows()) + " rows)");
    // Only the requested row is needed.
    std::vector<ShapValues> shap(x.rows());
    shap[req.row] = tree_shap(e, x.row(req.row));
    return waterfall_plot(e, names, shap[req.row], req.row);
  }
  if (req.kind == PlotKind::dependence) {
    feature_index(names, req.feature);
    if (!req.color_feature.empty()) feature_index(names, req.color_feature);
  }
  if (x.rows() == 0) throw DataError("explanation needs at least one row");
  return emit_explanation_data(req, e, x, names, tree_shap(e, x));
}

}  // namespace creditx::explain
