#include "creditx/resampling.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace creditx::resampling {

namespace {

struct ClassSplit {
  int minority = 1;
  std::vector<std::size_t> minority_rows;
  std::vector<std::size_t> majority_rows;
  bool balanced = false;
};

ClassSplit split_classes(const Dataset& d) {
  const auto counts = d.class_counts();
  if (counts[0] == 0 || counts[1] == 0) throw DataError("resampling needs both classes in the training rows");
  ClassSplit s;
  s.minority = counts[1] <= counts[0] ? 1 : 0;
  s.balanced = counts[0] == counts[1];
  for (std::size_t i = 0; i < d.rows(); ++i) (d.y[i] == s.minority ? s.minority_rows : s.majority_rows).push_back(i);
  return s;
}

ResampleResult identity(const Dataset& d) {
  ResampleResult r;
  r.data = d;
  r.source.resize(d.rows());
  std::iota(r.source.begin(), r.source.end(), 0);
  return r;
}

// Median-imputed copy in original units plus its train-standardized twin used for distances.
struct NeighborSpace {
  Matrix original;
  Matrix scaled;
};

NeighborSpace neighbor_space(const Dataset& d) {
  NeighborSpace s;
  s.original = features::Imputer::fit(d.x).apply(d.x);
  s.scaled = features::ScalerParams::fit(s.original).apply(s.original);
  return s;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// k nearest rows of `candidates` to `row` (excluding `row`), ties broken by index.
std::vector<std::size_t> nearest(const Matrix& z, std::size_t row, const std::vector<std::size_t>& candidates,
                                 std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(candidates.size());
  for (auto c : candidates)
    if (c != row) d.emplace_back(sq_dist(z.row(row), z.row(c)), c);
  k = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(d[i].second);
  return out;
}

// Appends synthetic minority rows interpolated from `seeds` toward their minority neighbours.
void synthesize(ResampleResult& out, const Dataset& d, const NeighborSpace& space, const ClassSplit& cls,
                const std::vector<std::size_t>& seeds, std::size_t k, Rng& rng) {
  const std::size_t needed = cls.majority_rows.size() - cls.minority_rows.size();
  std::vector<std::vector<std::size_t>> neighbors(d.rows());
  for (auto s : seeds) neighbors[s] = nearest(space.scaled, s, cls.minority_rows, k);
  std::vector<double> row(d.cols());
  for (std::size_t i = 0; i < needed; ++i) {
    const std::size_t parent = seeds[rng.below(seeds.size())];
    const auto& nn = neighbors[parent];
    const std::size_t neighbor = nn.empty() ? parent : nn[rng.below(nn.size())];
    const double lambda = rng.uniform();
    auto p = space.original.row(parent);
    auto q = space.original.row(neighbor);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = p[c] + lambda * (q[c] - p[c]);
    out.data.x.append_row(row);
    out.data.y.push_back(cls.minority);
    out.data.w.push_back(d.w[parent]);
    out.synthetic.push_back({out.data.rows() - 1, parent, neighbor, lambda});
    out.source.push_back(parent);
  }
}

std::size_t effective_k(std::size_t k, std::size_t minority) {
  if (k < 1) throw ConfigError("k_neighbors must be at least 1");
  if (minority < 2) throw DataError("SMOTE needs at least two minority rows");
  return std::min(k, minority - 1);
}

}  // namespace

Kind parse_kind(const std::string& l) {
  if (l == "none") return Kind::none;
  if (l == "undersample") return Kind::undersample;
  if (l == "oversample") return Kind::oversample;
  if (l == "smote") return Kind::smote;
  if (l == "borderline_smote") return Kind::borderline_smote;
  if (l == "svm_smote") return Kind::svm_smote;
  if (l == "class_weight") return Kind::class_weight_proportional;
  if (l == "sqrt_balanced") return Kind::class_weight_sqrt_balanced;
  throw ConfigError("unknown resampling strategy '" + l + "'");
}

std::string label(Kind kind) {
  switch (kind) {
    case Kind::none: return "none";
    case Kind::undersample: return "undersample";
    case Kind::oversample: return "oversample";
    case Kind::smote: return "smote";
    case Kind::borderline_smote: return "borderline_smote";
    case Kind::svm_smote: return "svm_smote";
    case Kind::class_weight_proportional: return "class_weight";
    case Kind::class_weight_sqrt_balanced: return "sqrt_balanced";
  }
  return "?";
}

bool is_class_weighting(Kind kind) {
  return kind == Kind::class_weight_proportional || kind == Kind::class_weight_sqrt_balanced;
}

ResampleResult undersample_majority(const TrainView& train, std::uint64_t seed) {
  const Dataset& d = train.data();
  const auto cls = split_classes(d);
  if (cls.balanced) return identity(d);
  Rng rng(seed);
  auto majority = cls.majority_rows;
  rng.shuffle(majority);
  majority.resize(cls.minority_rows.size());
  std::vector<std::size_t> keep = cls.minority_rows;
  keep.insert(keep.end(), majority.begin(), majority.end());
  std::sort(keep.begin(), keep.end());
  ResampleResult r;
  r.data = d.subset(keep);
  r.source = keep;
  return r;
}

ResampleResult oversample_minority(const TrainView& train, std::uint64_t seed) {
  const Dataset& d = train.data();
  const auto cls = split_classes(d);
  ResampleResult r = identity(d);
  if (cls.balanced) return r;
  Rng rng(seed);
  const std::size_t needed = cls.majority_rows.size() - cls.minority_rows.size();
  for (std::size_t i = 0; i < needed; ++i) {
    const std::size_t src = cls.minority_rows[rng.below(cls.minority_rows.size())];
    r.data.x.append_row(d.x.row(src));
    r.data.y.push_back(d.y[src]);
    r.data.w.push_back(d.w[src]);
    r.source.push_back(src);
  }
  return r;
}

ResampleResult smote(const TrainView& train, std::size_t k, std::uint64_t seed) {
  const Dataset& d = train.data();
  const auto cls = split_classes(d);
  if (cls.balanced) return identity(d);
  const std::size_t keff = effective_k(k, cls.minority_rows.size());
  const auto space = neighbor_space(d);
  ResampleResult r = identity(d);
  Rng rng(seed);
  synthesize(r, d, space, cls, cls.minority_rows, keff, rng);
  return r;
}

ResampleResult borderline_smote(const TrainView& train, std::size_t k, std::uint64_t seed) {
  const Dataset& d = train.data();
  const auto cls = split_classes(d);
  if (cls.balanced) return identity(d);
  const std::size_t keff = effective_k(k, cls.minority_rows.size());
  const auto space = neighbor_space(d);
  std::vector<std::size_t> everyone(d.rows());
  std::iota(everyone.begin(), everyone.end(), 0);
  std::vector<std::size_t> danger;
  for (auto i : cls.minority_rows) {
    const auto nn = nearest(space.scaled, i, everyone, k);
    const auto majority = static_cast<std::size_t>(
        std::count_if(nn.begin(), nn.end(), [&](std::size_t j) { return d.y[j] != cls.minority; }));
    if (2 * majority >= nn.size() && majority < nn.size()) danger.push_back(i);
  }
  ResampleResult r = identity(d);
  Rng rng(seed);
  if (danger.empty()) {
    r.notes.push_back("borderline_smote: no danger points, fell back to plain SMOTE");
    synthesize(r, d, space, cls, cls.minority_rows, keff, rng);
  } else {
    synthesize(r, d, space, cls, danger, keff, rng);
  }
  return r;
}

double LinearSvm::decision(std::span<const double> x) const {
  double s = b;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

LinearSvm fit_linear_svm(const Matrix& x, const std::vector<int>& y, std::size_t epochs, double c) {
  // Minimises 0.5 |w|^2 / n + (C / n) sum hinge_i by full-batch subgradient steps,
  // keeping the best iterate seen.
  const std::size_t n = x.rows(), p = x.cols();
  const double nn = static_cast<double>(n);
  LinearSvm cur{std::vector<double>(p, 0.0), 0.0};
  LinearSvm best = cur;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<double> gw(p);
  for (std::size_t t = 1; t <= epochs + 1; ++t) {
    double hinge = 0.0, gb = 0.0;
    for (std::size_t j = 0; j < p; ++j) gw[j] = cur.w[j] / nn;
    for (std::size_t i = 0; i < n; ++i) {
      const double yi = y[i] == 1 ? 1.0 : -1.0;
      const double m = yi * cur.decision(x.row(i));
      if (m < 1.0) {
        hinge += 1.0 - m;
        auto xi = x.row(i);
        for (std::size_t j = 0; j < p; ++j) gw[j] -= c * yi * xi[j] / nn;
        gb -= c * yi / nn;
      }
    }
    double norm = 0.0;
    for (double v : cur.w) norm += v * v;
    const double obj = 0.5 * norm / nn + c * hinge / nn;
    if (obj < best_obj) {
      best_obj = obj;
      best = cur;
    }
    if (t > epochs) break;
    const double eta = 1.0 / std::sqrt(static_cast<double>(t));
    for (std::size_t j = 0; j < p; ++j) cur.w[j] -= eta * gw[j];
    cur.b -= eta * gb;
  }
  return best;
}

ResampleResult svm_smote(const TrainView& train, std::size_t k, std::uint64_t seed) {
  const Dataset& d = train.data();
  const auto cls = split_classes(d);
  if (cls.balanced) return identity(d);
  if (k < 1) throw ConfigError("k_neighbors must be at least 1");
  const std::size_t keff = std::min(k, cls.minority_rows.size() - 1);
  const auto space = neighbor_space(d);
  const auto svm = fit_linear_svm(space.scaled, d.y);
  std::vector<std::size_t> seeds;
  std::size_t support = 0;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const double yi = d.y[i] == 1 ? 1.0 : -1.0;
    if (yi * svm.decision(space.scaled.row(i)) <= 1.0) {
      ++support;
      if (d.y[i] == cls.minority) seeds.push_back(i);
    }
  }
  ResampleResult r = identity(d);
  if (support == d.rows()) r.notes.push_back("svm_smote: degenerate SVM, every row is a support vector");
  if (seeds.empty()) {
    r.notes.push_back("svm_smote: no minority support vectors, seeding from every minority row");
    seeds = cls.minority_rows;
  }
  Rng rng(seed);
  synthesize(r, d, space, cls, seeds, keff, rng);
  return r;
}

ClassWeights class_weights(const std::vector<int>& y, WeightMode mode, const std::vector<double>& sample_weights) {
  std::array<double, 2> total{0.0, 0.0};
  for (std::size_t i = 0; i < y.size(); ++i)
    total[y[i] == 1 ? 1 : 0] += sample_weights.empty() ? 1.0 : sample_weights[i];
  if (total[0] == 0.0 || total[1] == 0.0) throw DataError("class weights need both classes");
  ClassWeights cw;
  if (mode == WeightMode::proportional) {
    cw.weight = {1.0, total[0] / total[1]};
  } else {
    const double mx = std::max(total[0], total[1]);
    cw.weight = {std::sqrt(mx / total[0]), std::sqrt(mx / total[1])};
  }
  return cw;
}

ResampleResult apply(const ResamplingStrategy& s, const TrainView& train) {
  switch (s.kind) {
    case Kind::none: return identity(train.data());
    case Kind::undersample: return undersample_majority(train, s.seed);
    case Kind::oversample: return oversample_minority(train, s.seed);
    case Kind::smote: return smote(train, s.k_neighbors, s.seed);
    case Kind::borderline_smote: return borderline_smote(train, s.k_neighbors, s.seed);
    case Kind::svm_smote: return svm_smote(train, s.k_neighbors, s.seed);
    case Kind::class_weight_proportional:
    case Kind::class_weight_sqrt_balanced: {
      ResampleResult r = identity(train.data());
      const auto cw = class_weights(r.data.y, s.kind == Kind::class_weight_proportional ? WeightMode::proportional
                                                                                       : WeightMode::sqrt_balanced);
      for (std::size_t i = 0; i < r.data.rows(); ++i) r.data.w[i] *= cw.weight[r.data.y[i] == 1 ? 1 : 0];
      return r;
    }
  }
  return identity(train.data());
}

}  // namespace creditx::resampling
