#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "creditx/common.hpp"

namespace creditx::models::detail {

// Discretized training columns for histogram split search. Thresholds lie
// midway between adjacent retained values, so `x <= threshold[b]` selects
// exactly bins 0..b.
struct FeatureBins {
  static constexpr std::uint16_t kMissingBin = 0xFFFF;

  std::vector<std::vector<double>> thresholds;  // per feature
  std::vector<std::vector<std::uint16_t>> bins; // per feature, per row

  std::size_t n_bins(std::size_t f) const { return thresholds[f].size() + 1; }

  static FeatureBins build(const Matrix& x, std::size_t max_bins) {
    FeatureBins fb;
    fb.thresholds.resize(x.cols());
    fb.bins.resize(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
      std::vector<double> v;
      v.reserve(x.rows());
      for (std::size_t r = 0; r < x.rows(); ++r)
        if (!is_missing(x(r, f))) v.push_back(x(r, f));
      std::sort(v.begin(), v.end());
      std::vector<double> distinct = v;
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      auto& thr = fb.thresholds[f];
      if (distinct.size() <= max_bins) {
        for (std::size_t i = 0; i + 1 < distinct.size(); ++i) thr.push_back(0.5 * (distinct[i] + distinct[i + 1]));
      } else {
        for (std::size_t k = 1; k < max_bins; ++k) {
          const double q = v[k * v.size() / max_bins];
          auto it = std::upper_bound(distinct.begin(), distinct.end(), q);
          if (it == distinct.end()) break;
          const double t = 0.5 * (q + *it);
          if (thr.empty() || t > thr.back()) thr.push_back(t);
        }
      }
      auto& b = fb.bins[f];
      b.resize(x.rows());
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double val = x(r, f);
        b[r] = is_missing(val) ? kMissingBin
                               : static_cast<std::uint16_t>(std::lower_bound(thr.begin(), thr.end(), val) - thr.begin());
      }
    }
    return fb;
  }
};

}  // namespace creditx::models::detail
