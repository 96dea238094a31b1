#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "creditx/dataset.hpp"

namespace creditx::models::detail {

// Stratified early-stopping holdout. Falls back to fitting on every row when
// the fraction is zero or fewer than two rows would be held out.
struct ValidationSplit {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> valid;
};

inline ValidationSplit holdout(const Dataset& d, double fraction, std::uint64_t seed) {
  ValidationSplit s;
  if (fraction <= 0.0) {
    s.fit.resize(d.rows());
    std::iota(s.fit.begin(), s.fit.end(), 0);
    return s;
  }
  Rng rng(seed);
  std::vector<bool> in_valid(d.rows(), false);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.rows(); ++i)
      if (d.y[i] == cls) idx.push_back(i);
    rng.shuffle(idx);
    const auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size()) + 0.5));
    for (std::size_t i = 0; i < take && i + 1 < idx.size(); ++i) in_valid[idx[i]] = true;
  }
  for (std::size_t i = 0; i < d.rows(); ++i) (in_valid[i] ? s.valid : s.fit).push_back(i);
  if (s.valid.size() < 2) {
    s.fit.resize(d.rows());
    std::iota(s.fit.begin(), s.fit.end(), 0);
    s.valid.clear();
  }
  return s;
}

}  // namespace creditx::models::detail
