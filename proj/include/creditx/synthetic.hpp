#pragma once

#include <cstdint>

#include "creditx/dataset.hpp"
#include "creditx/ingest.hpp"

namespace creditx::synthetic {

struct LedgerSpec {
  std::size_t accounts = 50;
  double bad_rate = 0.111;
  std::size_t inactive_accounts = 0;  // accounts with no transaction in the horizon
  std::size_t unlabeled_accounts = 0;
  std::size_t shared_accounts = 1;    // accounts linked to a second client
  double daily_activity = 0.25;       // chance of a transaction on a given day
  std::uint64_t seed = 0;
};

/// Joined ledger whose bad accounts receive smaller incoming payments and run
/// lower balances. Balances stay within [-300, 731], amounts within [-364, 364].
ingest::LedgerBundle generate_ledger(const LedgerSpec& spec);

struct BenchmarkSpec {
  std::size_t rows = 2000;
  std::size_t features = 20;
  double bad_rate = 0.111;
  std::uint64_t seed = 0;
};

/// Gaussian features; the label marks the top bad_rate share of a latent
/// monotone-plus-interaction score with logistic noise:
///   1.0 x0 + 0.8 x1 - 0.6 x2 + 1.2 x3 x4 + 1.0 [x5 > 0.5] + 0.5 tanh(2 x6)
/// Remaining features are pure noise.
Dataset generate_benchmark(const BenchmarkSpec& spec);

}  // namespace creditx::synthetic
