#include "creditx/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace creditx::synthetic {

namespace {

constexpr std::int64_t kMinBalance = -300'00;
constexpr std::int64_t kMaxBalance = 731'00;
constexpr std::int64_t kMaxAmount = 364'00;

std::string padded(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

std::int64_t cents_between(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.below(static_cast<std::size_t>(hi - lo + 1)));
}

}  // namespace

ingest::LedgerBundle generate_ledger(const LedgerSpec& spec) {
  if (spec.accounts == 0) throw ConfigError("synthetic ledger needs at least one account");
  if (spec.inactive_accounts + spec.unlabeled_accounts > spec.accounts)
    throw ConfigError("inactive plus unlabeled accounts exceed the account count");
  if (!(spec.bad_rate >= 0.0 && spec.bad_rate <= 1.0)) throw ConfigError("bad_rate must lie in [0, 1]");
  Rng rng(derive_seed(spec.seed, "synthetic-ledger"));

  const std::size_t labeled = spec.accounts - spec.unlabeled_accounts;
  const auto n_bad = static_cast<std::size_t>(std::llround(spec.bad_rate * static_cast<double>(labeled)));
  std::vector<int> label(labeled, 0);
  std::fill(label.begin(), label.begin() + static_cast<std::ptrdiff_t>(n_bad), 1);
  rng.shuffle(label);

  std::vector<ingest::ClientRecord> clients;
  std::vector<ingest::AccountRecord> accounts;
  std::vector<ingest::TransactionRecord> txns;
  std::vector<ingest::LoanOutcome> loans;
  const Date base = Date::from_ymd(2023, 6, 1);

  for (std::size_t i = 0; i < spec.accounts; ++i) {
    const std::string id = padded("A", i);
    const bool is_labeled = i < labeled;
    const bool bad = is_labeled && label[i] == 1;
    // Inactive accounts are the last labeled ones before the unlabeled block.
    const bool inactive = is_labeled && i + spec.inactive_accounts >= labeled;
    const Date application = base + static_cast<std::int32_t>(rng.below(90));
    const Date snapshot = application + static_cast<std::int32_t>(rng.below(15));
    clients.push_back({padded("C", i), {id}});

    std::int64_t balance = bad ? cents_between(rng, -100'00, 150'00) : cents_between(rng, 50'00, 400'00);
    std::size_t k = 0;
    if (!inactive) {
      for (Date d = application - (ingest::kHistoryDays + 5); d <= snapshot; d = d + 1) {
        const int offset = application - d;
        double activity = spec.daily_activity;
        // Bad accounts go quiet in the oldest window.
        if (bad && offset >= 90 && offset < 120) activity *= 0.5;
        if (rng.uniform() >= activity) continue;
        const bool incoming = rng.uniform() < (bad ? 0.45 : 0.55);
        std::int64_t amount = incoming ? (bad ? cents_between(rng, 1'00, 120'00) : cents_between(rng, 20'00, kMaxAmount))
                                       : -cents_between(rng, 5'00, kMaxAmount);
        if (balance + amount > kMaxBalance) amount = -std::min<std::int64_t>(std::abs(amount), balance - kMinBalance);
        if (balance + amount < kMinBalance) amount = std::min<std::int64_t>(std::abs(amount), kMaxBalance - balance);
        if (amount == 0) continue;
        balance += amount;
        txns.push_back({id + "-" + std::to_string(k++), id, d, Cents(amount)});
      }
    }
    accounts.push_back({id, Cents(balance), snapshot});
    if (is_labeled) loans.push_back({id, application, bad ? 1 : 0});
  }
  for (std::size_t s = 0; s < std::min(spec.shared_accounts, spec.accounts); ++s)
    clients.push_back({padded("S", s), {accounts[s].account_id}});
  return ingest::join_bundle(std::move(clients), std::move(accounts), std::move(txns), std::move(loans));
}

Dataset generate_benchmark(const BenchmarkSpec& spec) {
  if (spec.features < 7) throw ConfigError("benchmark needs at least 7 features");
  if (spec.rows < 10) throw ConfigError("benchmark needs at least 10 rows");
  Rng rng(derive_seed(spec.seed, "synthetic-benchmark"));
  Matrix x(spec.rows, spec.features);
  std::vector<double> latent(spec.rows);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    for (std::size_t c = 0; c < spec.features; ++c) x(r, c) = rng.normal();
    const auto v = x.row(r);
    const double score = 1.0 * v[0] + 0.8 * v[1] - 0.6 * v[2] + 1.2 * v[3] * v[4] + (v[5] > 0.5 ? 1.0 : 0.0) +
                         0.5 * std::tanh(2.0 * v[6]);
    double u = rng.uniform();
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);
    latent[r] = score + std::log(u / (1.0 - u));
  }
  std::vector<std::size_t> order(spec.rows);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return latent[a] > latent[b]; });
  const auto n_bad = static_cast<std::size_t>(std::llround(spec.bad_rate * static_cast<double>(spec.rows)));
  std::vector<int> y(spec.rows, 0);
  for (std::size_t i = 0; i < n_bad; ++i) y[order[i]] = 1;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < spec.features; ++c) names.push_back("x" + std::to_string(c));
  return Dataset::from_arrays(std::move(names), std::move(x), std::move(y));
}

}  // namespace creditx::synthetic
