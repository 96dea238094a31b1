#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "creditx/common.hpp"

namespace creditx::ingest {

struct ClientRecord {
  std::string client_id;
  std::vector<std::string> account_links;
};

struct AccountRecord {
  std::string account_id;
  Cents snapshot_balance;
  Date snapshot_date;
};

struct TransactionRecord {
  std::string transaction_id;
  std::string account_id;
  Date date;
  Cents amount;  // positive = incoming, negative = outgoing
};

struct LoanOutcome {
  std::string account_id;
  Date application_date;
  int performance = 0;  // 1 = bad
};

/// End-of-day balances, one per calendar day in [start_date, end_date].
struct DailyBalanceSeries {
  std::string account_id;
  Date start_date;
  Date end_date;
  std::vector<Cents> balances;

  std::size_t size() const { return balances.size(); }
  bool covers(Date d) const { return d >= start_date && d <= end_date; }
  Cents at(Date d) const;
};

enum class TableKind { clients, accounts, transactions, loans };

const std::vector<std::string>& table_columns(TableKind kind);

/// Raw CSV rows with the header already validated against the schema.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

RawTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_header);

// Typed loaders. Row order is preserved; duplicate primary keys throw DataError.
std::vector<ClientRecord> load_clients(const std::filesystem::path& path);
std::vector<AccountRecord> load_accounts(const std::filesystem::path& path);
std::vector<TransactionRecord> load_transactions(const std::filesystem::path& path);
std::vector<LoanOutcome> load_loans(const std::filesystem::path& path);

struct LedgerBundle {
  std::vector<ClientRecord> clients;
  std::vector<AccountRecord> accounts;
  std::vector<TransactionRecord> transactions;
  std::vector<LoanOutcome> outcomes;

  // account_id -> row index into `accounts`
  std::unordered_map<std::string, std::size_t> account_index;
  // per account (parallel to `accounts`): transaction row indices, date-ordered
  std::vector<std::vector<std::size_t>> account_transactions;
  // per account: outcome row index, absent for unlabeled accounts
  std::vector<std::optional<std::size_t>> account_outcome;
  // per account: reconstructed balances
  std::vector<DailyBalanceSeries> balances;

  std::size_t labeled_count() const;
  std::vector<TransactionRecord> transactions_of(std::size_t account_row) const;

  bool operator==(const LedgerBundle& other) const;
};

/// Days of history reconstructed before each application date.
inline constexpr int kHistoryDays = 120;

/// Joins the four tables, enforces referential integrity, and reconstructs
/// daily balances for every account.
LedgerBundle join_bundle(std::vector<ClientRecord> clients, std::vector<AccountRecord> accounts,
                         std::vector<TransactionRecord> transactions, std::vector<LoanOutcome> outcomes);

/// Loads clients.csv, accounts.csv, transactions.csv and loans.csv from `dir`.
LedgerBundle load_bundle(const std::filesystem::path& dir);

/// balance(d) = snapshot - sum of amounts dated in (d, snapshot_date].
DailyBalanceSeries reconstruct_balances(const AccountRecord& account,
                                        const std::vector<TransactionRecord>& txns, Date start_date);

struct SanityReport {
  std::optional<Cents> min_balance, max_balance;
  std::optional<Cents> min_amount, max_amount;
  std::size_t accounts = 0;
  std::size_t labeled = 0;
  std::size_t good = 0;
  std::size_t bad = 0;
  double good_fraction = 0.0;
  double bad_fraction = 0.0;
  std::vector<std::string> warnings;
};

SanityReport validate_bundle(const LedgerBundle& bundle);

/// Writes the bundle's four tables as CSV into `dir`.
void write_bundle(const LedgerBundle& bundle, const std::filesystem::path& dir);

}  // namespace creditx::ingest
