#include "creditx/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace creditx::ingest {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string row_context(const std::filesystem::path& path, std::size_t line, const std::string& column) {
  return path.filename().string() + ": row " + std::to_string(line) + ", column '" + column + "'";
}

template <class F>
auto parse_field(const std::filesystem::path& path, std::size_t line, const std::string& column, F&& f) {
  try {
    return f();
  } catch (const DataError& e) {
    throw DataError(row_context(path, line, column) + ": " + e.what());
  }
}

void require_nonempty(const std::filesystem::path& path, std::size_t line, const std::string& column,
                      const std::string& value) {
  if (value.empty()) throw DataError(row_context(path, line, column) + ": empty value");
}

}  // namespace

Cents DailyBalanceSeries::at(Date d) const {
  if (!covers(d)) throw std::out_of_range("date " + d.iso() + " outside balance series of " + account_id);
  return balances[static_cast<std::size_t>(d - start_date)];
}

const std::vector<std::string>& table_columns(TableKind kind) {
  static const std::vector<std::string> clients{"client_id", "account_id"};
  static const std::vector<std::string> accounts{"account_id", "balance", "balance_date"};
  static const std::vector<std::string> transactions{"transaction_id", "account_id", "date", "amount"};
  static const std::vector<std::string> loans{"account_id", "application_date", "performance"};
  switch (kind) {
    case TableKind::clients: return clients;
    case TableKind::accounts: return accounts;
    case TableKind::transactions: return transactions;
    case TableKind::loans: return loans;
  }
  return clients;
}

RawTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      if (fields != expected_header) {
        std::string want;
        for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
        throw DataError(path.filename().string() + ": header mismatch, expected '" + want + "'");
      }
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != expected_header.size()) {
      throw DataError(path.filename().string() + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(expected_header.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw DataError(path.filename().string() + ": missing header row");
  return table;
}

std::vector<ClientRecord> load_clients(const std::filesystem::path& path) {
  const auto& cols = table_columns(TableKind::clients);
  const RawTable raw = read_csv(path, cols);
  std::vector<ClientRecord> out;
  std::unordered_map<std::string, std::size_t> index;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    const auto& r = raw.rows[i];
    require_nonempty(path, raw.line_numbers[i], cols[0], r[0]);
    require_nonempty(path, raw.line_numbers[i], cols[1], r[1]);
    if (!seen.insert({r[0], r[1]}).second) {
      throw DataError(path.filename().string() + ": duplicate key (" + r[0] + ", " + r[1] + ")");
    }
    auto [it, inserted] = index.try_emplace(r[0], out.size());
    if (inserted) out.push_back(ClientRecord{r[0], {}});
    out[it->second].account_links.push_back(r[1]);
  }
  return out;
}

std::vector<AccountRecord> load_accounts(const std::filesystem::path& path) {
  const auto& cols = table_columns(TableKind::accounts);
  const RawTable raw = read_csv(path, cols);
  std::vector<AccountRecord> out;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    const auto& r = raw.rows[i];
    const std::size_t line = raw.line_numbers[i];
    require_nonempty(path, line, cols[0], r[0]);
    if (!ids.insert(r[0]).second) {
      throw DataError(path.filename().string() + ": duplicate account_id '" + r[0] + "'");
    }
    AccountRecord rec;
    rec.account_id = r[0];
    rec.snapshot_balance = parse_field(path, line, cols[1], [&] { return Cents::parse(r[1]); });
    rec.snapshot_date = parse_field(path, line, cols[2], [&] { return Date::parse(r[2]); });
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TransactionRecord> load_transactions(const std::filesystem::path& path) {
  const auto& cols = table_columns(TableKind::transactions);
  const RawTable raw = read_csv(path, cols);
  std::vector<TransactionRecord> out;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    const auto& r = raw.rows[i];
    const std::size_t line = raw.line_numbers[i];
    require_nonempty(path, line, cols[0], r[0]);
    require_nonempty(path, line, cols[1], r[1]);
    if (!ids.insert(r[0]).second) {
      throw DataError(path.filename().string() + ": duplicate transaction_id '" + r[0] + "'");
    }
    TransactionRecord rec;
    rec.transaction_id = r[0];
    rec.account_id = r[1];
    rec.date = parse_field(path, line, cols[2], [&] { return Date::parse(r[2]); });
    rec.amount = parse_field(path, line, cols[3], [&] { return Cents::parse(r[3]); });
    if (rec.amount.value() == 0) throw DataError(row_context(path, line, cols[3]) + ": zero amount");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<LoanOutcome> load_loans(const std::filesystem::path& path) {
  const auto& cols = table_columns(TableKind::loans);
  const RawTable raw = read_csv(path, cols);
  std::vector<LoanOutcome> out;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    const auto& r = raw.rows[i];
    const std::size_t line = raw.line_numbers[i];
    require_nonempty(path, line, cols[0], r[0]);
    if (!ids.insert(r[0]).second) {
      throw DataError(path.filename().string() + ": duplicate outcome for account_id '" + r[0] + "'");
    }
    LoanOutcome rec;
    rec.account_id = r[0];
    rec.application_date = parse_field(path, line, cols[1], [&] { return Date::parse(r[1]); });
    if (r[2] != "0" && r[2] != "1") {
      throw DataError(row_context(path, line, cols[2]) + ": performance must be 0 or 1, got '" + r[2] + "'");
    }
    rec.performance = r[2] == "1" ? 1 : 0;
    out.push_back(std::move(rec));
  }
  return out;
}

DailyBalanceSeries reconstruct_balances(const AccountRecord& account,
                                        const std::vector<TransactionRecord>& txns, Date start_date) {
  if (start_date > account.snapshot_date) {
    throw DataError("balance start " + start_date.iso() + " after snapshot date of account " +
                    account.account_id);
  }
  const auto days = static_cast<std::size_t>(account.snapshot_date - start_date) + 1;
  // Net flow per day, then walk backwards from the snapshot.
  std::vector<Cents> flow(days);
  for (const auto& t : txns) {
    if (t.account_id != account.account_id) {
      throw DataError("transaction " + t.transaction_id + " does not belong to account " + account.account_id);
    }
    if (t.date > account.snapshot_date) {
      throw DataError("transaction " + t.transaction_id + " dated " + t.date.iso() +
                      " after snapshot date " + account.snapshot_date.iso());
    }
    if (t.date >= start_date) flow[static_cast<std::size_t>(t.date - start_date)] += t.amount;
  }
  DailyBalanceSeries s{account.account_id, start_date, account.snapshot_date, std::vector<Cents>(days)};
  s.balances[days - 1] = account.snapshot_balance;
  for (std::size_t i = days - 1; i > 0; --i) s.balances[i - 1] = s.balances[i] - flow[i];
  return s;
}

std::size_t LedgerBundle::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(account_outcome.begin(), account_outcome.end(), [](const auto& o) { return o.has_value(); }));
}

std::vector<TransactionRecord> LedgerBundle::transactions_of(std::size_t account_row) const {
  std::vector<TransactionRecord> out;
  out.reserve(account_transactions[account_row].size());
  for (auto i : account_transactions[account_row]) out.push_back(transactions[i]);
  return out;
}

bool LedgerBundle::operator==(const LedgerBundle& o) const {
  auto same_clients = [](const ClientRecord& a, const ClientRecord& b) {
    return a.client_id == b.client_id && a.account_links == b.account_links;
  };
  auto same_account = [](const AccountRecord& a, const AccountRecord& b) {
    return a.account_id == b.account_id && a.snapshot_balance == b.snapshot_balance &&
           a.snapshot_date == b.snapshot_date;
  };
  auto same_txn = [](const TransactionRecord& a, const TransactionRecord& b) {
    return a.transaction_id == b.transaction_id && a.account_id == b.account_id && a.date == b.date &&
           a.amount == b.amount;
  };
  auto same_outcome = [](const LoanOutcome& a, const LoanOutcome& b) {
    return a.account_id == b.account_id && a.application_date == b.application_date &&
           a.performance == b.performance;
  };
  auto same_series = [](const DailyBalanceSeries& a, const DailyBalanceSeries& b) {
    return a.account_id == b.account_id && a.start_date == b.start_date && a.end_date == b.end_date &&
           a.balances == b.balances;
  };
  return std::equal(clients.begin(), clients.end(), o.clients.begin(), o.clients.end(), same_clients) &&
         std::equal(accounts.begin(), accounts.end(), o.accounts.begin(), o.accounts.end(), same_account) &&
         std::equal(transactions.begin(), transactions.end(), o.transactions.begin(), o.transactions.end(),
                    same_txn) &&
         std::equal(outcomes.begin(), outcomes.end(), o.outcomes.begin(), o.outcomes.end(), same_outcome) &&
         std::equal(balances.begin(), balances.end(), o.balances.begin(), o.balances.end(), same_series) &&
         account_index == o.account_index && account_transactions == o.account_transactions &&
         account_outcome == o.account_outcome;
}

LedgerBundle join_bundle(std::vector<ClientRecord> clients, std::vector<AccountRecord> accounts,
                         std::vector<TransactionRecord> transactions, std::vector<LoanOutcome> outcomes) {
  LedgerBundle b;
  b.clients = std::move(clients);
  b.accounts = std::move(accounts);
  b.transactions = std::move(transactions);
  b.outcomes = std::move(outcomes);

  for (std::size_t i = 0; i < b.accounts.size(); ++i) {
    if (!b.account_index.emplace(b.accounts[i].account_id, i).second) {
      throw DataError("duplicate account_id '" + b.accounts[i].account_id + "'");
    }
  }
  auto lookup = [&](const std::string& id, const std::string& what) {
    auto it = b.account_index.find(id);
    if (it == b.account_index.end()) throw DataError(what + " references unknown account_id '" + id + "'");
    return it->second;
  };

  std::unordered_set<std::string> client_ids;
  for (const auto& c : b.clients) {
    if (!client_ids.insert(c.client_id).second) throw DataError("duplicate client_id '" + c.client_id + "'");
    if (c.account_links.empty()) throw DataError("client '" + c.client_id + "' has no account link");
    for (const auto& a : c.account_links) lookup(a, "client '" + c.client_id + "'");
  }

  b.account_transactions.assign(b.accounts.size(), {});
  for (std::size_t i = 0; i < b.transactions.size(); ++i) {
    const auto& t = b.transactions[i];
    const auto row = lookup(t.account_id, "transaction '" + t.transaction_id + "'");
    if (t.date > b.accounts[row].snapshot_date) {
      throw DataError("transaction '" + t.transaction_id + "' dated " + t.date.iso() +
                      " after the balance snapshot of account '" + t.account_id + "'");
    }
    b.account_transactions[row].push_back(i);
  }
  for (auto& idx : b.account_transactions) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t x, std::size_t y) { return b.transactions[x].date < b.transactions[y].date; });
  }

  b.account_outcome.assign(b.accounts.size(), std::nullopt);
  for (std::size_t i = 0; i < b.outcomes.size(); ++i) {
    const auto& o = b.outcomes[i];
    const auto row = lookup(o.account_id, "loan outcome");
    if (b.account_outcome[row]) throw DataError("account '" + o.account_id + "' has more than one outcome");
    if (b.accounts[row].snapshot_date < o.application_date) {
      throw DataError("account '" + o.account_id + "' balance snapshot " + b.accounts[row].snapshot_date.iso() +
                      " precedes its application date " + o.application_date.iso());
    }
    b.account_outcome[row] = i;
  }

  b.balances.reserve(b.accounts.size());
  for (std::size_t a = 0; a < b.accounts.size(); ++a) {
    const auto& acc = b.accounts[a];
    Date start = acc.snapshot_date;
    if (!b.account_transactions[a].empty()) {
      start = std::min(start, b.transactions[b.account_transactions[a].front()].date);
    }
    if (b.account_outcome[a]) {
      start = std::min(start, b.outcomes[*b.account_outcome[a]].application_date - kHistoryDays);
    }
    b.balances.push_back(reconstruct_balances(acc, b.transactions_of(a), start));
  }
  return b;
}

LedgerBundle load_bundle(const std::filesystem::path& dir) {
  return join_bundle(load_clients(dir / "clients.csv"), load_accounts(dir / "accounts.csv"),
                     load_transactions(dir / "transactions.csv"), load_loans(dir / "loans.csv"));
}

SanityReport validate_bundle(const LedgerBundle& bundle) {
  SanityReport r;
  r.accounts = bundle.accounts.size();
  for (const auto& s : bundle.balances) {
    for (auto v : s.balances) {
      if (!r.min_balance || v < *r.min_balance) r.min_balance = v;
      if (!r.max_balance || v > *r.max_balance) r.max_balance = v;
    }
  }
  for (const auto& t : bundle.transactions) {
    if (!r.min_amount || t.amount < *r.min_amount) r.min_amount = t.amount;
    if (!r.max_amount || t.amount > *r.max_amount) r.max_amount = t.amount;
  }
  for (const auto& o : bundle.outcomes) (o.performance == 1 ? r.bad : r.good)++;
  r.labeled = r.good + r.bad;
  if (r.labeled > 0) {
    r.good_fraction = static_cast<double>(r.good) / static_cast<double>(r.labeled);
    r.bad_fraction = static_cast<double>(r.bad) / static_cast<double>(r.labeled);
  }
  if (r.labeled == 0) r.warnings.push_back("no labeled accounts");
  if (r.labeled > 0 && (r.good == 0 || r.bad == 0)) r.warnings.push_back("only one performance class present");
  if (r.labeled < r.accounts) {
    r.warnings.push_back(std::to_string(r.accounts - r.labeled) + " account(s) without a loan outcome");
  }
  std::size_t idle = 0;
  for (std::size_t a = 0; a < bundle.accounts.size(); ++a) {
    if (bundle.account_outcome[a] && bundle.account_transactions[a].empty()) ++idle;
  }
  if (idle > 0) r.warnings.push_back(std::to_string(idle) + " labeled account(s) without transactions");
  return r;
}

void write_bundle(const LedgerBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name, TableKind kind) {
    std::ofstream out(dir / name);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    const auto& cols = table_columns(kind);
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    return out;
  };
  {
    auto out = open("clients.csv", TableKind::clients);
    for (const auto& c : bundle.clients)
      for (const auto& a : c.account_links) out << c.client_id << ',' << a << '\n';
  }
  {
    auto out = open("accounts.csv", TableKind::accounts);
    for (const auto& a : bundle.accounts)
      out << a.account_id << ',' << a.snapshot_balance.str() << ',' << a.snapshot_date.iso() << '\n';
  }
  {
    auto out = open("transactions.csv", TableKind::transactions);
    for (const auto& t : bundle.transactions)
      out << t.transaction_id << ',' << t.account_id << ',' << t.date.iso() << ',' << t.amount.str() << '\n';
  }
  {
    auto out = open("loans.csv", TableKind::loans);
    for (const auto& o : bundle.outcomes)
      out << o.account_id << ',' << o.application_date.iso() << ',' << o.performance << '\n';
  }
}

}  // namespace creditx::ingest
