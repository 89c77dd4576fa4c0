#include "chainfolio/ingest.hpp"

#include "chainfolio/csv.hpp"
#include "chainfolio/error.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <tuple>

#include <fmt/format.h>

namespace chainfolio::ingest {

std::optional<EventKind> parse_event_kind(std::string_view text) {
  if (text == "transfer") return EventKind::Transfer;
  if (text == "deposit") return EventKind::Deposit;
  if (text == "withdrawal") return EventKind::Withdrawal;
  return std::nullopt;
}

namespace {

std::int64_t parse_non_negative(std::string_view text, std::string_view what) {
  const Amount value = parse_amount(text);
  if (value < 0) throw InputError(fmt::format("negative {} '{}'", what, text));
  if (value > std::numeric_limits<std::int64_t>::max()) throw InputError(fmt::format("{} out of range", what));
  return value.convert_to<std::int64_t>();
}

TransferEvent parse_record(const csv::Reader& row) {
  TransferEvent ev;
  ev.token_id = std::string(row.field("token_id"));
  if (ev.token_id.empty()) throw InputError("empty token_id");
  ev.block = parse_non_negative(row.field("block"), "block");
  ev.log_index = parse_non_negative(row.field("log_index"), "log_index");

  ev.amount = parse_amount(row.field("amount"));
  if (ev.amount < 0) throw InputError(fmt::format("negative amount '{}'", row.field("amount")));

  const auto kind = parse_event_kind(row.field("event_kind"));
  if (!kind) throw InputError(fmt::format("unknown event_kind '{}'", row.field("event_kind")));

  const std::string_view from = row.field("from");
  const std::string_view to = row.field("to");
  switch (*kind) {
    case EventKind::Transfer:
      if (from.empty() || to.empty()) throw InputError("transfer requires both 'from' and 'to'");
      ev.sender = std::string(from);
      ev.recipient = std::string(to);
      break;
    case EventKind::Deposit: {
      const std::string_view account = to.empty() ? from : to;
      if (account.empty()) throw InputError("deposit requires an account");
      ev.sender = std::string(kZeroAccount);
      ev.recipient = std::string(account);
      break;
    }
    case EventKind::Withdrawal: {
      const std::string_view account = from.empty() ? to : from;
      if (account.empty()) throw InputError("withdrawal requires an account");
      ev.sender = std::string(account);
      ev.recipient = std::string(kZeroAccount);
      break;
    }
  }
  return ev;
}

}  // namespace

ParseResult parse_events(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source, {"token_id", "block", "log_index", "event_kind", "from", "to", "amount"});
  ParseResult result;
  while (true) {
    try {
      if (!reader.next()) break;
    } catch (const InputError& e) {
      result.rejected.push_back({reader.line(), e.what()});
      continue;
    }
    try {
      result.events.push_back(parse_record(reader));
    } catch (const InputError& e) {
      result.rejected.push_back({reader.line(), e.what()});
    }
  }
  return result;
}

// ---------------------------------------------------------------- ledger

TokenLedger TokenLedger::from_entries(TokenId token_id, int decimals, std::vector<LedgerEntry> entries) {
  if (decimals < 0) throw InputError(fmt::format("token {}: negative decimals", token_id));
  TokenLedger ledger;
  ledger.token_id_ = std::move(token_id);
  ledger.decimals_ = decimals;

  std::unordered_map<AccountId, Amount> running;
  Amount supply = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (i > 0) {
      const auto& p = entries[i - 1];
      if (std::tie(e.block, e.log_index) < std::tie(p.block, p.log_index)) {
        throw OrderingError(fmt::format("token {}: entry {} at ({}, {}) precedes ({}, {})", ledger.token_id_, i,
                                        e.block, e.log_index, p.block, p.log_index));
      }
    }
    Amount& bal = running[e.account];
    bal += e.delta;
    if (bal < 0 && !ledger.first_negative_) ledger.first_negative_ = std::make_pair(e.account, e.block);

    auto& hist = ledger.history_[e.account];
    if (!hist.empty() && hist.back().block == e.block) {
      hist.back().balance = bal;
    } else {
      hist.push_back({e.block, bal});
    }

    supply += e.delta;
    if (!ledger.supply_.empty() && ledger.supply_.back().block == e.block) {
      ledger.supply_.back().balance = supply;
    } else {
      ledger.supply_.push_back({e.block, supply});
    }
  }
  ledger.accounts_.reserve(ledger.history_.size());
  for (const auto& [account, _] : ledger.history_) ledger.accounts_.push_back(account);
  std::sort(ledger.accounts_.begin(), ledger.accounts_.end());
  ledger.entries_ = std::move(entries);
  return ledger;
}

namespace {

template <typename Points>
Amount lookup(const Points& points, BlockHeight block) {
  auto it = std::upper_bound(points.begin(), points.end(), block,
                             [](BlockHeight b, const auto& p) { return b < p.block; });
  if (it == points.begin()) return Amount{0};
  return std::prev(it)->balance;
}

}  // namespace

Amount TokenLedger::balance_at(std::string_view account, BlockHeight block) const {
  auto it = history_.find(AccountId(account));
  if (it == history_.end()) return Amount{0};
  return lookup(it->second, block);
}

std::map<AccountId, Amount> TokenLedger::balances_at(BlockHeight block) const {
  std::map<AccountId, Amount> out;
  for (const auto& account : accounts_) {
    Amount bal = lookup(history_.at(account), block);
    if (bal != 0) out.emplace(account, std::move(bal));
  }
  return out;
}

Amount TokenLedger::supply_at(BlockHeight block) const { return lookup(supply_, block); }

std::optional<BlockHeight> TokenLedger::first_block() const {
  if (entries_.empty()) return std::nullopt;
  return entries_.front().block;
}

std::optional<BlockHeight> TokenLedger::last_block() const {
  if (entries_.empty()) return std::nullopt;
  return entries_.back().block;
}

std::optional<std::pair<AccountId, BlockHeight>> TokenLedger::first_negative_balance() const {
  return first_negative_;
}

TokenLedger build_ledger(const std::vector<TransferEvent>& events, int decimals) {
  if (events.empty()) return TokenLedger::from_entries({}, decimals, {});
  const TokenId& token = events.front().token_id;
  std::vector<LedgerEntry> entries;
  entries.reserve(2 * events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    if (ev.token_id != token) {
      throw InputError(fmt::format("build_ledger: mixed token ids '{}' and '{}'", token, ev.token_id));
    }
    if (i > 0) {
      const auto& prev = events[i - 1];
      if (std::tie(ev.block, ev.log_index) <= std::tie(prev.block, prev.log_index)) {
        throw OrderingError(fmt::format("token {}: event ({}, {}) does not follow ({}, {})", token, ev.block,
                                        ev.log_index, prev.block, prev.log_index));
      }
    }
    if (!ev.is_mint()) entries.push_back({ev.sender, ev.block, ev.log_index, Amount{-ev.amount}});
    if (!ev.is_burn()) entries.push_back({ev.recipient, ev.block, ev.log_index, ev.amount});
  }
  return TokenLedger::from_entries(token, decimals, std::move(entries));
}

Amount balance_at(const TokenLedger& ledger, std::string_view account, BlockHeight block) {
  return ledger.balance_at(account, block);
}

void write_ledger_csv(std::ostream& out, const TokenLedger& ledger) {
  out << "token_id,account,block,log_index,delta\n";
  for (const auto& e : ledger.entries()) {
    out << ledger.token_id() << ',' << e.account << ',' << e.block << ',' << e.log_index << ',' << e.delta.str()
        << '\n';
  }
}

TokenLedger read_ledger_csv(std::istream& in, const TokenId& token_id, int decimals, const std::string& source) {
  csv::Reader reader(in, source, {"token_id", "account", "block", "log_index", "delta"});
  std::vector<LedgerEntry> entries;
  while (reader.next()) {
    if (reader.field("token_id") != token_id) {
      throw InputError(fmt::format("{}:{}: token '{}' in ledger of '{}'", source, reader.line(),
                                   reader.field("token_id"), token_id));
    }
    entries.push_back({std::string(reader.field("account")), reader.integer("block"), reader.integer("log_index"),
                       parse_amount(reader.field("delta"))});
  }
  return TokenLedger::from_entries(token_id, decimals, std::move(entries));
}

// ---------------------------------------------------------------- filters

std::string_view to_string(RejectStage stage) {
  switch (stage) {
    case RejectStage::NonCompliant: return "non_compliant";
    case RejectStage::InsufficientPricing: return "insufficient_pricing";
    case RejectStage::NegligibleVolume: return "negligible_volume";
    case RejectStage::InvalidSupply: return "invalid_supply";
    case RejectStage::InconsistentBalance: return "inconsistent_balance";
  }
  return "unknown";
}

FilterReport filter_tokens(const TokenMeta& meta, int min_price_days, double min_volume) {
  FilterReport report{meta.token_id, std::nullopt};
  if (!meta.erc20_compliant) {
    report.rejected_stage = RejectStage::NonCompliant;
  } else if (meta.price_history_days < min_price_days) {
    report.rejected_stage = RejectStage::InsufficientPricing;
  } else if (!(meta.total_volume >= min_volume)) {
    report.rejected_stage = RejectStage::NegligibleVolume;
  } else if (meta.market_cap > meta.reference_mcap || meta.fdv > meta.reference_mcap) {
    report.rejected_stage = RejectStage::InvalidSupply;
  }
  return report;
}

std::vector<TokenInfo> read_token_table(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source, {"token_id", "decimals", "erc20_compliant", "fdv_usd"});
  std::vector<TokenInfo> out;
  while (reader.next()) {
    TokenInfo t;
    t.token_id = TokenId(reader.field("token_id"));
    t.decimals = static_cast<int>(reader.integer("decimals"));
    if (t.decimals < 0 || t.decimals > 77) throw InputError(fmt::format("{}:{}: bad decimals", source, reader.line()));
    const auto flag = reader.field("erc20_compliant");
    if (flag != "0" && flag != "1") {
      throw InputError(fmt::format("{}:{}: erc20_compliant must be 0 or 1", source, reader.line()));
    }
    t.erc20_compliant = flag == "1";
    t.fdv_usd = reader.field("fdv_usd").empty() ? 0.0 : reader.number("fdv_usd");
    out.push_back(std::move(t));
  }
  return out;
}

void write_token_table(std::ostream& out, const std::vector<TokenInfo>& tokens) {
  out << "token_id,decimals,erc20_compliant,fdv_usd\n";
  for (const auto& t : tokens) {
    out << t.token_id << ',' << t.decimals << ',' << (t.erc20_compliant ? 1 : 0) << ','
        << csv::format_number(t.fdv_usd) << '\n';
  }
}

void write_events_csv(std::ostream& out, const std::vector<TransferEvent>& events, const std::vector<TokenId>& wrapped) {
  out << "token_id,block,log_index,event_kind,from,to,amount\n";
  for (const auto& ev : events) {
    const bool is_wrapped = std::find(wrapped.begin(), wrapped.end(), ev.token_id) != wrapped.end();
    out << ev.token_id << ',' << ev.block << ',' << ev.log_index << ',';
    if (is_wrapped && ev.is_mint()) {
      out << "deposit,," << ev.recipient;
    } else if (is_wrapped && ev.is_burn()) {
      out << "withdrawal," << ev.sender << ',';
    } else {
      out << "transfer," << ev.sender << ',' << ev.recipient;
    }
    out << ',' << ev.amount.str() << '\n';
  }
}

// ---------------------------------------------------------------- oracle

void CheckpointOracle::record(const TokenId& token, const AccountId& account, BlockHeight block, Amount balance) {
  auto& points = tokens_[token][account];
  if (!points.empty() && points.back().block == block) {
    points.back().balance = std::move(balance);
    return;
  }
  if (!points.empty() && points.back().block > block) {
    throw OrderingError(fmt::format("oracle: checkpoint for {}/{} at block {} after block {}", token, account, block,
                                    points.back().block));
  }
  points.push_back({block, std::move(balance)});
}

std::optional<Amount> CheckpointOracle::balance(const TokenId& token, const AccountId& account,
                                                BlockHeight block) const {
  auto t = tokens_.find(token);
  if (t == tokens_.end()) return std::nullopt;
  auto a = t->second.find(account);
  if (a == t->second.end()) return Amount{0};
  return lookup(a->second, block);
}

void CheckpointOracle::write_csv(std::ostream& out) const {
  out << "token_id,account,block,balance\n";
  for (const auto& [token, accounts] : tokens_) {
    for (const auto& [account, points] : accounts) {
      for (const auto& p : points) out << token << ',' << account << ',' << p.block << ',' << p.balance.str() << '\n';
    }
  }
}

CheckpointOracle CheckpointOracle::read_csv(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source, {"token_id", "account", "block", "balance"});
  CheckpointOracle oracle;
  while (reader.next()) {
    oracle.record(std::string(reader.field("token_id")), std::string(reader.field("account")),
                  reader.integer("block"), parse_amount(reader.field("balance")));
  }
  return oracle;
}

FilterReport validate_reconstruction(const TokenLedger& ledger, const BalanceOracle& oracle, std::size_t samples,
                                     std::uint64_t seed) {
  FilterReport report{ledger.token_id(), std::nullopt};
  if (samples == 0 || ledger.entries().empty()) return report;

  const auto& accounts = ledger.accounts();
  const BlockHeight lo = *ledger.first_block();
  const BlockHeight hi = *ledger.last_block();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_account(0, accounts.size() - 1);
  std::uniform_int_distribution<BlockHeight> pick_block(lo, hi);

  for (std::size_t s = 0; s < samples; ++s) {
    const AccountId& account = accounts[pick_account(rng)];
    const BlockHeight block = pick_block(rng);
    const auto expected = oracle.balance(ledger.token_id(), account, block);
    if (!expected) {
      throw ValidationError(
          fmt::format("oracle has no balance for token {} account {} block {}", ledger.token_id(), account, block));
    }
    if (*expected != ledger.balance_at(account, block)) {
      report.rejected_stage = RejectStage::InconsistentBalance;
      return report;
    }
  }
  return report;
}

}  // namespace chainfolio::ingest
