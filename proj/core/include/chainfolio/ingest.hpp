#pragma once

#include "chainfolio/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chainfolio::ingest {

/// One token movement. Mints have the zero account as sender, burns as
/// recipient.
struct TransferEvent {
  TokenId token_id;
  BlockHeight block = 0;
  std::int64_t log_index = 0;
  AccountId sender;
  AccountId recipient;
  Amount amount;

  bool is_mint() const { return is_zero_account(sender); }
  bool is_burn() const { return is_zero_account(recipient); }
  friend bool operator==(const TransferEvent&, const TransferEvent&) = default;
};

enum class EventKind { Transfer, Deposit, Withdrawal };

std::optional<EventKind> parse_event_kind(std::string_view text);

/// A record rejected by parse_events, with its 1-based position in the source.
struct RecordError {
  std::size_t position = 0;
  std::string message;
};

struct ParseResult {
  std::vector<TransferEvent> events;
  std::vector<RecordError> rejected;
};

/// Reads the event table (columns token_id, block, log_index, event_kind,
/// from, to, amount). Wrapped-asset deposits become mints to the depositor
/// (`to` column) and withdrawals become burns from the withdrawer (`from`
/// column). Input order is preserved. Bad rows land in `rejected`; a missing
/// header or required column throws InputError.
ParseResult parse_events(std::istream& in, const std::string& source = "events");

struct LedgerEntry {
  AccountId account;
  BlockHeight block = 0;
  std::int64_t log_index = 0;
  Amount delta;  ///< negative = debit, positive = credit

  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

/// Per-token signed ledger. Immutable once built; balance queries are
/// O(log k) in the number of entries touching the account.
class TokenLedger {
 public:
  TokenLedger() = default;

  /// Validates (block, log_index) ordering (non-decreasing, one event may emit
  /// a debit and a credit at the same key) and builds the per-account index.
  static TokenLedger from_entries(TokenId token_id, int decimals, std::vector<LedgerEntry> entries);

  const TokenId& token_id() const { return token_id_; }
  int decimals() const { return decimals_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }

  /// Sorted list of every account with at least one entry.
  const std::vector<AccountId>& accounts() const { return accounts_; }

  /// Balance after applying every entry with entry.block <= block.
  Amount balance_at(std::string_view account, BlockHeight block) const;

  /// All non-zero balances at `block`, keyed by account.
  std::map<AccountId, Amount> balances_at(BlockHeight block) const;

  /// Total minted minus total burned through `block`.
  Amount supply_at(BlockHeight block) const;

  std::optional<BlockHeight> first_block() const;
  std::optional<BlockHeight> last_block() const;

  /// First (account, block) whose running balance dips below zero, if any.
  std::optional<std::pair<AccountId, BlockHeight>> first_negative_balance() const;

 private:
  struct Checkpoint {
    BlockHeight block;
    Amount balance;
  };

  TokenId token_id_;
  int decimals_ = 0;
  std::vector<LedgerEntry> entries_;
  std::vector<AccountId> accounts_;
  std::unordered_map<AccountId, std::vector<Checkpoint>> history_;
  std::vector<Checkpoint> supply_;
  std::optional<std::pair<AccountId, BlockHeight>> first_negative_;
};

/// Turns a sorted single-token event stream into signed entries: a debit and
/// a credit per transfer, credit only for mints, debit only for burns.
/// Throws OrderingError on unsorted or duplicate keys, InputError on mixed
/// token ids.
TokenLedger build_ledger(const std::vector<TransferEvent>& events, int decimals);

/// Free-function form of TokenLedger::balance_at. Unknown accounts hold 0.
Amount balance_at(const TokenLedger& ledger, std::string_view account, BlockHeight block);

void write_ledger_csv(std::ostream& out, const TokenLedger& ledger);
TokenLedger read_ledger_csv(std::istream& in, const TokenId& token_id, int decimals,
                            const std::string& source = "ledger");

// ---------------------------------------------------------------- filtering

enum class RejectStage { NonCompliant, InsufficientPricing, NegligibleVolume, InvalidSupply, InconsistentBalance };

std::string_view to_string(RejectStage stage);

struct TokenMeta {
  TokenId token_id;
  int price_history_days = 0;
  double total_volume = 0.0;
  double market_cap = 0.0;
  double fdv = 0.0;
  bool erc20_compliant = true;
  double reference_mcap = 0.0;  ///< chain-native asset's market cap
};

struct FilterReport {
  TokenId token_id;
  std::optional<RejectStage> rejected_stage;

  bool passed() const { return !rejected_stage.has_value(); }
};

inline constexpr int kDefaultMinPriceDays = 15;
inline constexpr double kDefaultMinVolume = 1.0;

/// Static per-token attributes supplied alongside the event stream.
struct TokenInfo {
  TokenId token_id;
  int decimals = 18;
  bool erc20_compliant = true;
  double fdv_usd = 0.0;
};

/// Columns token_id, decimals, erc20_compliant (0/1), fdv_usd.
std::vector<TokenInfo> read_token_table(std::istream& in, const std::string& source = "tokens");
void write_token_table(std::ostream& out, const std::vector<TokenInfo>& tokens);

/// Writes events in the format parse_events reads. Mints and burns of tokens
/// listed in `wrapped` are written as deposit / withdrawal records.
void write_events_csv(std::ostream& out, const std::vector<TransferEvent>& events,
                      const std::vector<TokenId>& wrapped = {});

/// Applies the market-activity filters in order and reports the first failure.
FilterReport filter_tokens(const TokenMeta& meta, int min_price_days = kDefaultMinPriceDays,
                           double min_volume = kDefaultMinVolume);

/// Ground-truth balance source for reconstruction checks.
class BalanceOracle {
 public:
  virtual ~BalanceOracle() = default;
  /// nullopt when the oracle cannot answer (unknown token, lookup failure).
  virtual std::optional<Amount> balance(const TokenId& token, const AccountId& account, BlockHeight block) const = 0;
};

/// Oracle backed by balance checkpoints: the balance of (token, account) at a
/// block is the last checkpoint at or before it. This is what the synthetic
/// generator records and what `oracle.csv` files contain.
class CheckpointOracle final : public BalanceOracle {
 public:
  void record(const TokenId& token, const AccountId& account, BlockHeight block, Amount balance);
  std::optional<Amount> balance(const TokenId& token, const AccountId& account, BlockHeight block) const override;

  bool knows_token(const TokenId& token) const { return tokens_.count(token) > 0; }

  void write_csv(std::ostream& out) const;
  static CheckpointOracle read_csv(std::istream& in, const std::string& source = "oracle");

 private:
  struct Point {
    BlockHeight block;
    Amount balance;
  };
  std::map<TokenId, std::map<AccountId, std::vector<Point>>> tokens_;
};

/// Compares the ledger against `oracle` at `samples` (account, block) pairs
/// drawn uniformly with `seed`. Any mismatch rejects the token as
/// InconsistentBalance. Throws ValidationError when the oracle cannot answer.
FilterReport validate_reconstruction(const TokenLedger& ledger, const BalanceOracle& oracle, std::size_t samples,
                                     std::uint64_t seed);

}  // namespace chainfolio::ingest
