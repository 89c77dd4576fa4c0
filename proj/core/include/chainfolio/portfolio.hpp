#pragma once

#include "chainfolio/calendar.hpp"
#include "chainfolio/ingest.hpp"
#include "chainfolio/marketdata.hpp"
#include "chainfolio/types.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chainfolio::portfolio {

/// Monotone block-height <-> Unix-time mapping.
class BlockClock {
 public:
  BlockClock() = default;
  /// `points` are (block, unix seconds). Both coordinates must be
  /// non-decreasing once sorted by block; violations throw InputError.
  explicit BlockClock(std::vector<std::pair<BlockHeight, std::int64_t>> points);

  /// Largest block whose timestamp is at or before `unix_seconds`.
  /// Throws InputError when the instant precedes the first block.
  BlockHeight block_at(std::int64_t unix_seconds) const;

  std::int64_t time_of(BlockHeight block) const;

  bool empty() const { return points_.empty(); }
  const std::vector<std::pair<BlockHeight, std::int64_t>>& points() const { return points_; }

  static BlockClock read_csv(std::istream& in, const std::string& source = "blocks");
  void write_csv(std::ostream& out) const;

 private:
  std::vector<std::pair<BlockHeight, std::int64_t>> points_;
};

struct Snapshot {
  Date date{};
  BlockHeight block = 0;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

/// Snapshot at 00:00 UTC of `date`.
Snapshot make_snapshot(const BlockClock& clock, Date date);

struct Position {
  TokenId token_id;
  Amount raw_balance;
  double quantity = 0.0;  ///< token units
  double value_usd = 0.0;
};

struct Portfolio {
  AccountId account;
  Snapshot snapshot;
  std::vector<Position> positions;  ///< sorted by token id, value > 0
  double total_value = 0.0;
  std::vector<double> weights;           ///< aligned with positions
  std::vector<TokenId> unpriced_tokens;  ///< held but without a price on the date

  int size() const { return static_cast<int>(positions.size()); }
  bool empty() const { return positions.empty(); }
  std::vector<TokenId> token_ids() const;
  Eigen::VectorXd weight_vector() const;
};

using LedgerMap = std::map<TokenId, ingest::TokenLedger>;
using PriceMap = std::map<TokenId, marketdata::PriceSeries>;

/// Values an account's balances at the snapshot block with the snapshot-date
/// closes. An account without positions comes back empty().
Portfolio reconstruct_snapshot(const LedgerMap& ledgers, const PriceMap& prices, const AccountId& account,
                               const Snapshot& snapshot);

/// Every account holding a positive balance of any token at the snapshot,
/// ordered by account. Accounts whose holdings are all unpriced are returned
/// empty() with their unpriced tokens listed.
std::vector<Portfolio> reconstruct_all(const LedgerMap& ledgers, const PriceMap& prices, const Snapshot& snapshot);

/// Drops positions outside `keep` and renormalises the remaining weights.
Portfolio restrict_to(const Portfolio& p, const std::vector<TokenId>& keep);

struct Moments {
  double mu = 0.0;
  double sigma = 0.0;
};

Moments portfolio_moments(const Eigen::VectorXd& w, const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov);

/// Looks up each held token in `m`; every one must be an eligible asset.
Moments portfolio_moments(const Portfolio& p, const marketdata::MomentEstimates& m);

double portfolio_beta(const Portfolio& p, const std::map<TokenId, double>& betas);

enum class WealthBin { UpTo1, UpTo100, UpTo1K, UpTo10K, UpTo100K, Above100K };

inline constexpr WealthBin kAllWealthBins[] = {WealthBin::UpTo1,   WealthBin::UpTo100,  WealthBin::UpTo1K,
                                               WealthBin::UpTo10K, WealthBin::UpTo100K, WealthBin::Above100K};

/// Right-closed USD bins: (0,1], (1,100], (100,1K], (1K,10K], (10K,100K], (100K,inf).
WealthBin assign_wealth_bin(double total_value_usd);

std::string_view to_string(WealthBin bin);

/// Snapshot table rows (one per position).
void write_snapshot_csv(std::ostream& out, const std::vector<Portfolio>& portfolios);
std::vector<Portfolio> read_snapshot_csv(std::istream& in, const std::string& source = "snapshot");

}  // namespace chainfolio::portfolio
