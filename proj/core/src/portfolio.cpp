#include "chainfolio/portfolio.hpp"

#include "chainfolio/csv.hpp"
#include "chainfolio/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

namespace chainfolio::portfolio {

BlockClock::BlockClock(std::vector<std::pair<BlockHeight, std::int64_t>> points) : points_(std::move(points)) {
  std::sort(points_.begin(), points_.end());
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (points_[i].first == points_[i - 1].first) {
      throw InputError(fmt::format("block clock: duplicate block {}", points_[i].first));
    }
    if (points_[i].second < points_[i - 1].second) {
      throw InputError(fmt::format("block clock: timestamps decrease at block {}", points_[i].first));
    }
  }
}

BlockHeight BlockClock::block_at(std::int64_t unix_seconds) const {
  auto it = std::upper_bound(points_.begin(), points_.end(), unix_seconds,
                             [](std::int64_t t, const auto& p) { return t < p.second; });
  if (it == points_.begin()) throw InputError(fmt::format("block clock: no block at or before t={}", unix_seconds));
  return std::prev(it)->first;
}

std::int64_t BlockClock::time_of(BlockHeight block) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), block,
                             [](const auto& p, BlockHeight b) { return p.first < b; });
  if (it == points_.end() || it->first != block) throw InputError(fmt::format("block clock: unknown block {}", block));
  return it->second;
}

BlockClock BlockClock::read_csv(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source, {"block", "timestamp"});
  std::vector<std::pair<BlockHeight, std::int64_t>> points;
  while (reader.next()) points.emplace_back(reader.integer("block"), reader.integer("timestamp"));
  return BlockClock(std::move(points));
}

void BlockClock::write_csv(std::ostream& out) const {
  out << "block,timestamp\n";
  for (const auto& [b, t] : points_) out << b << ',' << t << '\n';
}

Snapshot make_snapshot(const BlockClock& clock, Date date) { return Snapshot{date, clock.block_at(to_unix(date))}; }

std::vector<TokenId> Portfolio::token_ids() const {
  std::vector<TokenId> ids;
  ids.reserve(positions.size());
  for (const auto& p : positions) ids.push_back(p.token_id);
  return ids;
}

Eigen::VectorXd Portfolio::weight_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
}

namespace {

void normalise(Portfolio& p) {
  std::sort(p.positions.begin(), p.positions.end(),
            [](const Position& a, const Position& b) { return a.token_id < b.token_id; });
  p.total_value = 0.0;
  for (const auto& pos : p.positions) p.total_value += pos.value_usd;
  p.weights.assign(p.positions.size(), 0.0);
  if (p.total_value > 0.0) {
    for (std::size_t i = 0; i < p.positions.size(); ++i) p.weights[i] = p.positions[i].value_usd / p.total_value;
  }
}

void add_holding(Portfolio& p, const ingest::TokenLedger& ledger, const PriceMap& prices, Amount balance) {
  if (balance <= 0) return;
  const auto price_it = prices.find(ledger.token_id());
  const std::optional<double> close =
      price_it == prices.end() ? std::nullopt : price_it->second.close_on(p.snapshot.date);
  if (!close) {
    p.unpriced_tokens.push_back(ledger.token_id());
    return;
  }
  Position pos;
  pos.token_id = ledger.token_id();
  pos.quantity = to_units(balance, ledger.decimals());
  pos.value_usd = pos.quantity * *close;
  pos.raw_balance = std::move(balance);
  if (pos.value_usd > 0.0) p.positions.push_back(std::move(pos));
}

}  // namespace

Portfolio reconstruct_snapshot(const LedgerMap& ledgers, const PriceMap& prices, const AccountId& account,
                               const Snapshot& snapshot) {
  Portfolio p;
  p.account = account;
  p.snapshot = snapshot;
  for (const auto& [token, ledger] : ledgers) add_holding(p, ledger, prices, ledger.balance_at(account, snapshot.block));
  normalise(p);
  return p;
}

std::vector<Portfolio> reconstruct_all(const LedgerMap& ledgers, const PriceMap& prices, const Snapshot& snapshot) {
  std::map<AccountId, Portfolio> by_account;
  for (const auto& [token, ledger] : ledgers) {
    for (auto& [account, balance] : ledger.balances_at(snapshot.block)) {
      if (is_zero_account(account)) continue;
      auto [it, inserted] = by_account.try_emplace(account);
      if (inserted) {
        it->second.account = account;
        it->second.snapshot = snapshot;
      }
      add_holding(it->second, ledger, prices, balance);
    }
  }
  std::vector<Portfolio> out;
  out.reserve(by_account.size());
  for (auto& [account, p] : by_account) {
    normalise(p);
    out.push_back(std::move(p));
  }
  return out;
}

Portfolio restrict_to(const Portfolio& p, const std::vector<TokenId>& keep) {
  const std::set<TokenId> allowed(keep.begin(), keep.end());
  Portfolio out;
  out.account = p.account;
  out.snapshot = p.snapshot;
  out.unpriced_tokens = p.unpriced_tokens;
  for (const auto& pos : p.positions) {
    if (allowed.count(pos.token_id)) out.positions.push_back(pos);
  }
  normalise(out);
  return out;
}

Moments portfolio_moments(const Eigen::VectorXd& w, const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
  if (w.size() != mu.size() || cov.rows() != w.size() || cov.cols() != w.size()) {
    throw InputError(fmt::format("portfolio_moments: dimension mismatch ({} weights, {} means, {}x{} covariance)",
                                 w.size(), mu.size(), cov.rows(), cov.cols()));
  }
  const double var = w.dot(cov * w);
  return Moments{w.dot(mu), std::sqrt(std::max(var, 0.0))};
}

Moments portfolio_moments(const Portfolio& p, const marketdata::MomentEstimates& m) {
  const auto n = static_cast<Eigen::Index>(p.positions.size());
  std::vector<Eigen::Index> idx;
  for (const auto& pos : p.positions) {
    const auto i = m.index_of(pos.token_id);
    if (!i || !m.eligible[*i]) {
      throw InputError(fmt::format("portfolio_moments: {} has no eligible estimate", pos.token_id));
    }
    idx.push_back(static_cast<Eigen::Index>(*i));
  }
  Eigen::VectorXd mu(n);
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    mu(a) = m.shrunk_means(idx[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < n; ++b) {
      cov(a, b) = m.shrunk_cov(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
  }
  return portfolio_moments(p.weight_vector(), mu, cov);
}

double portfolio_beta(const Portfolio& p, const std::map<TokenId, double>& betas) {
  double beta = 0.0;
  for (std::size_t i = 0; i < p.positions.size(); ++i) {
    const auto it = betas.find(p.positions[i].token_id);
    if (it == betas.end()) throw InputError(fmt::format("portfolio_beta: no beta for {}", p.positions[i].token_id));
    beta += p.weights[i] * it->second;
  }
  return beta;
}

WealthBin assign_wealth_bin(double v) {
  if (!(v > 0.0)) throw InputError("assign_wealth_bin: value must be positive");
  if (v <= 1.0) return WealthBin::UpTo1;
  if (v <= 100.0) return WealthBin::UpTo100;
  if (v <= 1e3) return WealthBin::UpTo1K;
  if (v <= 1e4) return WealthBin::UpTo10K;
  if (v <= 1e5) return WealthBin::UpTo100K;
  return WealthBin::Above100K;
}

std::string_view to_string(WealthBin bin) {
  switch (bin) {
    case WealthBin::UpTo1: return "(0,1]";
    case WealthBin::UpTo100: return "(1,100]";
    case WealthBin::UpTo1K: return "(100,1K]";
    case WealthBin::UpTo10K: return "(1K,10K]";
    case WealthBin::UpTo100K: return "(10K,100K]";
    case WealthBin::Above100K: return "(100K,inf)";
  }
  return "?";
}

void write_snapshot_csv(std::ostream& out, const std::vector<Portfolio>& portfolios) {
  out << "snapshot_date,account,token_id,quantity,value_usd,weight,total_value_usd,n_tokens\n";
  for (const auto& p : portfolios) {
    for (std::size_t i = 0; i < p.positions.size(); ++i) {
      const auto& pos = p.positions[i];
      out << format_date(p.snapshot.date) << ',' << p.account << ',' << pos.token_id << ','
          << csv::format_number(pos.quantity) << ',' << csv::format_number(pos.value_usd) << ','
          << csv::format_number(p.weights[i]) << ',' << csv::format_number(p.total_value) << ',' << p.size() << '\n';
    }
  }
}

std::vector<Portfolio> read_snapshot_csv(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source,
                     {"snapshot_date", "account", "token_id", "quantity", "value_usd", "weight", "total_value_usd"});
  std::vector<Portfolio> out;
  while (reader.next()) {
    const Date date = parse_date(reader.field("snapshot_date"));
    const AccountId account(reader.field("account"));
    if (out.empty() || out.back().account != account || out.back().snapshot.date != date) {
      Portfolio p;
      p.account = account;
      p.snapshot.date = date;
      out.push_back(std::move(p));
    }
    Position pos;
    pos.token_id = TokenId(reader.field("token_id"));
    pos.quantity = reader.number("quantity");
    pos.value_usd = reader.number("value_usd");
    out.back().positions.push_back(std::move(pos));
  }
  for (auto& p : out) normalise(p);
  return out;
}

}  // namespace chainfolio::portfolio
