#pragma once

#include "chainfolio/calendar.hpp"
#include "chainfolio/ingest.hpp"
#include "chainfolio/marketdata.hpp"
#include "chainfolio/portfolio.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace chainfolio::synth {

struct SynthConfig {
  int n_tokens = 50;  ///< priced tokens, including WETH and WBTC
  int n_accounts = 500;
  int n_months = 24;  ///< monthly snapshots covered by the generated history
  std::uint64_t seed = 7;
  Date first_snapshot = Date{std::chrono::year{2022} / 1 / 1};
  int warmup_days = 75;  ///< price history before the first snapshot
  int tail_days = 40;    ///< price history after the last snapshot

  // Daily log-returns: drift + vol * (sqrt(rho) * market + sqrt(1 - rho) * own).
  double drift_min = -0.001;
  double drift_max = 0.002;
  double vol_min = 0.02;
  double vol_max = 0.08;
  double market_correlation = 0.4;

  double late_listing_fraction = 0.15;
  double gap_probability = 0.02;  ///< chance that a day's price row is missing
  int n_junk_tokens = 4;          ///< tokens built to fail each market filter

  double transfers_per_account_month = 0.6;
  double full_exit_probability = 0.1;
  double burn_probability = 0.02;
  double wrap_events_per_account_month = 0.1;

  double median_wealth_usd = 2500.0;
  double wealth_log_sd = 2.2;

  int blocks_per_day = 24;
  BlockHeight genesis_block = 1'000'000;
};

struct SynthMarket {
  std::vector<ingest::TokenInfo> tokens;
  std::vector<ingest::TransferEvent> events;  ///< ordered by (block, log_index)
  std::map<TokenId, std::vector<marketdata::MarketRow>> prices;
  portfolio::BlockClock clock;
  ingest::CheckpointOracle oracle;  ///< balance after every generated event
  std::map<TokenId, double> drift;  ///< generating parameters per priced token
  std::map<TokenId, double> vol;
  std::vector<TokenId> wrapped_tokens;  ///< tokens whose mints/burns are deposits/withdrawals
  Date first_day{};
  Date last_day{};
};

/// Deterministic for a given config: prices follow correlated geometric
/// Brownian motion, transfers never overdraw the sender, and the oracle is the
/// exact running balance of every touched (token, account).
SynthMarket generate_market(const SynthConfig& cfg);

/// Writes events.csv, prices.csv, tokens.csv, blocks.csv and oracle.csv.
void write_market(const SynthMarket& market, const std::filesystem::path& dir);

}  // namespace chainfolio::synth
