#pragma once

#include "chainfolio/synth.hpp"
#include "chainfolio/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace chainfolio {

/// Every tunable of the pipeline. Defaults follow the reference study; see
/// README for the file format.
struct PipelineConfig {
  std::filesystem::path events_path = "data/events.csv";
  std::filesystem::path prices_path = "data/prices.csv";
  std::filesystem::path tokens_path = "data/tokens.csv";
  std::filesystem::path blocks_path = "data/blocks.csv";
  std::filesystem::path oracle_path = "data/oracle.csv";  ///< empty disables oracle validation
  std::filesystem::path work_dir = "work";

  std::string start_month = "2022-01";
  int n_months = 24;

  // marketdata
  int lookback_days = 60;
  int min_obs = 45;
  double mean_shrink_lambda = 0.5;

  // frontier
  double w_max = 0.9;
  double rf_annual = 0.05;
  double solver_tol = 1e-8;
  int max_iter = 500;

  // metrics
  int forward_days = 20;
  std::vector<TokenId> market_tokens = {"WETH", "WBTC"};
  std::vector<double> distance_bin_edges = {1, 20, 40, 60, 80};
  double naive_eps = 0.001;

  // ingest
  int min_price_days = 15;
  double min_volume = 1.0;
  TokenId reference_token = "WETH";
  std::size_t validation_samples = 200;
  bool allow_rejected_records = false;

  // concentration
  double dust_threshold = 1.0;
  int min_holders = 100;

  // decay fit
  int size_min = 2;
  int size_max = 50;
  int size_bin_min_count = 30;

  unsigned workers = 1;
  std::uint64_t seed = 7;

  synth::SynthConfig synth;

  /// Throws InputError when a value is outside its documented range.
  void validate() const;

  /// Directory that the synth subcommand writes into (events_path's parent).
  std::filesystem::path data_dir() const { return events_path.parent_path(); }
};

/// Parses `key = value` lines; `#` starts a comment. Relative paths are
/// resolved against `base_dir`. Unknown keys are errors.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir, const std::string& source);

PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical text of every key and value, one per line.
std::string describe(const PipelineConfig& cfg);

}  // namespace chainfolio
