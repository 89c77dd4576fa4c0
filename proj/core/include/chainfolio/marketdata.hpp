#pragma once

#include "chainfolio/calendar.hpp"
#include "chainfolio/types.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chainfolio::marketdata {

/// Daily USD closes on a contiguous calendar starting at `start`. Missing days
/// are explicit gaps (nullopt).
class PriceSeries {
 public:
  PriceSeries() = default;
  PriceSeries(TokenId token_id, Date start, std::vector<std::optional<double>> closes);

  /// Builds a series from (date, close) observations with strictly increasing
  /// dates and positive closes; days in between become gaps.
  static PriceSeries from_observations(TokenId token_id, std::span<const std::pair<Date, double>> observations);

  const TokenId& token_id() const { return token_id_; }
  Date start() const { return start_; }
  /// One past the last covered day.
  Date end() const { return start_ + std::chrono::days{static_cast<long>(closes_.size())}; }
  std::size_t size() const { return closes_.size(); }
  bool empty() const { return closes_.empty(); }
  const std::vector<std::optional<double>>& closes() const { return closes_; }

  std::optional<double> close_on(Date d) const;

  /// Number of days carrying an observed close.
  int observed_days() const;

 private:
  TokenId token_id_;
  Date start_{};
  std::vector<std::optional<double>> closes_;
};

/// Carries the last observed close across gaps. Leading gaps stay absent.
/// Throws InputError when no close is observed at all.
PriceSeries forward_fill(const PriceSeries& series);

/// Daily log-returns r_t = ln(p_t / p_{t-1}) for the `window` days ending at
/// `end_date` (inclusive), one entry per day pair with both prices present.
struct ReturnWindow {
  TokenId token_id;
  Date end_date{};
  std::vector<Date> dates;  ///< day t of each return
  std::vector<double> returns;

  std::size_t size() const { return returns.size(); }
};

inline constexpr int kDefaultLookbackDays = 60;
inline constexpr int kDefaultMinObservations = 45;
inline constexpr double kDefaultMeanShrinkLambda = 0.5;

ReturnWindow log_returns(const PriceSeries& series, Date end_date, int window = kDefaultLookbackDays);

/// Ledoit-Wolf shrinkage towards the constant-correlation target.
struct ShrinkageResult {
  Eigen::MatrixXd sample;  ///< 1/T normalised sample covariance
  Eigen::MatrixXd target;
  Eigen::MatrixXd covariance;
  double intensity = 0.0;  ///< in [0, 1]
};

/// `returns` is T x N (rows are days). Requires T >= 2. When the target
/// coincides with the sample matrix (N <= 2, or degenerate variances) the
/// intensity is reported as 0.
ShrinkageResult ledoit_wolf_constant_correlation(const Eigen::MatrixXd& returns);

struct MomentEstimates {
  std::vector<TokenId> asset_ids;
  std::vector<bool> eligible;
  std::vector<int> observations;
  Eigen::VectorXd raw_means;     ///< per day; NaN without observations
  Eigen::VectorXd shrunk_means;  ///< per day; NaN for ineligible assets
  double cross_mean = 0.0;       ///< mean of raw means over eligible assets
  Eigen::MatrixXd shrunk_cov;    ///< per day^2; zero rows/cols for ineligible assets
  double lw_intensity = 0.0;
  double lambda = kDefaultMeanShrinkLambda;

  std::size_t size() const { return asset_ids.size(); }
  std::optional<std::size_t> index_of(const TokenId& id) const;
  bool all_eligible() const;

  /// Sub-problem restricted to eligible assets, order preserved.
  MomentEstimates eligible_only() const;
};

/// Shrunk means and Ledoit-Wolf covariance for the assets in `windows`.
/// Assets with fewer than `min_obs` returns are flagged ineligible and left
/// out of the cross-sectional mean and the covariance. The covariance uses the
/// days on which every eligible asset has a return.
MomentEstimates estimate_moments(std::span<const ReturnWindow> windows, double lambda = kDefaultMeanShrinkLambda,
                                 int min_obs = kDefaultMinObservations);

/// Equal-weight benchmark built from two constituent return windows.
struct MarketIndex {
  std::vector<Date> dates;
  std::vector<double> returns;
};

MarketIndex market_index(const ReturnWindow& first, const ReturnWindow& second);

/// Cov(asset, market) / Var(market) over the dates both cover.
double asset_beta(const ReturnWindow& asset, const MarketIndex& market);

/// Simple return implied by compounding the index's daily log-returns.
double compounded_return(const MarketIndex& market);

// ---------------------------------------------------------------- price files

struct MarketRow {
  Date date{};
  std::optional<double> close_usd;
  double market_cap_usd = 0.0;
  double volume_usd = 0.0;
};

/// Reads (token_id, date, close_usd, market_cap_usd, volume_usd). An empty
/// close marks a gap. Rows per token are returned sorted by date.
std::map<TokenId, std::vector<MarketRow>> read_price_table(std::istream& in, const std::string& source = "prices");

void write_price_table(std::ostream& out, const std::map<TokenId, std::vector<MarketRow>>& table);

/// Price series (not yet forward-filled) for one token's rows.
PriceSeries series_from_rows(const TokenId& token, std::span<const MarketRow> rows);

}  // namespace chainfolio::marketdata
