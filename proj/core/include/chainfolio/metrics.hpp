#pragma once

#include "chainfolio/calendar.hpp"
#include "chainfolio/types.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chainfolio::metrics {

inline constexpr int kDefaultForwardDays = 20;
inline constexpr double kDefaultNaiveEps = 0.001;

/// Half the l1 norm of the difference: the minimum one-way turnover needed to
/// move from one fully invested allocation to the other. Both vectors must
/// be non-negative and sum to 1 within 1e-6 (InputError otherwise).
double l1_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// 1 - sum_i min(a_i, b_i); equal to l1_distance for valid weight vectors.
double l1_distance_min_form(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Simple holding-period return of frozen weights: sum_i w_i (p1_i / p0_i - 1).
double forward_return(const Eigen::VectorXd& w, const Eigen::VectorXd& p0, const Eigen::VectorXd& p1);

/// CAPM alpha with a zero risk-free rate: r - beta * r_market.
double capm_alpha(double r, double beta, double r_market);

enum class DeltaClass { Closer, Farther, Unchanged };

std::string_view to_string(DeltaClass c);

/// Classifies d_after - d_before; changes smaller than eps in magnitude are
/// unchanged.
DeltaClass distance_delta_vs_naive(double d_before, double d_after, double eps = kDefaultNaiveEps);

struct DistanceRecord {
  AccountId account;
  Date snapshot{};
  std::string strategy;
  double d = 0.0;  ///< in [0, 1]
  int n_assets = 0;
  double wealth_usd = 0.0;
};

struct PerfRecord {
  AccountId account;
  Date snapshot{};
  std::string strategy;
  double forward_return = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
  double market_return = 0.0;
};

double median(std::vector<double> values);

struct AggregateRow {
  std::string strategy;
  double median_return = 0.0;
  std::optional<double> hit_rate;  ///< empty for the baseline itself
  double median_alpha = 0.0;
  double frac_positive_alpha = 0.0;
  std::optional<double> mean_distance;
  std::size_t n_snapshots = 0;
  std::size_t n_records = 0;
};

struct CurvePoint {
  Date snapshot{};
  std::string strategy;
  double value = 0.0;
};

struct Aggregate {
  std::vector<AggregateRow> rows;  ///< ordered by strategy name
  std::vector<CurvePoint> cumulative_excess;  ///< ordered by (strategy, snapshot)
  std::vector<std::string> warnings;
};

/// Snapshot-level medians weighted equally across snapshots. Hit rate is the
/// per-snapshot share of accounts whose return beats `baseline_strategy` for
/// the same account, averaged over snapshots. The cumulative excess curve is
/// the running sum of (median strategy return - median market return).
Aggregate aggregate(std::span<const PerfRecord> perf, std::span<const DistanceRecord> distances,
                    const std::string& baseline_strategy);

/// Counts distances (in [0, 1]) per right-closed percentage bin
/// [0, e0], (e0, e1], ..., (e_last, 100].
std::vector<std::size_t> distance_histogram(std::span<const double> distances, std::span<const double> edges_pct);

std::vector<std::string> histogram_labels(std::span<const double> edges_pct);

}  // namespace chainfolio::metrics
