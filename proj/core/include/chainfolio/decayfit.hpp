#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chainfolio::decayfit {

struct SizeBin {
  int n = 0;
  double mean_d = 0.0;  ///< percent
  int count = 0;
};

/// One observation: portfolio size and distance in [0, 1].
struct SizeObservation {
  int n = 0;
  double d = 0.0;
};

inline constexpr int kDefaultMinSize = 2;
inline constexpr int kDefaultMaxSize = 50;
inline constexpr int kDefaultMinBinCount = 30;

/// Groups observations by size within [n_min, n_max], keeps bins with at
/// least `min_count` members and reports their mean distance in percent.
/// Throws InputError when no bin qualifies.
std::vector<SizeBin> bin_by_size(std::span<const SizeObservation> records, int n_min = kDefaultMinSize,
                                 int n_max = kDefaultMaxSize, int min_count = kDefaultMinBinCount);

struct DecayParams {
  double delta_inf = 0.0;  ///< asymptote, percent, <= 100
  double psi = 0.0;        ///< > 0
  double gamma = 0.0;      ///< > 0
};

/// delta_inf * (1 - psi * n^-gamma)
double decay_curve(const DecayParams& p, double n);

/// sum_n sqrt(count_n) * (mean_d(n) - curve(n))^2
double weighted_objective(std::span<const SizeBin> bins, const DecayParams& p);

struct DecayFit {
  std::string strategy;
  DecayParams params;
  double r_squared = 0.0;
  double mae = 0.0;  ///< percentage points, unweighted
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct FitOptions {
  int max_iter = 500;
  std::optional<DecayParams> start;
};

/// Weighted Levenberg-Marquardt fit of the power-decay model with bins
/// weighted by sqrt(count). Bounds (delta_inf < 100, psi > 0, gamma > 0) hold
/// through a reparameterisation. Needs at least four bins; throws
/// NumericalError when the bin means have no variance.
DecayFit fit_power_decay(std::span<const SizeBin> bins, const FitOptions& options = {});

}  // namespace chainfolio::decayfit
