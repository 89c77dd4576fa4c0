#pragma once

#include "chainfolio/calendar.hpp"

#include <span>
#include <string>
#include <vector>

namespace chainfolio::concentration {

inline constexpr double kDefaultDustThreshold = 1.0;
inline constexpr int kDefaultMinHolders = 100;

/// Population Gini coefficient of non-negative values (no n/(n-1) correction).
double gini(std::span<const double> values);

/// Sum of squared shares.
double hhi(std::span<const double> values);

/// Share of the total held by the top ceil(k_pct% * n) values after dropping
/// values at or below `dust_threshold`.
double top_share(std::span<const double> values, double k_pct, double dust_threshold = kDefaultDustThreshold);

struct ConcentrationRow {
  Date snapshot{};
  std::string scope;  ///< token id or "ecosystem"
  double gini = 0.0;
  double hhi = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  double top10 = 0.0;
  std::size_t n_holders = 0;
};

/// All three statistics over the values above the dust threshold. Throws
/// InputError when nothing survives the filter.
ConcentrationRow summarise(Date snapshot, std::string scope, std::span<const double> values,
                           double dust_threshold = kDefaultDustThreshold);

}  // namespace chainfolio::concentration
