#include "chainfolio/concentration.hpp"

#include "chainfolio/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace chainfolio::concentration {

namespace {

double checked_total(std::span<const double> values, const char* what) {
  double total = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError(std::string(what) + ": values must be non-negative");
    total += v;
  }
  if (!(total > 0.0)) throw InputError(std::string(what) + ": total must be positive");
  return total;
}

}  // namespace

double gini(std::span<const double> values) {
  const double total = checked_total(values, "gini");
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (2.0 * static_cast<double>(i + 1) - n - 1.0) * x[i];
  return std::clamp(acc / (n * total), 0.0, 1.0);
}

double hhi(std::span<const double> values) {
  const double total = checked_total(values, "hhi");
  double acc = 0.0;
  for (double v : values) acc += (v / total) * (v / total);
  return acc;
}

double top_share(std::span<const double> values, double k_pct, double dust_threshold) {
  if (!(k_pct > 0.0 && k_pct <= 100.0)) throw InputError("top_share: k must lie in (0, 100]");
  std::vector<double> kept;
  for (double v : values) {
    if (v > dust_threshold) kept.push_back(v);
  }
  if (kept.empty()) throw InputError("top_share: no accounts above the dust threshold");
  std::sort(kept.begin(), kept.end(), std::greater<>());
  // Guard against k * n / 100 landing a hair above an integer.
  const double exact = k_pct * static_cast<double>(kept.size()) / 100.0;
  auto count = static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
  count = std::clamp<std::size_t>(count, 1, kept.size());
  double top = 0.0, total = 0.0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    total += kept[i];
    if (i < count) top += kept[i];
  }
  return top / total;
}

ConcentrationRow summarise(Date snapshot, std::string scope, std::span<const double> values, double dust_threshold) {
  std::vector<double> kept;
  for (double v : values) {
    if (v > dust_threshold) kept.push_back(v);
  }
  if (kept.empty()) throw InputError("concentration: no holders above the dust threshold");
  ConcentrationRow row;
  row.snapshot = snapshot;
  row.scope = std::move(scope);
  row.gini = gini(kept);
  row.hhi = hhi(kept);
  row.top1 = top_share(kept, 1.0, dust_threshold);
  row.top5 = top_share(kept, 5.0, dust_threshold);
  row.top10 = top_share(kept, 10.0, dust_threshold);
  row.n_holders = kept.size();
  return row;
}

}  // namespace chainfolio::concentration
