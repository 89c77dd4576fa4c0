#include "chainfolio/metrics.hpp"

#include "chainfolio/csv.hpp"
#include "chainfolio/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <fmt/format.h>

namespace chainfolio::metrics {

namespace {

void check_weights(const Eigen::VectorXd& w, std::string_view what) {
  if (!w.allFinite() || (w.array() < 0.0).any()) throw InputError(fmt::format("{}: negative or non-finite weight", what));
  if (std::abs(w.sum() - 1.0) > 1e-6) throw InputError(fmt::format("{}: weights sum to {}", what, w.sum()));
}

}  // namespace

double l1_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InputError("l1_distance: length mismatch");
  check_weights(a, "l1_distance");
  check_weights(b, "l1_distance");
  if (((a.array() > 0.0) && (b.array() > 0.0)).count() == 0) return 1.0;
  return std::clamp(0.5 * (a - b).cwiseAbs().sum(), 0.0, 1.0);
}

double l1_distance_min_form(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InputError("l1_distance_min_form: length mismatch");
  return 1.0 - a.cwiseMin(b).sum();
}

double forward_return(const Eigen::VectorXd& w, const Eigen::VectorXd& p0, const Eigen::VectorXd& p1) {
  if (w.size() != p0.size() || w.size() != p1.size()) throw InputError("forward_return: length mismatch");
  if (!(p0.array() > 0.0).all() || !(p1.array() > 0.0).all() || !p0.allFinite() || !p1.allFinite()) {
    throw InputError("forward_return: prices must be positive");
  }
  return (w.array() * (p1.array() / p0.array() - 1.0)).sum();
}

double capm_alpha(double r, double beta, double r_market) { return r - beta * r_market; }

std::string_view to_string(DeltaClass c) {
  switch (c) {
    case DeltaClass::Closer: return "closer";
    case DeltaClass::Farther: return "farther";
    case DeltaClass::Unchanged: return "unchanged";
  }
  return "?";
}

DeltaClass distance_delta_vs_naive(double d_before, double d_after, double eps) {
  const double delta = d_after - d_before;
  if (std::abs(delta) < eps) return DeltaClass::Unchanged;
  return delta < 0.0 ? DeltaClass::Closer : DeltaClass::Farther;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty set");
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Aggregate aggregate(std::span<const PerfRecord> perf, std::span<const DistanceRecord> distances,
                    const std::string& baseline_strategy) {
  // snapshot -> strategy -> account -> record
  using ByAccount = std::map<AccountId, const PerfRecord*>;
  std::map<Date, std::map<std::string, ByAccount>> grouped;
  std::set<std::string> strategies;
  for (const auto& rec : perf) {
    strategies.insert(rec.strategy);
    auto& slot = grouped[rec.snapshot][rec.strategy];
    if (!slot.emplace(rec.account, &rec).second) {
      throw InputError(fmt::format("aggregate: duplicate record for {} / {} / {}", format_date(rec.snapshot),
                                   rec.strategy, rec.account));
    }
  }
  std::map<std::string, std::vector<double>> distance_by_strategy;
  for (const auto& d : distances) distance_by_strategy[d.strategy].push_back(d.d);
  for (const auto& [s, v] : distance_by_strategy) strategies.insert(s);

  Aggregate out;
  std::map<Date, double> market_median;
  for (const auto& [snap, by_strategy] : grouped) {
    std::vector<double> market;
    for (const auto& [s, accounts] : by_strategy) {
      for (const auto& [a, rec] : accounts) market.push_back(rec->market_return);
    }
    market_median[snap] = median(std::move(market));
  }

  for (const auto& strategy : strategies) {
    AggregateRow row;
    row.strategy = strategy;
    std::vector<double> med_returns, med_alphas, hits, positives;
    double running = 0.0;
    for (const auto& [snap, by_strategy] : grouped) {
      const auto it = by_strategy.find(strategy);
      if (it == by_strategy.end() || it->second.empty()) {
        out.warnings.push_back(fmt::format("no {} records for snapshot {}", strategy, format_date(snap)));
        continue;
      }
      std::vector<double> returns, alphas;
      std::size_t positive = 0;
      for (const auto& [account, rec] : it->second) {
        returns.push_back(rec->forward_return);
        alphas.push_back(rec->alpha);
        if (rec->alpha > 0.0) ++positive;
      }
      row.n_records += returns.size();
      const double med = median(returns);
      med_returns.push_back(med);
      med_alphas.push_back(median(alphas));
      positives.push_back(static_cast<double>(positive) / static_cast<double>(alphas.size()));
      running += med - market_median.at(snap);
      out.cumulative_excess.push_back(CurvePoint{snap, strategy, running});

      if (strategy != baseline_strategy) {
        const auto base = by_strategy.find(baseline_strategy);
        if (base != by_strategy.end()) {
          std::size_t paired = 0, beats = 0;
          for (const auto& [account, rec] : it->second) {
            const auto b = base->second.find(account);
            if (b == base->second.end()) continue;
            ++paired;
            if (rec->forward_return > b->second->forward_return) ++beats;
          }
          if (paired > 0) hits.push_back(static_cast<double>(beats) / static_cast<double>(paired));
        }
      }
    }
    row.n_snapshots = med_returns.size();
    if (row.n_snapshots == 0) {
      const auto d = distance_by_strategy.find(strategy);
      if (d == distance_by_strategy.end()) continue;
    } else {
      auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      row.median_return = median(med_returns);
      row.median_alpha = median(med_alphas);
      row.frac_positive_alpha = mean(positives);
      if (!hits.empty()) row.hit_rate = mean(hits);
    }
    if (const auto d = distance_by_strategy.find(strategy); d != distance_by_strategy.end()) {
      double s = 0.0;
      for (double x : d->second) s += x;
      row.mean_distance = s / static_cast<double>(d->second.size());
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::vector<std::size_t> distance_histogram(std::span<const double> distances, std::span<const double> edges_pct) {
  if (!std::is_sorted(edges_pct.begin(), edges_pct.end())) throw InputError("distance_histogram: unsorted edges");
  std::vector<std::size_t> counts(edges_pct.size() + 1, 0);
  for (double d : distances) {
    const double pct = 100.0 * d;
    const auto bin = std::lower_bound(edges_pct.begin(), edges_pct.end(), pct) - edges_pct.begin();
    ++counts[static_cast<std::size_t>(bin)];
  }
  return counts;
}

std::vector<std::string> histogram_labels(std::span<const double> edges_pct) {
  std::vector<std::string> labels;
  std::string prev = "0";
  for (std::size_t i = 0; i <= edges_pct.size(); ++i) {
    const std::string hi = i < edges_pct.size() ? csv::format_number(edges_pct[i]) : "100";
    labels.push_back(i == 0 ? fmt::format("[{},{}]", prev, hi) : fmt::format("({},{}]", prev, hi));
    prev = hi;
  }
  return labels;
}

}  // namespace chainfolio::metrics
