#include "chainfolio/marketdata.hpp"

#include "chainfolio/csv.hpp"
#include "chainfolio/error.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>

namespace chainfolio::marketdata {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

long day_offset(Date from, Date to) { return (to - from).count(); }

}  // namespace

PriceSeries::PriceSeries(TokenId token_id, Date start, std::vector<std::optional<double>> closes)
    : token_id_(std::move(token_id)), start_(start), closes_(std::move(closes)) {
  for (const auto& c : closes_) {
    if (c && !(*c > 0.0 && std::isfinite(*c))) {
      throw InputError(fmt::format("price series {}: close must be positive and finite", token_id_));
    }
  }
}

PriceSeries PriceSeries::from_observations(TokenId token_id, std::span<const std::pair<Date, double>> observations) {
  if (observations.empty()) return PriceSeries(std::move(token_id), Date{}, {});
  for (std::size_t i = 1; i < observations.size(); ++i) {
    if (observations[i].first <= observations[i - 1].first) {
      throw InputError(fmt::format("price series {}: dates must be strictly increasing", token_id));
    }
  }
  const Date start = observations.front().first;
  std::vector<std::optional<double>> closes(
      static_cast<std::size_t>(day_offset(start, observations.back().first)) + 1);
  for (const auto& [d, close] : observations) closes[static_cast<std::size_t>(day_offset(start, d))] = close;
  return PriceSeries(std::move(token_id), start, std::move(closes));
}

std::optional<double> PriceSeries::close_on(Date d) const {
  if (closes_.empty() || d < start_ || d >= end()) return std::nullopt;
  return closes_[static_cast<std::size_t>(day_offset(start_, d))];
}

int PriceSeries::observed_days() const {
  return static_cast<int>(std::count_if(closes_.begin(), closes_.end(), [](const auto& c) { return c.has_value(); }));
}

PriceSeries forward_fill(const PriceSeries& series) {
  if (series.observed_days() == 0) {
    throw InputError(fmt::format("forward_fill {}: no observed close", series.token_id()));
  }
  auto closes = series.closes();
  std::optional<double> last;
  for (auto& c : closes) {
    if (c) {
      last = c;
    } else {
      c = last;
    }
  }
  return PriceSeries(series.token_id(), series.start(), std::move(closes));
}

ReturnWindow log_returns(const PriceSeries& series, Date end_date, int window) {
  if (window < 1) throw InputError("log_returns: window must be positive");
  ReturnWindow out;
  out.token_id = series.token_id();
  out.end_date = end_date;
  const Date first = end_date - std::chrono::days{window - 1};
  for (Date d = first; d <= end_date; d += std::chrono::days{1}) {
    const auto today = series.close_on(d);
    const auto yesterday = series.close_on(d - std::chrono::days{1});
    if (today && yesterday) {
      out.dates.push_back(d);
      out.returns.push_back(std::log(*today / *yesterday));
    }
  }
  return out;
}

ShrinkageResult ledoit_wolf_constant_correlation(const Eigen::MatrixXd& returns) {
  const auto t_obs = returns.rows();
  const auto n = returns.cols();
  if (t_obs < 2 || n < 1) throw InputError("ledoit_wolf: need at least two observations and one asset");
  const double t = static_cast<double>(t_obs);

  const Eigen::MatrixXd x = returns.rowwise() - returns.colwise().mean();
  ShrinkageResult out;
  out.sample = (x.transpose() * x) / t;
  out.sample = 0.5 * (out.sample + out.sample.transpose());
  const Eigen::VectorXd var = out.sample.diagonal();
  const Eigen::VectorXd sd = var.cwiseMax(0.0).cwiseSqrt();

  double corr_sum = 0.0;
  int pairs = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (sd(i) > 0.0 && sd(j) > 0.0) {
        corr_sum += out.sample(i, j) / (sd(i) * sd(j));
        ++pairs;
      }
    }
  }
  const double r_bar = pairs > 0 ? corr_sum / pairs : 0.0;

  out.target = r_bar * (sd * sd.transpose());
  out.target.diagonal() = var;

  const double gamma = (out.sample - out.target).squaredNorm();
  const double scale = out.sample.squaredNorm();
  if (n == 1 || gamma <= 1e-20 * scale || gamma == 0.0) {
    out.intensity = 0.0;
    out.covariance = out.sample;
    return out;
  }

  // Asymptotic variance of the sample entries.
  const Eigen::MatrixXd y = x.array().square().matrix();
  const Eigen::MatrixXd phi_mat =
      (y.transpose() * y) / t - 2.0 * ((x.transpose() * x).array() * out.sample.array()).matrix() / t +
      out.sample.array().square().matrix();
  const double phi = phi_mat.sum();

  // Covariance between sample entries and the target's off-diagonal entries.
  const Eigen::MatrixXd x3 = x.array().cube().matrix();
  Eigen::MatrixXd theta = (x3.transpose() * x) / t;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) theta(i, j) -= var(i) * out.sample(i, j);
  }
  double rho = phi_mat.diagonal().sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || sd(i) <= 0.0) continue;
      rho += r_bar * (sd(j) / sd(i)) * theta(i, j);
    }
  }

  const double kappa = (phi - rho) / gamma;
  out.intensity = std::clamp(kappa / t, 0.0, 1.0);
  out.covariance = out.intensity * out.target + (1.0 - out.intensity) * out.sample;
  return out;
}

std::optional<std::size_t> MomentEstimates::index_of(const TokenId& id) const {
  const auto it = std::find(asset_ids.begin(), asset_ids.end(), id);
  if (it == asset_ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - asset_ids.begin());
}

bool MomentEstimates::all_eligible() const {
  return std::all_of(eligible.begin(), eligible.end(), [](bool b) { return b; });
}

MomentEstimates MomentEstimates::eligible_only() const {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < size(); ++i) {
    if (eligible[i]) keep.push_back(static_cast<Eigen::Index>(i));
  }
  MomentEstimates out;
  out.cross_mean = cross_mean;
  out.lw_intensity = lw_intensity;
  out.lambda = lambda;
  const auto k = static_cast<Eigen::Index>(keep.size());
  out.raw_means.resize(k);
  out.shrunk_means.resize(k);
  out.shrunk_cov.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto i = keep[static_cast<std::size_t>(a)];
    out.asset_ids.push_back(asset_ids[static_cast<std::size_t>(i)]);
    out.eligible.push_back(true);
    out.observations.push_back(observations[static_cast<std::size_t>(i)]);
    out.raw_means(a) = raw_means(i);
    out.shrunk_means(a) = shrunk_means(i);
    for (Eigen::Index b = 0; b < k; ++b) out.shrunk_cov(a, b) = shrunk_cov(i, keep[static_cast<std::size_t>(b)]);
  }
  return out;
}

MomentEstimates estimate_moments(std::span<const ReturnWindow> windows, double lambda, int min_obs) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("estimate_moments: lambda must lie in [0, 1]");
  if (windows.empty()) throw InputError("estimate_moments: no assets");
  for (const auto& w : windows) {
    if (w.end_date != windows.front().end_date) throw InputError("estimate_moments: windows end on different dates");
    if (w.dates.size() != w.returns.size()) throw InputError("estimate_moments: window dates/returns mismatch");
  }

  const auto n = static_cast<Eigen::Index>(windows.size());
  MomentEstimates m;
  m.lambda = lambda;
  m.raw_means = Eigen::VectorXd::Constant(n, kNaN);
  m.shrunk_means = Eigen::VectorXd::Constant(n, kNaN);
  m.shrunk_cov = Eigen::MatrixXd::Zero(n, n);

  std::vector<Eigen::Index> eligible;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& w = windows[static_cast<std::size_t>(i)];
    m.asset_ids.push_back(w.token_id);
    m.observations.push_back(static_cast<int>(w.size()));
    if (w.size() > 0) {
      double s = 0.0;
      for (double r : w.returns) s += r;
      m.raw_means(i) = s / static_cast<double>(w.size());
    }
    const bool ok = static_cast<int>(w.size()) >= min_obs && w.size() > 0;
    m.eligible.push_back(ok);
    if (ok) eligible.push_back(i);
  }
  if (eligible.empty()) throw InputError("estimate_moments: no eligible assets");

  double mean_sum = 0.0;
  for (auto i : eligible) mean_sum += m.raw_means(i);
  m.cross_mean = mean_sum / static_cast<double>(eligible.size());
  for (auto i : eligible) m.shrunk_means(i) = lambda * m.cross_mean + (1.0 - lambda) * m.raw_means(i);

  // Days on which every eligible asset has a return.
  std::vector<Date> common = windows[static_cast<std::size_t>(eligible.front())].dates;
  for (std::size_t k = 1; k < eligible.size(); ++k) {
    const auto& d = windows[static_cast<std::size_t>(eligible[k])].dates;
    std::vector<Date> next;
    std::set_intersection(common.begin(), common.end(), d.begin(), d.end(), std::back_inserter(next));
    common = std::move(next);
  }
  if (common.size() < 2) throw NumericalError("estimate_moments: fewer than two common return dates");

  const auto k = static_cast<Eigen::Index>(eligible.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(common.size()), k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& w = windows[static_cast<std::size_t>(eligible[static_cast<std::size_t>(c)])];
    std::size_t pos = 0;
    for (std::size_t r = 0; r < common.size(); ++r) {
      while (w.dates[pos] != common[r]) ++pos;
      x(static_cast<Eigen::Index>(r), c) = w.returns[pos];
    }
  }
  const auto lw = ledoit_wolf_constant_correlation(x);
  m.lw_intensity = lw.intensity;
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      m.shrunk_cov(eligible[static_cast<std::size_t>(a)], eligible[static_cast<std::size_t>(b)]) = lw.covariance(a, b);
    }
  }
  return m;
}

MarketIndex market_index(const ReturnWindow& first, const ReturnWindow& second) {
  if (first.dates != second.dates) {
    throw InputError(fmt::format("market_index: {} and {} are not aligned", first.token_id, second.token_id));
  }
  MarketIndex idx;
  idx.dates = first.dates;
  idx.returns.resize(first.size());
  for (std::size_t i = 0; i < first.size(); ++i) idx.returns[i] = 0.5 * (first.returns[i] + second.returns[i]);
  return idx;
}

double asset_beta(const ReturnWindow& asset, const MarketIndex& market) {
  std::unordered_map<Date::rep, double> by_date;
  for (std::size_t i = 0; i < market.dates.size(); ++i) {
    by_date.emplace(market.dates[i].time_since_epoch().count(), market.returns[i]);
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < asset.size(); ++i) {
    const auto it = by_date.find(asset.dates[i].time_since_epoch().count());
    if (it == by_date.end()) continue;
    xs.push_back(it->second);
    ys.push_back(asset.returns[i]);
  }
  if (xs.size() < 2) throw InputError(fmt::format("asset_beta {}: fewer than two aligned observations", asset.token_id));
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, raw = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    raw += xs[i] * xs[i];
  }
  // A constant index leaves only rounding noise in sxx.
  if (!(sxx > 1e-20 * raw)) throw NumericalError("asset_beta: market variance is zero");
  return sxy / sxx;
}

double compounded_return(const MarketIndex& market) {
  double s = 0.0;
  for (double r : market.returns) s += r;
  return std::expm1(s);
}

std::map<TokenId, std::vector<MarketRow>> read_price_table(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source, {"token_id", "date", "close_usd", "market_cap_usd", "volume_usd"});
  std::map<TokenId, std::vector<MarketRow>> table;
  while (reader.next()) {
    MarketRow row;
    row.date = parse_date(reader.field("date"));
    const auto close = reader.field("close_usd");
    if (!close.empty()) {
      row.close_usd = reader.number("close_usd");
      if (!(*row.close_usd > 0.0)) {
        throw InputError(fmt::format("{}:{}: close_usd must be positive", source, reader.line()));
      }
    }
    row.market_cap_usd = reader.field("market_cap_usd").empty() ? 0.0 : reader.number("market_cap_usd");
    row.volume_usd = reader.field("volume_usd").empty() ? 0.0 : reader.number("volume_usd");
    table[TokenId(reader.field("token_id"))].push_back(row);
  }
  for (auto& [token, rows] : table) {
    std::sort(rows.begin(), rows.end(), [](const MarketRow& a, const MarketRow& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].date == rows[i - 1].date) {
        throw InputError(fmt::format("{}: duplicate date {} for {}", source, format_date(rows[i].date), token));
      }
    }
  }
  return table;
}

void write_price_table(std::ostream& out, const std::map<TokenId, std::vector<MarketRow>>& table) {
  out << "token_id,date,close_usd,market_cap_usd,volume_usd\n";
  for (const auto& [token, rows] : table) {
    for (const auto& r : rows) {
      out << token << ',' << format_date(r.date) << ',' << (r.close_usd ? csv::format_number(*r.close_usd) : "")
          << ',' << csv::format_number(r.market_cap_usd) << ',' << csv::format_number(r.volume_usd) << '\n';
    }
  }
}

PriceSeries series_from_rows(const TokenId& token, std::span<const MarketRow> rows) {
  std::vector<std::pair<Date, double>> obs;
  for (const auto& r : rows) {
    if (r.close_usd) obs.emplace_back(r.date, *r.close_usd);
  }
  return PriceSeries::from_observations(token, obs);
}

}  // namespace chainfolio::marketdata
