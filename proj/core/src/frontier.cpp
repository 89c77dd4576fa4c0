#include "chainfolio/frontier.hpp"

#include "chainfolio/error.hpp"
#include "chainfolio/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/tools/toms748_solve.hpp>
#include <fmt/format.h>

namespace chainfolio::frontier {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::MinVar: return "MinVar";
    case StrategyKind::MaxRet: return "MaxRet";
    case StrategyKind::MaxSR: return "MaxSR";
    case StrategyKind::EqualWeight: return "EqualWeight";
    case StrategyKind::McapWeight: return "McapWeight";
  }
  return "?";
}

std::optional<StrategyKind> parse_strategy(std::string_view text) {
  for (auto k : {StrategyKind::MinVar, StrategyKind::MaxRet, StrategyKind::MaxSR, StrategyKind::EqualWeight,
                 StrategyKind::McapWeight}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

bool is_optimised(StrategyKind kind) {
  return kind == StrategyKind::MinVar || kind == StrategyKind::MaxRet || kind == StrategyKind::MaxSR;
}

ConstraintSet ConstraintSet::from_initial(const VectorXd& w0, double w_max) {
  ConstraintSet c;
  c.w_max = w_max;
  for (Index i = 0; i < w0.size(); ++i) {
    if (w0(i) > 0.0) c.support.push_back(i);
  }
  return c;
}

double sharpe_ratio(double mu, double sigma, double rf) {
  if (sigma > 0.0) return (mu - rf) / sigma;
  return mu > rf ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

double strategy_objective(StrategyKind strategy, double mu, double sigma, double rf) {
  switch (strategy) {
    case StrategyKind::MinVar: return -sigma;
    case StrategyKind::MaxRet: return mu;
    case StrategyKind::MaxSR: return sharpe_ratio(mu, sigma, rf);
    default: throw InputError("strategy_objective: only optimised strategies have an objective");
  }
}

namespace {

constexpr double kRidge = 1e-10;

double greedy_capped_return(const VectorXd& mu, double cap, bool largest) {
  std::vector<Index> order(static_cast<std::size_t>(mu.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return largest ? mu(a) > mu(b) : mu(a) < mu(b); });
  double remaining = 1.0;
  double total = 0.0;
  for (auto i : order) {
    const double take = std::min(cap, remaining);
    total += take * mu(i);
    remaining -= take;
    if (remaining <= 0.0) break;
  }
  if (remaining > 1e-12) throw InputError("weight cap too small for the number of assets");
  return total;
}

}  // namespace

double max_capped_return(const VectorXd& mu, double cap) { return greedy_capped_return(mu, cap, true); }
double min_capped_return(const VectorXd& mu, double cap) { return greedy_capped_return(mu, cap, false); }

VectorXd project_capped_simplex(const VectorXd& v, double cap) {
  const auto k = v.size();
  if (k == 0 || static_cast<double>(k) * cap < 1.0 - 1e-12) {
    throw InputError("project_capped_simplex: empty set");
  }
  auto mass = [&](double tau) { return (v.array() - tau).max(0.0).min(cap).sum(); };
  double lo = v.minCoeff() - cap;
  double hi = v.maxCoeff();
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (mass(mid) >= 1.0 ? lo : hi) = mid;
  }
  VectorXd w = (v.array() - lo).max(0.0).min(cap).matrix();
  const double residual = 1.0 - w.sum();
  int free = 0;
  for (Index i = 0; i < k; ++i) free += (w(i) > 0.0 && w(i) < cap) ? 1 : 0;
  if (free > 0) {
    for (Index i = 0; i < k; ++i) {
      if (w(i) > 0.0 && w(i) < cap) w(i) += residual / free;
    }
  }
  return w.cwiseMax(0.0).cwiseMin(cap);
}

namespace {

// Problem data restricted to the support.
struct Restricted {
  std::vector<Index> support;
  Index full_size = 0;
  VectorXd w0;
  VectorXd mu;
  MatrixXd cov;
  double scale = 1.0;  // mean diagonal of cov, used to normalise the objective
  double cap = kDefaultWeightCap;
  bool w0_within_cap = true;

  Index size() const { return static_cast<Index>(support.size()); }
};

Restricted restrict(const VectorXd& w0, const VectorXd& mu, const MatrixXd& cov, const ConstraintSet& c) {
  const auto n = w0.size();
  if (mu.size() != n || cov.rows() != n || cov.cols() != n) {
    throw InputError(fmt::format("frontier: dimension mismatch ({} weights, {} means, {}x{} covariance)", n,
                                 mu.size(), cov.rows(), cov.cols()));
  }
  if (!(c.w_max > 0.0 && c.w_max <= 1.0)) throw InputError("frontier: w_max must lie in (0, 1]");
  if ((w0.array() < 0.0).any() || !w0.allFinite()) throw InputError("frontier: w0 must be non-negative");
  if (std::abs(w0.sum() - 1.0) > 1e-6) throw InputError(fmt::format("frontier: w0 sums to {}", w0.sum()));
  if (!mu.allFinite() || !cov.allFinite()) throw InputError("frontier: non-finite moments");

  Restricted r;
  r.full_size = n;
  r.cap = c.w_max;
  r.support = c.support.empty() ? ConstraintSet::from_initial(w0, c.w_max).support : c.support;
  for (auto i : r.support) {
    if (i < 0 || i >= n) throw InputError("frontier: support index out of range");
  }
  if (r.support.size() < 2) throw InputError("frontier: support must contain at least two assets");
  const auto k = r.size();
  r.w0.resize(k);
  r.mu.resize(k);
  r.cov.resize(k, k);
  for (Index a = 0; a < k; ++a) {
    const auto i = r.support[static_cast<std::size_t>(a)];
    r.w0(a) = w0(i);
    r.mu(a) = mu(i);
    for (Index b = 0; b < k; ++b) r.cov(a, b) = cov(i, r.support[static_cast<std::size_t>(b)]);
  }
  r.w0 /= r.w0.sum();

  const double asym = (r.cov - r.cov.transpose()).cwiseAbs().maxCoeff();
  const double magnitude = std::max(r.cov.cwiseAbs().maxCoeff(), 1e-300);
  if (asym > 1e-10 * std::max(1.0, magnitude)) throw InputError("frontier: covariance is not symmetric");
  r.cov = 0.5 * (r.cov + r.cov.transpose());
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(r.cov, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, magnitude)) {
    throw InputError("frontier: covariance is not positive semidefinite");
  }
  const double mean_diag = r.cov.trace() / static_cast<double>(k);
  r.scale = mean_diag > 0.0 ? mean_diag : 1.0;
  r.w0_within_cap = (r.w0.array() <= r.cap + 1e-12).all();
  return r;
}

void append_row(MatrixXd& A, VectorXd& b, const VectorXd& row, double rhs) {
  const double norm = row.norm();
  A.conservativeResize(A.rows() + 1, row.size());
  b.conservativeResize(b.size() + 1);
  A.row(A.rows() - 1) = row.transpose() / norm;
  b(b.size() - 1) = rhs / norm;
}

// Fully invested, long-only, capped; objective 0.5 w'(cov/scale)w plus a small
// ridge pulling towards `anchor` to make the problem strictly convex.
qp::Problem weight_problem(const Restricted& r, const VectorXd& anchor) {
  const auto k = r.size();
  qp::Problem p;
  p.G = r.cov / r.scale + kRidge * MatrixXd::Identity(k, k);
  p.g = -kRidge * anchor;
  p.A_eq.resize(0, k);
  p.A_in.resize(0, k);
  append_row(p.A_eq, p.b_eq, VectorXd::Ones(k), 1.0);
  for (Index i = 0; i < k; ++i) append_row(p.A_in, p.b_in, VectorXd::Unit(k, i), 0.0);
  if (r.cap < 1.0) {
    for (Index i = 0; i < k; ++i) append_row(p.A_in, p.b_in, -VectorXd::Unit(k, i), -r.cap);
  }
  return p;
}

// Centred and scaled return row so that its coefficients are O(1).
struct ReturnRow {
  VectorXd coeffs;
  double centre = 0.0;
  double spread = 0.0;
  double rhs(double target) const { return (target - centre) / spread; }
};

ReturnRow return_row(const VectorXd& mu) {
  ReturnRow row;
  row.spread = mu.maxCoeff() - mu.minCoeff();
  row.centre = mu.mean();
  row.coeffs = (mu.array() - row.centre) / row.spread;
  return row;
}

bool returns_flat(const VectorXd& mu) {
  const double spread = mu.maxCoeff() - mu.minCoeff();
  return spread <= 1e-12 * std::max(mu.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
}

VectorXd clean_weights(VectorXd w, double cap) {
  w = w.cwiseMax(0.0).cwiseMin(cap);
  const double s = w.sum();
  if (s > 0.0) w /= s;
  return w;
}

struct Anchor {
  enum class Kind { None, ReturnAtLeast, ReturnEquals, RiskAtMost } kind = Kind::None;
  double value = 0.0;
};

FrontierSolution finish(StrategyKind strategy, const Restricted& r, const VectorXd& w_sub, bool converged,
                        int iterations, std::string reason, const Anchor& anchor) {
  FrontierSolution sol;
  sol.strategy = strategy;
  sol.iterations = iterations;
  sol.reason = std::move(reason);
  sol.weights = VectorXd::Zero(r.full_size);
  const VectorXd w = clean_weights(w_sub, r.cap);
  for (Index a = 0; a < r.size(); ++a) sol.weights(r.support[static_cast<std::size_t>(a)]) = w(a);
  sol.mu = r.mu.dot(w);
  sol.sigma = std::sqrt(std::max(0.0, w.dot(r.cov * w)));

  double violation = std::abs(w.sum() - 1.0);
  violation = std::max(violation, (-w.array()).maxCoeff());
  violation = std::max(violation, (w.array() - r.cap).maxCoeff());
  switch (anchor.kind) {
    case Anchor::Kind::ReturnEquals: violation = std::max(violation, std::abs(sol.mu - anchor.value)); break;
    case Anchor::Kind::ReturnAtLeast: violation = std::max(violation, anchor.value - sol.mu); break;
    case Anchor::Kind::RiskAtMost: violation = std::max(violation, sol.sigma - anchor.value); break;
    case Anchor::Kind::None: break;
  }
  sol.constraint_violation = std::max(0.0, violation);
  sol.converged = converged && sol.constraint_violation < 1e-6;
  if (converged && !sol.converged && sol.reason.empty()) {
    sol.reason = fmt::format("constraint violation {:.3g} above tolerance", sol.constraint_violation);
  }
  return sol;
}

FrontierSolution failure(StrategyKind strategy, const Restricted& r, std::string reason, int iterations = 0) {
  FrontierSolution sol;
  sol.strategy = strategy;
  sol.weights = VectorXd::Zero(r.full_size);
  sol.converged = false;
  sol.iterations = iterations;
  sol.reason = std::move(reason);
  sol.mu = std::numeric_limits<double>::quiet_NaN();
  sol.sigma = std::numeric_limits<double>::quiet_NaN();
  return sol;
}

// ------------------------------------------------------------------ MinVar

FrontierSolution solve_min_var(const Restricted& r, const SolverOptions& opt) {
  auto p = weight_problem(r, r.w0);
  Anchor anchor;
  const double mu0 = r.mu.dot(r.w0);
  if (!returns_flat(r.mu)) {
    const double hi = max_capped_return(r.mu, r.cap);
    const double lo = min_capped_return(r.mu, r.cap);
    const auto row = return_row(r.mu);
    const double slack = 1e-12 * std::max(row.spread, std::abs(mu0));
    if (mu0 > hi + slack) {
      return failure(StrategyKind::MinVar, r, "return anchor exceeds the largest return reachable under the cap");
    }
    if (mu0 < lo - slack) {
      // Every capped portfolio already earns more than the anchor.
      append_row(p.A_in, p.b_in, row.coeffs, row.rhs(mu0));
      anchor = {Anchor::Kind::ReturnAtLeast, mu0};
    } else {
      append_row(p.A_eq, p.b_eq, row.coeffs, row.rhs(std::clamp(mu0, lo, hi)));
      anchor = {Anchor::Kind::ReturnEquals, mu0};
    }
  }
  const auto res = qp::solve(p, opt.max_iter);
  if (!res.ok()) {
    return failure(StrategyKind::MinVar, r, std::string(qp::to_string(res.status)), res.iterations);
  }
  return finish(StrategyKind::MinVar, r, res.x, true, res.iterations, {}, anchor);
}

// ------------------------------------------------------------------ MaxRet

struct FrontierPoint {
  VectorXd w;
  double mu = 0.0;
  double sigma = 0.0;
};

FrontierSolution solve_max_ret(const Restricted& r, const SolverOptions& opt) {
  const double sigma0 = std::sqrt(std::max(0.0, r.w0.dot(r.cov * r.w0)));
  const double mu0 = r.mu.dot(r.w0);
  const Anchor anchor{Anchor::Kind::RiskAtMost, sigma0};
  int iterations = 0;

  if (returns_flat(r.mu)) {
    // Every portfolio earns the same; stay as close to w0 as the cap allows.
    const VectorXd w = project_capped_simplex(r.w0, r.cap);
    return finish(StrategyKind::MaxRet, r, w, true, 0, {}, Anchor{});
  }

  const auto row = return_row(r.mu);
  auto min_variance_at = [&](std::optional<double> floor) -> FrontierPoint {
    auto p = weight_problem(r, r.w0);
    if (floor) append_row(p.A_in, p.b_in, row.coeffs, row.rhs(*floor));
    const auto res = qp::solve(p, opt.max_iter);
    iterations += res.iterations;
    if (!res.ok()) throw NumericalError(fmt::format("MaxRet inner solve: {}", qp::to_string(res.status)));
    FrontierPoint fp;
    fp.w = clean_weights(res.x, r.cap);
    fp.mu = r.mu.dot(fp.w);
    fp.sigma = std::sqrt(std::max(0.0, fp.w.dot(r.cov * fp.w)));
    return fp;
  };

  try {
    const double sigma_slack = 1e-12 * std::max(sigma0, std::sqrt(r.scale));
    const FrontierPoint gmv = min_variance_at(std::nullopt);
    if (gmv.sigma > sigma0 + sigma_slack) {
      return failure(StrategyKind::MaxRet, r, "risk anchor below the minimum risk reachable under the cap",
                     iterations);
    }
    const double top = max_capped_return(r.mu, r.cap) - 1e-12 * row.spread;
    const FrontierPoint best = min_variance_at(top);
    if (best.sigma <= sigma0) return finish(StrategyKind::MaxRet, r, best.w, true, iterations, {}, anchor);

    double m_lo = gmv.mu;
    if (r.w0_within_cap) m_lo = std::max(m_lo, mu0);
    if (m_lo >= top) return finish(StrategyKind::MaxRet, r, gmv.w, true, iterations, {}, anchor);

    auto excess_risk = [&](double m) { return min_variance_at(m).sigma - sigma0; };
    const double f_lo = excess_risk(m_lo);
    const double f_hi = best.sigma - sigma0;
    if (f_lo >= 0.0) {
      const auto at_lo = min_variance_at(m_lo);
      return finish(StrategyKind::MaxRet, r, at_lo.w, true, iterations, {}, anchor);
    }
    std::uintmax_t max_iter = 200;
    const auto bracket = boost::math::tools::toms748_solve(excess_risk, m_lo, top, f_lo, f_hi,
                                                           boost::math::tools::eps_tolerance<double>(46), max_iter);
    const auto point = min_variance_at(bracket.first);
    return finish(StrategyKind::MaxRet, r, point.w, true, iterations, {}, anchor);
  } catch (const NumericalError& e) {
    return failure(StrategyKind::MaxRet, r, e.what(), iterations);
  }
}

// ------------------------------------------------------------------- MaxSR

bool better_sharpe(double s_a, double sig_a, const VectorXd& w_a, double s_b, double sig_b, const VectorXd& w_b) {
  const bool both_finite = std::isfinite(s_a) && std::isfinite(s_b);
  const double tol = both_finite ? 1e-12 * std::max({1.0, std::abs(s_a), std::abs(s_b)}) : 0.0;
  if (s_a > s_b + tol) return true;
  if (s_b > s_a + tol) return false;
  if (sig_a != sig_b) return sig_a < sig_b;
  return std::lexicographical_compare(w_a.data(), w_a.data() + w_a.size(), w_b.data(), w_b.data() + w_b.size());
}

// Sharpe is quasiconvex where it is non-positive, so its maximum over the
// capped simplex sits at a vertex.
FrontierSolution max_sharpe_by_vertices(const Restricted& r, double rf) {
  const auto k = r.size();
  const double cap = std::min(r.cap, 1.0);
  auto at_cap = static_cast<Index>(std::floor(1.0 / cap + 1e-12));
  at_cap = std::min(at_cap, k);
  double rem = 1.0 - static_cast<double>(at_cap) * cap;
  if (rem < 1e-12) rem = 0.0;

  double count = std::exp(std::lgamma(k + 1.0) - std::lgamma(at_cap + 1.0) - std::lgamma(k - at_cap + 1.0));
  if (rem > 0.0) count *= static_cast<double>(k - at_cap);
  if (count > 1e6) return failure(StrategyKind::MaxSR, r, "too many vertices for the non-positive Sharpe search");

  std::vector<bool> mask(static_cast<std::size_t>(k), false);
  std::fill(mask.begin(), mask.begin() + at_cap, true);
  VectorXd best_w;
  double best_s = -std::numeric_limits<double>::infinity();
  double best_sig = std::numeric_limits<double>::infinity();
  int evaluated = 0;
  auto consider = [&](const VectorXd& w) {
    ++evaluated;
    const double sig = std::sqrt(std::max(0.0, w.dot(r.cov * w)));
    const double s = sharpe_ratio(r.mu.dot(w), sig, rf);
    if (best_w.size() == 0 || better_sharpe(s, sig, w, best_s, best_sig, best_w)) {
      best_w = w;
      best_s = s;
      best_sig = sig;
    }
  };
  // prev_permutation over a sorted-descending mask walks all subsets of size at_cap.
  do {
    VectorXd w = VectorXd::Zero(k);
    for (Index i = 0; i < k; ++i) {
      if (mask[static_cast<std::size_t>(i)]) w(i) = cap;
    }
    if (rem > 0.0) {
      for (Index j = 0; j < k; ++j) {
        if (mask[static_cast<std::size_t>(j)]) continue;
        VectorXd v = w;
        v(j) = rem;
        consider(v);
      }
    } else {
      consider(w);
    }
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return finish(StrategyKind::MaxSR, r, best_w, true, evaluated, {}, Anchor{});
}

FrontierSolution solve_max_sr(const Restricted& r, const SolverOptions& opt) {
  const double rf = opt.rf_daily();
  const auto k = r.size();
  const VectorXd excess = r.mu.array() - rf;
  const double emax = excess.cwiseAbs().maxCoeff();
  if (emax == 0.0 || max_capped_return(r.mu, r.cap) - rf <= 1e-12 * emax) return max_sharpe_by_vertices(r, rf);

  // Homogenised problem: minimise y'Cy subject to excess'y = 1 on the cone of
  // capped portfolios; the tangency weights are y / sum(y).
  qp::Problem p;
  p.G = r.cov / r.scale + kRidge * MatrixXd::Identity(k, k);
  p.g = VectorXd::Zero(k);
  p.A_eq.resize(0, k);
  p.A_in.resize(0, k);
  append_row(p.A_eq, p.b_eq, excess / emax, 1.0);
  for (Index i = 0; i < k; ++i) append_row(p.A_in, p.b_in, VectorXd::Unit(k, i), 0.0);
  if (r.cap < 1.0) {
    for (Index i = 0; i < k; ++i) {
      append_row(p.A_in, p.b_in, VectorXd::Constant(k, r.cap) - VectorXd::Unit(k, i), 0.0);
    }
  }
  const auto res = qp::solve(p, opt.max_iter);
  if (!res.ok() || !(res.x.sum() > 0.0)) {
    return failure(StrategyKind::MaxSR, r, std::string(qp::to_string(res.status)), res.iterations);
  }
  return finish(StrategyKind::MaxSR, r, res.x / res.x.sum(), true, res.iterations, {}, Anchor{});
}

}  // namespace

FrontierSolution solve(StrategyKind strategy, const VectorXd& w0, const VectorXd& mu, const MatrixXd& cov,
                       const ConstraintSet& constraints, const SolverOptions& options) {
  const Restricted r = restrict(w0, mu, cov, constraints);
  if (static_cast<double>(r.size()) * r.cap < 1.0 - 1e-12) {
    return failure(strategy, r, "weight cap leaves no fully invested portfolio on the support");
  }
  switch (strategy) {
    case StrategyKind::MinVar: return solve_min_var(r, options);
    case StrategyKind::MaxRet: return solve_max_ret(r, options);
    case StrategyKind::MaxSR: return solve_max_sr(r, options);
    default: throw InputError(fmt::format("solve: {} is not an optimised strategy", to_string(strategy)));
  }
}

FrontierSolution solve(StrategyKind strategy, const VectorXd& w0, const marketdata::MomentEstimates& m,
                       const ConstraintSet& constraints, const SolverOptions& options) {
  if (!m.all_eligible()) throw InputError("solve: moment estimates contain ineligible assets");
  return solve(strategy, w0, m.shrunk_means, m.shrunk_cov, constraints, options);
}

VectorXd naive_weights(StrategyKind kind, std::size_t n, std::span<const double> mcaps) {
  if (n == 0) throw InputError("naive_weights: empty support");
  const auto size = static_cast<Index>(n);
  if (kind == StrategyKind::EqualWeight) return VectorXd::Constant(size, 1.0 / static_cast<double>(n));
  if (kind != StrategyKind::McapWeight) throw InputError("naive_weights: not a naive strategy");
  if (mcaps.size() != n) throw InputError("naive_weights: market cap missing for part of the support");
  VectorXd w(size);
  for (Index i = 0; i < size; ++i) {
    const double c = mcaps[static_cast<std::size_t>(i)];
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("naive_weights: market caps must be positive");
    w(i) = c;
  }
  return w / w.sum();
}

// ----------------------------------------------------------------- grid oracle

std::vector<VectorXd> grid_points(std::size_t n, double step, double cap) {
  if (n == 0) return {};
  if (!(step > 0.0)) throw InputError("grid_points: step must be positive");
  const double units_real = 1.0 / step;
  const auto units = static_cast<long>(std::llround(units_real));
  if (units < 1 || std::abs(units_real - static_cast<double>(units)) > 1e-9 * units_real) {
    throw InputError("grid_points: step must divide 1");
  }
  const auto max_units = static_cast<long>(std::floor(cap * static_cast<double>(units) + 1e-9));
  std::vector<VectorXd> out;
  std::vector<long> counts(n, 0);
  // Depth-first enumeration of compositions of `units` into n capped parts.
  auto recurse = [&](auto&& self, std::size_t i, long left) -> void {
    if (i + 1 == n) {
      if (left > max_units) return;
      counts[i] = left;
      VectorXd w(static_cast<Index>(n));
      for (std::size_t j = 0; j < n; ++j) w(static_cast<Index>(j)) = static_cast<double>(counts[j]) / units;
      out.push_back(std::move(w));
      return;
    }
    for (long c = 0; c <= std::min(left, max_units); ++c) {
      counts[i] = c;
      self(self, i + 1, left - c);
    }
  };
  recurse(recurse, 0, units);
  return out;
}

namespace {

// Extreme return reachable from g by moving at most `budget` of weight
// between assets while staying inside the capped simplex.
double reachable_return(VectorXd w, const VectorXd& mu, double cap, double budget, bool upwards) {
  const auto k = w.size();
  const double sign = upwards ? 1.0 : -1.0;
  for (Index pass = 0; pass < 4 * k && budget > 0.0; ++pass) {
    Index donor = -1, receiver = -1;
    for (Index i = 0; i < k; ++i) {
      if (w(i) > 0.0 && (donor < 0 || sign * mu(i) < sign * mu(donor))) donor = i;
      if (w(i) < cap && (receiver < 0 || sign * mu(i) > sign * mu(receiver))) receiver = i;
    }
    if (donor < 0 || receiver < 0 || !(sign * mu(receiver) > sign * mu(donor))) break;
    const double delta = std::min({budget, w(donor), cap - w(receiver)});
    if (!(delta > 0.0)) break;
    w(donor) -= delta;
    w(receiver) += delta;
    budget -= delta;
  }
  return mu.dot(w);
}

}  // namespace

GridOracleResult grid_oracle(StrategyKind strategy, const VectorXd& w0, const VectorXd& mu, const MatrixXd& cov,
                             const ConstraintSet& constraints, double step, double rf_annual) {
  if (!is_optimised(strategy)) throw InputError("grid_oracle: only optimised strategies");
  const Restricted r = restrict(w0, mu, cov, constraints);
  if (r.size() > 4) throw InputError("grid_oracle: support larger than 4 assets");
  const double rf = rf_annual / kDaysPerYear;
  const double mu0 = r.mu.dot(r.w0);
  const double sigma0 = std::sqrt(std::max(0.0, r.w0.dot(r.cov * r.w0)));

  // Mirror the anchor form the solver uses.
  enum class ReturnRule { Any, Reach, AtLeast } rule = ReturnRule::Any;
  if (strategy == StrategyKind::MinVar && !returns_flat(r.mu)) {
    const double lo = min_capped_return(r.mu, r.cap);
    const double spread = r.mu.maxCoeff() - r.mu.minCoeff();
    rule = mu0 < lo - 1e-12 * std::max(spread, std::abs(mu0)) ? ReturnRule::AtLeast : ReturnRule::Reach;
  }

  GridOracleResult out;
  VectorXd best_w;
  double best_obj = -std::numeric_limits<double>::infinity();
  double best_dist = std::numeric_limits<double>::infinity();
  auto points = grid_points(static_cast<std::size_t>(r.size()), step, r.cap);
  // The grid can miss every point with sigma <= sigma0; w0 never fails.
  points.push_back(r.w0);
  out.candidates = points.size();
  for (const auto& g : points) {
    const double m = r.mu.dot(g);
    const double s = std::sqrt(std::max(0.0, g.dot(r.cov * g)));
    bool admit = true;
    if (strategy == StrategyKind::MinVar) {
      const double tol = 1e-12 * (std::abs(mu0) + r.mu.cwiseAbs().maxCoeff());
      const double up = reachable_return(g, r.mu, r.cap, step, true);
      if (rule == ReturnRule::AtLeast) {
        admit = up >= mu0 - tol;
      } else if (rule == ReturnRule::Reach) {
        const double down = reachable_return(g, r.mu, r.cap, step, false);
        admit = down <= mu0 + tol && up >= mu0 - tol;
      }
    } else if (strategy == StrategyKind::MaxRet) {
      admit = s <= sigma0;
    }
    if (!admit) continue;
    ++out.admitted;
    const double obj = strategy_objective(strategy, m, s, rf);
    const double dist = 0.5 * (g - r.w0).cwiseAbs().sum();
    if (best_w.size() == 0 || obj > best_obj || (obj == best_obj && dist < best_dist)) {
      best_w = g;
      best_obj = obj;
      best_dist = dist;
    }
  }
  if (best_w.size() == 0) {
    out.best = failure(strategy, r, "no admissible grid point");
    return out;
  }
  out.best = finish(strategy, r, best_w, true, static_cast<int>(out.candidates), {}, Anchor{});
  return out;
}

double sigma_lipschitz(const MatrixXd& cov) {
  double worst = 0.0;
  for (Index i = 0; i < cov.rows(); ++i) {
    for (Index j = i + 1; j < cov.rows(); ++j) {
      worst = std::max(worst, std::sqrt(std::max(0.0, cov(i, i) + cov(j, j) - 2.0 * cov(i, j))));
    }
  }
  return 0.5 * worst;
}

double mu_lipschitz(const VectorXd& mu) { return 0.5 * (mu.maxCoeff() - mu.minCoeff()); }

double sharpe_lipschitz(const VectorXd& mu, const MatrixXd& cov, double rf, double sigma_floor) {
  if (!(sigma_floor > 0.0)) return std::numeric_limits<double>::infinity();
  const double excess = (mu.array() - rf).abs().maxCoeff();
  return (mu_lipschitz(mu) + excess * sigma_lipschitz(cov) / sigma_floor) / sigma_floor;
}

}  // namespace chainfolio::frontier
