#pragma once

#include "chainfolio/marketdata.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chainfolio::frontier {

enum class StrategyKind { MinVar, MaxRet, MaxSR, EqualWeight, McapWeight };

inline constexpr StrategyKind kOptimisedStrategies[] = {StrategyKind::MinVar, StrategyKind::MaxRet,
                                                        StrategyKind::MaxSR};
inline constexpr StrategyKind kNaiveStrategies[] = {StrategyKind::EqualWeight, StrategyKind::McapWeight};

std::string_view to_string(StrategyKind kind);
std::optional<StrategyKind> parse_strategy(std::string_view text);
bool is_optimised(StrategyKind kind);

inline constexpr double kDefaultWeightCap = 0.9;
inline constexpr double kDaysPerYear = 365.0;

/// Fully invested, long-only, per-asset cap, restricted to the initial
/// portfolio's support.
struct ConstraintSet {
  double w_max = kDefaultWeightCap;
  std::vector<Eigen::Index> support;  ///< indices with w0 > 0; filled from w0 when empty

  static ConstraintSet from_initial(const Eigen::VectorXd& w0, double w_max = kDefaultWeightCap);
};

struct SolverOptions {
  double rf_annual = 0.05;
  double tol = 1e-8;
  int max_iter = 500;

  double rf_daily() const { return rf_annual / kDaysPerYear; }
};

struct FrontierSolution {
  StrategyKind strategy = StrategyKind::MinVar;
  Eigen::VectorXd weights;  ///< full length, zero outside the support
  double mu = 0.0;
  double sigma = 0.0;
  bool converged = false;
  int iterations = 0;
  double constraint_violation = 0.0;
  std::string reason;  ///< why the solve did not converge
};

/// Solves one of the three mean-variance problems on the support of w0:
///  MinVar  minimise sigma with the return pinned at w0's return
///  MaxRet  maximise mu with sigma no larger than w0's
///  MaxSR   maximise (mu - rf) / sigma
/// Returns of infeasible anchors come back with converged = false.
/// Throws InputError for malformed w0, a support of size < 2, or a
/// covariance that is not positive semidefinite.
FrontierSolution solve(StrategyKind strategy, const Eigen::VectorXd& w0, const Eigen::VectorXd& mu,
                       const Eigen::MatrixXd& cov, const ConstraintSet& constraints, const SolverOptions& options = {});

/// Uses the shrunk means and covariance; every asset must be eligible.
FrontierSolution solve(StrategyKind strategy, const Eigen::VectorXd& w0, const marketdata::MomentEstimates& m,
                       const ConstraintSet& constraints, const SolverOptions& options = {});

/// Equal or market-cap weights over `n` assets. No cap is applied.
Eigen::VectorXd naive_weights(StrategyKind kind, std::size_t n, std::span<const double> mcaps = {});

/// (mu - rf) / sigma, with sigma = 0 mapped to +inf or -inf by the sign of mu - rf.
double sharpe_ratio(double mu, double sigma, double rf);

/// Value that each strategy maximises: -sigma, mu, or the Sharpe ratio.
double strategy_objective(StrategyKind strategy, double mu, double sigma, double rf);

/// Euclidean projection onto {w : sum w = 1, 0 <= w <= cap}.
Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& v, double cap);

/// Largest and smallest mu'w over the capped simplex.
double max_capped_return(const Eigen::VectorXd& mu, double cap);
double min_capped_return(const Eigen::VectorXd& mu, double cap);

// ---------------------------------------------------------------- grid oracle

/// All points of the simplex with coordinates in multiples of `step` and
/// no coordinate above `cap`. `step` must divide 1.
std::vector<Eigen::VectorXd> grid_points(std::size_t n, double step, double cap);

struct GridOracleResult {
  FrontierSolution best;  ///< converged = false when no grid point was admitted
  std::size_t candidates = 0;
  std::size_t admitted = 0;
};

/// Exhaustive search on the support (at most 4 assets). MinVar admits grid
/// points from which the anchor return is reachable within one step of
/// one-way turnover; MaxRet admits points whose sigma does not exceed w0's;
/// MaxSR admits every capped point.
GridOracleResult grid_oracle(StrategyKind strategy, const Eigen::VectorXd& w0, const Eigen::VectorXd& mu,
                             const Eigen::MatrixXd& cov, const ConstraintSet& constraints, double step = 0.01,
                             double rf_annual = 0.05);

/// Lipschitz constants of sigma, mu and the Sharpe ratio with respect to the
/// l1 norm on the simplex. `sigma_floor` bounds sigma from below on the
/// region of interest.
double sigma_lipschitz(const Eigen::MatrixXd& cov);
double mu_lipschitz(const Eigen::VectorXd& mu);
double sharpe_lipschitz(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov, double rf, double sigma_floor);

}  // namespace chainfolio::frontier
