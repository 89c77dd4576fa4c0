#pragma once

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace chainfolio::qp {

/// minimise 0.5 x'Gx + g'x  subject to  A_eq x = b_eq,  A_in x >= b_in.
/// Rows of A_eq / A_in are constraints. G must be symmetric positive definite.
struct Problem {
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;
};

enum class Status { Optimal, Infeasible, DependentEqualities, IterationLimit };

std::string_view to_string(Status s);

struct Result {
  Eigen::VectorXd x;
  double objective = 0.0;
  Status status = Status::Infeasible;
  int iterations = 0;
  std::vector<int> active_inequalities;

  bool ok() const { return status == Status::Optimal; }
};

/// Goldfarb-Idnani dual active-set method. Starts from the unconstrained
/// minimiser and adds violated constraints until primal feasibility, so the
/// result does not depend on any starting point. Throws NumericalError when G
/// is not positive definite.
Result solve(const Problem& problem, int max_iter = 500);

/// Largest violation of the problem's constraints at x (0 when feasible).
double max_violation(const Problem& problem, const Eigen::VectorXd& x);

}  // namespace chainfolio::qp
