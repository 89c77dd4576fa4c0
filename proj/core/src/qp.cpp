#include "chainfolio/qp.hpp"

#include "chainfolio/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace chainfolio::qp {

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::DependentEqualities: return "dependent equality constraints";
    case Status::IterationLimit: return "iteration limit reached";
  }
  return "?";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kInf = std::numeric_limits<double>::infinity();

// The working set is kept as J = L^-T Q and the upper-triangular R of the
// QR factorisation of L^-1 N, where N holds the active constraint normals.
struct Factor {
  MatrixXd J;
  MatrixXd R;
  double r_norm = 1.0;
};

void step_direction(const Factor& f, const VectorXd& normal, int iq, VectorXd& d, VectorXd& z, VectorXd& r) {
  const auto n = f.J.rows();
  d = f.J.transpose() * normal;
  z = f.J.rightCols(n - iq) * d.tail(n - iq);
  if (iq > 0) r.head(iq) = f.R.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
}

bool add_constraint(Factor& f, VectorXd& d, int& iq) {
  const auto n = f.J.rows();
  for (auto j = n - 1; j >= iq + 1; --j) {
    double cc = d(j - 1);
    double ss = d(j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    d(j) = 0.0;
    ss /= h;
    cc /= h;
    if (cc < 0.0) {
      cc = -cc;
      ss = -ss;
      d(j - 1) = -h;
    } else {
      d(j - 1) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t1 = f.J(k, j - 1);
      const double t2 = f.J(k, j);
      f.J(k, j - 1) = t1 * cc + t2 * ss;
      f.J(k, j) = xny * (t1 + f.J(k, j - 1)) - t2;
    }
  }
  ++iq;
  f.R.col(iq - 1).head(iq) = d.head(iq);
  if (std::abs(d(iq - 1)) <= kEps * f.r_norm) return false;
  f.r_norm = std::max(f.r_norm, std::abs(d(iq - 1)));
  return true;
}

void delete_constraint(Factor& f, VectorXi& active, VectorXd& u, int n_eq, int& iq, int l) {
  const auto n = f.R.rows();
  int qq = -1;
  for (int i = n_eq; i < iq; ++i) {
    if (active(i) == l) {
      qq = i;
      break;
    }
  }
  if (qq < 0) return;
  for (int i = qq; i < iq - 1; ++i) {
    active(i) = active(i + 1);
    u(i) = u(i + 1);
    f.R.col(i) = f.R.col(i + 1);
  }
  active(iq - 1) = active(iq);
  u(iq - 1) = u(iq);
  active(iq) = 0;
  u(iq) = 0.0;
  f.R.col(iq - 1).head(iq).setZero();
  --iq;
  if (iq == 0) return;

  for (int j = qq; j < iq; ++j) {
    double cc = f.R(j, j);
    double ss = f.R(j + 1, j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    cc /= h;
    ss /= h;
    f.R(j + 1, j) = 0.0;
    if (cc < 0.0) {
      f.R(j, j) = -h;
      cc = -cc;
      ss = -ss;
    } else {
      f.R(j, j) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (int k = j + 1; k < iq; ++k) {
      const double t1 = f.R(j, k);
      const double t2 = f.R(j + 1, k);
      f.R(j, k) = t1 * cc + t2 * ss;
      f.R(j + 1, k) = xny * (t1 + f.R(j, k)) - t2;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t1 = f.J(k, j);
      const double t2 = f.J(k, j + 1);
      f.J(k, j) = t1 * cc + t2 * ss;
      f.J(k, j + 1) = xny * (f.J(k, j) + t1) - t2;
    }
  }
}

}  // namespace

double max_violation(const Problem& p, const Eigen::VectorXd& x) {
  double v = 0.0;
  if (p.A_eq.rows() > 0) v = std::max(v, (p.A_eq * x - p.b_eq).cwiseAbs().maxCoeff());
  if (p.A_in.rows() > 0) v = std::max(v, (p.b_in - p.A_in * x).maxCoeff());
  return v;
}

Result solve(const Problem& problem, int max_iter) {
  const auto n = problem.G.rows();
  if (problem.G.cols() != n || problem.g.size() != n) throw InputError("qp: objective dimensions disagree");
  const auto n_eq = static_cast<int>(problem.A_eq.rows());
  const auto n_in = static_cast<int>(problem.A_in.rows());
  if ((n_eq > 0 && problem.A_eq.cols() != n) || problem.b_eq.size() != n_eq ||
      (n_in > 0 && problem.A_in.cols() != n) || problem.b_in.size() != n_in) {
    throw InputError("qp: constraint dimensions disagree");
  }

  Result res;
  const Eigen::LLT<MatrixXd> chol(problem.G);
  if (chol.info() != Eigen::Success) throw NumericalError("qp: objective matrix is not positive definite");

  Factor f;
  f.J = chol.matrixU().solve(MatrixXd::Identity(n, n));
  f.R = MatrixXd::Zero(n, n);
  const double c1 = problem.G.trace();
  const double c2 = f.J.trace();

  const int total = n_eq + n_in;
  VectorXd s = VectorXd::Zero(std::max(total, 1));
  VectorXd z(n), r = VectorXd::Zero(std::max(total, 1) + 1), d(n), normal(n);
  VectorXd u = VectorXd::Zero(total + 1), u_old = VectorXd::Zero(total + 1);
  VectorXi active = VectorXi::Zero(total + 1), active_old = VectorXi::Zero(total + 1);
  VectorXi inactive = VectorXi::Zero(std::max(n_in, 1));
  std::vector<bool> allowed(static_cast<std::size_t>(std::max(n_in, 1)), true);

  VectorXd x = -chol.solve(problem.g);
  VectorXd x_old = x;
  int iq = 0;

  auto finish = [&](Status status) {
    res.x = x;
    res.objective = 0.5 * x.dot(problem.G * x) + problem.g.dot(x);
    res.status = status;
    res.active_inequalities.clear();
    for (int i = n_eq; i < iq; ++i) res.active_inequalities.push_back(active(i));
    std::sort(res.active_inequalities.begin(), res.active_inequalities.end());
    return res;
  };

  for (int i = 0; i < n_eq; ++i) {
    normal = problem.A_eq.row(i).transpose();
    step_direction(f, normal, iq, d, z, r);
    double t2 = 0.0;
    if (z.squaredNorm() > kEps) t2 = (problem.b_eq(i) - normal.dot(x)) / z.dot(normal);
    x += t2 * z;
    u(iq) = t2;
    u.head(iq) -= t2 * r.head(iq);
    active(i) = -i - 1;
    if (!add_constraint(f, d, iq)) return finish(Status::DependentEqualities);
  }

  int ip = 0;
  for (;;) {
    // Step 1: recompute the inactive set and the constraint slacks.
    if (++res.iterations > max_iter) return finish(Status::IterationLimit);
    for (int i = 0; i < n_in; ++i) inactive(i) = i;
    for (int i = n_eq; i < iq; ++i) inactive(active(i)) = -1;

    double psi = 0.0;
    for (int i = 0; i < n_in; ++i) {
      allowed[static_cast<std::size_t>(i)] = true;
      s(i) = problem.A_in.row(i).dot(x) - problem.b_in(i);
      psi += std::min(0.0, s(i));
    }
    const double psi_tol = std::min(n_in * kEps * c1 * c2 * 100.0, 1e-12 * std::max(n_in, 1));
    if (std::abs(psi) <= psi_tol) return finish(Status::Optimal);

    u_old.head(iq) = u.head(iq);
    active_old.head(iq) = active.head(iq);
    x_old = x;

    bool restart = false;
    while (!restart) {
      // Step 2: pick the most violated admissible constraint.
      double ss = 0.0;
      for (int i = 0; i < n_in; ++i) {
        if (s(i) < ss && inactive(i) != -1 && allowed[static_cast<std::size_t>(i)]) {
          ss = s(i);
          ip = i;
        }
      }
      if (ss >= 0.0) return finish(Status::Optimal);

      normal = problem.A_in.row(ip).transpose();
      u(iq) = 0.0;
      active(iq) = ip;

      for (;;) {
        if (++res.iterations > max_iter) return finish(Status::IterationLimit);
        step_direction(f, normal, iq, d, z, r);

        // Partial step: largest dual step keeping multipliers non-negative.
        int l = 0;
        double t1 = kInf;
        for (int k = n_eq; k < iq; ++k) {
          if (r(k) > 0.0) {
            const double tmp = u(k) / r(k);
            if (tmp < t1) {
              t1 = tmp;
              l = active(k);
            }
          }
        }
        // Full step: primal step that satisfies constraint ip.
        double t2 = kInf;
        if (z.squaredNorm() > kEps) {
          t2 = -s(ip) / z.dot(normal);
          if (!(t2 >= 0.0)) t2 = kInf;
        }
        const double t = std::min(t1, t2);

        if (t >= kInf) return finish(Status::Infeasible);

        if (t2 >= kInf) {
          u.head(iq) -= t * r.head(iq);
          u(iq) += t;
          inactive(l) = l;
          delete_constraint(f, active, u, n_eq, iq, l);
          continue;
        }

        x += t * z;
        u.head(iq) -= t * r.head(iq);
        u(iq) += t;

        if (t == t2) {
          if (!add_constraint(f, d, iq)) {
            allowed[static_cast<std::size_t>(ip)] = false;
            delete_constraint(f, active, u, n_eq, iq, ip);
            for (int i = 0; i < n_in; ++i) inactive(i) = i;
            for (int i = n_eq; i < iq; ++i) {
              active(i) = active_old(i);
              inactive(active(i)) = -1;
              u(i) = u_old(i);
            }
            x = x_old;
            break;  // back to step 2 with ip excluded
          }
          inactive(ip) = -1;
          restart = true;
          break;
        }

        inactive(l) = l;
        delete_constraint(f, active, u, n_eq, iq, l);
        s(ip) = problem.A_in.row(ip).dot(x) - problem.b_in(ip);
      }
    }
  }
}

}  // namespace chainfolio::qp
