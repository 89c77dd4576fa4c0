#include "chainfolio/decayfit.hpp"

#include "chainfolio/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>

namespace chainfolio::decayfit {

std::vector<SizeBin> bin_by_size(std::span<const SizeObservation> records, int n_min, int n_max, int min_count) {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& r : records) {
    if (r.n < n_min || r.n > n_max) continue;
    auto& [sum, count] = acc[r.n];
    sum += r.d;
    ++count;
  }
  std::vector<SizeBin> bins;
  for (const auto& [n, sc] : acc) {
    if (sc.second >= min_count) bins.push_back(SizeBin{n, 100.0 * sc.first / sc.second, sc.second});
  }
  if (bins.empty()) throw InputError("bin_by_size: no size bin has enough observations");
  return bins;
}

double decay_curve(const DecayParams& p, double n) { return p.delta_inf * (1.0 - p.psi * std::pow(n, -p.gamma)); }

double weighted_objective(std::span<const SizeBin> bins, const DecayParams& p) {
  double s = 0.0;
  for (const auto& b : bins) {
    const double r = b.mean_d - decay_curve(p, b.n);
    s += std::sqrt(static_cast<double>(b.count)) * r * r;
  }
  return s;
}

namespace {

using Vec3 = Eigen::Vector3d;

// theta = (a, b, c): delta_inf = 100 sigmoid(a), psi = e^b, gamma = e^c.
DecayParams from_theta(const Vec3& t) {
  return DecayParams{100.0 / (1.0 + std::exp(-t(0))), std::exp(t(1)), std::exp(t(2))};
}

Vec3 to_theta(const DecayParams& p) {
  const double frac = std::clamp(p.delta_inf / 100.0, 1e-12, 1.0 - 1e-12);
  return Vec3(std::log(frac / (1.0 - frac)), std::log(p.psi), std::log(p.gamma));
}

struct Model {
  std::span<const SizeBin> bins;

  // Residuals count^(1/4) * (y - f) so that their squares carry sqrt(count).
  void evaluate(const Vec3& theta, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
    const auto p = from_theta(theta);
    const auto m = static_cast<Eigen::Index>(bins.size());
    r.resize(m);
    if (jac) jac->resize(m, 3);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& b = bins[static_cast<std::size_t>(i)];
      const double w = std::pow(static_cast<double>(b.count), 0.25);
      const double decay = std::pow(static_cast<double>(b.n), -p.gamma);
      const double f = p.delta_inf * (1.0 - p.psi * decay);
      r(i) = w * (b.mean_d - f);
      if (jac) {
        const double df_dd = 1.0 - p.psi * decay;
        const double df_dpsi = -p.delta_inf * decay;
        const double df_dgamma = p.delta_inf * p.psi * decay * std::log(static_cast<double>(b.n));
        (*jac)(i, 0) = -w * df_dd * p.delta_inf * (1.0 - p.delta_inf / 100.0);
        (*jac)(i, 1) = -w * df_dpsi * p.psi;
        (*jac)(i, 2) = -w * df_dgamma * p.gamma;
      }
    }
  }
};

DecayParams initial_guess(std::span<const SizeBin> bins) {
  double top = 0.0;
  for (const auto& b : bins) top = std::max(top, b.mean_d);
  DecayParams p;
  p.delta_inf = std::clamp(top, 1e-6, 99.9);
  p.gamma = 1.0;
  const auto& first = *std::min_element(bins.begin(), bins.end(), [](auto& a, auto& b) { return a.n < b.n; });
  p.psi = std::max(1e-3, (1.0 - first.mean_d / p.delta_inf) * std::pow(static_cast<double>(first.n), p.gamma));
  return p;
}

}  // namespace

DecayFit fit_power_decay(std::span<const SizeBin> bins, const FitOptions& options) {
  if (bins.size() < 4) throw InputError("fit_power_decay: need at least four bins");
  double mean_y = 0.0;
  for (const auto& b : bins) {
    if (b.count <= 0 || b.n < 1) throw InputError("fit_power_decay: bins need positive size and count");
    mean_y += b.mean_d;
  }
  mean_y /= static_cast<double>(bins.size());
  double ss_tot = 0.0;
  for (const auto& b : bins) ss_tot += (b.mean_d - mean_y) * (b.mean_d - mean_y);
  if (ss_tot <= 1e-24 * std::max(1.0, mean_y * mean_y)) {
    throw NumericalError("fit_power_decay: constant bin means leave the decay rate unidentifiable");
  }

  const Model model{bins};
  Vec3 theta = to_theta(options.start.value_or(initial_guess(bins)));
  Eigen::VectorXd r, r_try;
  Eigen::MatrixXd jac;
  model.evaluate(theta, r, &jac);
  double cost = r.squaredNorm();
  double lambda = 1e-3;

  DecayFit fit;
  for (fit.iterations = 0; fit.iterations < options.max_iter; ++fit.iterations) {
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Vec3 grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-14 * std::max(1.0, cost)) {
      fit.converged = true;
      break;
    }
    bool improved = false;
    while (lambda < 1e16) {
      Eigen::Matrix3d a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Vec3 step = a.ldlt().solve(-grad);
      const Vec3 candidate = theta + step;
      model.evaluate(candidate, r_try, nullptr);
      const double cost_try = r_try.squaredNorm();
      if (std::isfinite(cost_try) && cost_try <= cost) {
        const bool tiny = step.norm() <= 1e-12 * (theta.norm() + 1e-12) || cost - cost_try <= 1e-16 * cost;
        theta = candidate;
        cost = cost_try;
        model.evaluate(theta, r, &jac);
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        if (tiny) fit.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) {
      // No descent direction left: a stationary point to working precision.
      fit.converged = true;
      break;
    }
    if (fit.converged) break;
  }

  fit.params = from_theta(theta);
  fit.objective = weighted_objective(bins, fit.params);
  double ss_res = 0.0, abs_sum = 0.0;
  for (const auto& b : bins) {
    const double e = b.mean_d - decay_curve(fit.params, b.n);
    ss_res += e * e;
    abs_sum += std::abs(e);
  }
  fit.r_squared = 1.0 - ss_res / ss_tot;
  fit.mae = abs_sum / static_cast<double>(bins.size());
  return fit;
}

}  // namespace chainfolio::decayfit
