#include "uinject/baselines.hpp"

#include <cmath>

#include "uinject/error.hpp"

namespace uinject {

namespace {

enum class Feasibility { kFeasible, kInfeasible, kUndecided };

struct FeasibilityResult {
  Feasibility verdict = Feasibility::kInfeasible;
  Eigen::VectorXd x;
};

bool violates(const Eigen::VectorXd& x, PowerConstraint constraint) {
  if (constraint == PowerConstraint::kSimplex) return x.sum() > 1.0;
  return (x.array() > 1.0).any();
}

// Minimal power vector reaching `sinr` on every link, if one exists.
FeasibilityResult check_target(const Eigen::MatrixXd& gains, double noise, double sinr,
                               PowerConstraint constraint, const MaxMinOptions& options) {
  const Eigen::Index n = gains.rows();
  FeasibilityResult result;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd next(n);
  for (int it = 0; it < options.max_fixed_point_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double disturbance = noise;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i) disturbance += gains(i, j) * x(j);
      }
      next(i) = sinr * disturbance / gains(i, i);
    }
    if (violates(next, constraint)) return result;
    const double change = ((next - x).cwiseAbs().array() / next.array()).maxCoeff();
    x.swap(next);
    if (change <= options.fixed_point_tolerance) {
      result.verdict = Feasibility::kFeasible;
      result.x = std::move(x);
      return result;
    }
  }

  // Slow contraction near the boundary: decide with the fixed point itself,
  // x = (I - sinr F)^{-1} sinr u with F_ij = g_ij / g_ii (j != i), u_i = noise / g_ii.
  // A strictly positive solution exists iff the spectral radius is below one.
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) system(i, j) = -sinr * gains(i, j) / gains(i, i);
    }
    rhs(i) = sinr * noise / gains(i, i);
  }
  Eigen::VectorXd direct = system.partialPivLu().solve(rhs);
  if (!direct.allFinite()) {
    result.verdict = Feasibility::kUndecided;
    return result;
  }
  if ((direct.array() > 0.0).all() && !violates(direct, constraint)) {
    result.verdict = Feasibility::kFeasible;
    result.x = std::move(direct);
  }
  return result;
}

}  // namespace

MaxMinSolution maxmin_nominal(const Eigen::MatrixXd& gains, const LinkBudget& budget,
                              PowerConstraint constraint, const MaxMinOptions& options) {
  const Eigen::Index n = gains.rows();
  if (n == 0 || gains.cols() != n) throw_config("max-min needs a square, non-empty gain matrix");
  if (!(budget.noise_power_w > 0.0)) throw_config("max-min needs positive noise power");
  if ((gains.diagonal().array() <= 0.0).any() || (gains.array() < 0.0).any() || !gains.allFinite()) {
    throw_config("max-min needs finite nonnegative gains with positive direct links");
  }

  // Upper bound: each link alone at its full budget.
  double hi = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double alone = budget.bandwidth_hz * std::log2(1.0 + gains(i, i) / budget.noise_power_w);
    hi = i == 0 ? alone : std::min(hi, alone);
  }
  double lo = 0.0;

  MaxMinSolution solution;
  solution.x = Eigen::VectorXd::Zero(n);
  bool undecided = false;
  while (hi - lo > options.rate_tolerance * hi) {
    const double mid = 0.5 * (lo + hi);
    const double sinr = std::exp2(mid / budget.bandwidth_hz) - 1.0;
    FeasibilityResult check = check_target(gains, budget.noise_power_w, sinr, constraint, options);
    ++solution.iterations;
    if (check.verdict == Feasibility::kFeasible) {
      lo = mid;
      solution.x = std::move(check.x);
    } else {
      undecided = undecided || check.verdict == Feasibility::kUndecided;
      hi = mid;
    }
  }

  solution.achieved_common_rate = min_rate(gains, solution.x, budget);
  solution.converged = lo > 0.0 && !undecided;
  return solution;
}

MaxMinSolution maxmin_nominal(const MimoScenario& scenario, const MaxMinOptions& options) {
  return maxmin_nominal(scenario.nominal_gains(), scenario.config.budget(), PowerConstraint::kSimplex,
                        options);
}

MaxMinSolution maxmin_nominal(const D2dScenario& scenario, const MaxMinOptions& options) {
  return maxmin_nominal(scenario.nominal_gains(), scenario.config.budget(), PowerConstraint::kBox,
                        options);
}

Eigen::VectorXd uniform_power(int users) {
  if (users < 1) throw_usage("uniform power needs K >= 1");
  return Eigen::VectorXd::Constant(users, 1.0 / static_cast<double>(users));
}

Eigen::VectorXd full_power(int links) {
  if (links < 1) throw_usage("full power needs N >= 1");
  return Eigen::VectorXd::Ones(links);
}

}  // namespace uinject
