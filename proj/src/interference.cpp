#include "uinject/interference.hpp"

#include <cmath>
#include <numbers>

#include "uinject/error.hpp"

namespace uinject {

namespace {

constexpr double kFeasibilityTol = 1e-9;

void check_shapes(const Eigen::MatrixXd& gains, const Eigen::VectorXd& x) {
  if (gains.rows() != gains.cols() || gains.rows() != x.size()) {
    throw_config("gain matrix and allocation sizes disagree");
  }
}

// Interference plus noise seen by receiver i.
double disturbance(const Eigen::MatrixXd& gains, const Eigen::VectorXd& x, Eigen::Index i,
                   double noise) {
  double sum = noise;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (j != i) sum += gains(i, j) * x(j);
  }
  return sum;
}

}  // namespace

const char* to_string(PowerConstraint constraint) {
  return constraint == PowerConstraint::kSimplex ? "simplex" : "box";
}

void check_feasible(const Eigen::VectorXd& x, PowerConstraint constraint) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x(i)) || x(i) < -kFeasibilityTol) {
      throw_usage("power allocation entry " + std::to_string(i) + " is negative or non-finite");
    }
    if (constraint == PowerConstraint::kBox && x(i) > 1.0 + kFeasibilityTol) {
      throw_usage("power allocation entry " + std::to_string(i) + " exceeds 1");
    }
  }
  if (constraint == PowerConstraint::kSimplex && x.sum() > 1.0 + kFeasibilityTol) {
    throw_usage("power allocation sums to more than 1");
  }
}

Eigen::VectorXd link_rates(const Eigen::MatrixXd& gains, const Eigen::VectorXd& x,
                           const LinkBudget& budget) {
  check_shapes(gains, x);
  Eigen::VectorXd rates(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double sinr = gains(i, i) * x(i) / disturbance(gains, x, i, budget.noise_power_w);
    rates(i) = budget.bandwidth_hz * std::log2(1.0 + sinr);
  }
  return rates;
}

double min_rate(const Eigen::MatrixXd& gains, const Eigen::VectorXd& x, const LinkBudget& budget,
                Eigen::Index* argmin) {
  check_shapes(gains, x);
  // log2 is monotone, so compare SINRs and take a single logarithm.
  double worst = 0.0;
  Eigen::Index worst_index = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double sinr = gains(i, i) * x(i) / disturbance(gains, x, i, budget.noise_power_w);
    if (std::isnan(sinr)) {
      if (argmin) *argmin = i;
      return sinr;
    }
    if (i == 0 || sinr < worst) {
      worst = sinr;
      worst_index = i;
    }
  }
  if (argmin) *argmin = worst_index;
  return budget.bandwidth_hz * std::log2(1.0 + worst);
}

Eigen::VectorXd min_rate_gradient(const Eigen::MatrixXd& gains, const Eigen::VectorXd& x,
                                  const LinkBudget& budget) {
  Eigen::Index a = 0;
  min_rate(gains, x, budget, &a);
  const double scale = budget.bandwidth_hz / std::numbers::ln2;
  const double disturb = disturbance(gains, x, a, budget.noise_power_w);
  const double signal = gains(a, a) * x(a);
  const double total = disturb + signal;

  Eigen::VectorXd grad(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (j == a) {
      grad(j) = scale * gains(a, a) / total;
    } else {
      grad(j) = -scale * signal * gains(a, j) / (disturb * total);
    }
  }
  return grad;
}

}  // namespace uinject
