#pragma once

// Rates of an interference network given a power-scaled gain matrix.
//
// gains(i, j) is the power received at receiver i from transmitter j when
// x_j = 1, so link i's SINR is gains(i,i) x_i / (sum_{j!=i} gains(i,j) x_j + noise)
// and its rate is bandwidth * log2(1 + SINR) in bits/s.

#include <Eigen/Dense>

namespace uinject {

struct LinkBudget {
  double noise_power_w = 0.0;
  double bandwidth_hz = 0.0;
};

enum class PowerConstraint {
  kSimplex,  // x >= 0, sum x <= 1
  kBox,      // 0 <= x_i <= 1
};

const char* to_string(PowerConstraint constraint);

// Throws a usage error when x violates the constraint by more than 1e-9.
void check_feasible(const Eigen::VectorXd& x, PowerConstraint constraint);

Eigen::VectorXd link_rates(const Eigen::MatrixXd& gains, const Eigen::VectorXd& x,
                           const LinkBudget& budget);

// Minimum rate; argmin receives the first link attaining it.
double min_rate(const Eigen::MatrixXd& gains, const Eigen::VectorXd& x, const LinkBudget& budget,
                Eigen::Index* argmin = nullptr);

// Gradient of min_k r_k with respect to x: the gradient of the first link
// attaining the minimum.
Eigen::VectorXd min_rate_gradient(const Eigen::MatrixXd& gains, const Eigen::VectorXd& x,
                                  const LinkBudget& budget);

}  // namespace uinject
