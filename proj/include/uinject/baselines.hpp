#pragma once

// Deterministic comparison policies: the nominal max-min-rate optimum,
// uniform power (MIMO) and full power (D2D).

#include <Eigen/Dense>

#include "uinject/d2d.hpp"
#include "uinject/interference.hpp"
#include "uinject/mimo.hpp"

namespace uinject {

struct MaxMinOptions {
  double rate_tolerance = 1e-4;        // relative bisection width
  double fixed_point_tolerance = 1e-9; // relative power change
  int max_fixed_point_iterations = 10000;
};

struct MaxMinSolution {
  Eigen::VectorXd x;
  double achieved_common_rate = 0.0;  // bits/s, min over links at x
  int iterations = 0;                 // bisection steps
  bool converged = false;
};

// Largest common rate t such that every link reaches t under the constraint.
// For a target SINR the standard interference map
//   x_i <- sinr * (sum_{j!=i} g_ij x_j + noise) / g_ii
// is iterated from zero; the iterate grows monotonically, so exceeding the
// constraint proves infeasibility and convergence proves feasibility.
MaxMinSolution maxmin_nominal(const Eigen::MatrixXd& gains, const LinkBudget& budget,
                              PowerConstraint constraint, const MaxMinOptions& options = {});
MaxMinSolution maxmin_nominal(const MimoScenario& scenario, const MaxMinOptions& options = {});
MaxMinSolution maxmin_nominal(const D2dScenario& scenario, const MaxMinOptions& options = {});

Eigen::VectorXd uniform_power(int users);
Eigen::VectorXd full_power(int links);

}  // namespace uinject
