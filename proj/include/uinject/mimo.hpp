#pragma once

// Multiuser MIMO downlink with imperfect CSI: Rayleigh channel estimates,
// RZF beamforming, estimation-error sampling, and per-user rates.

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uinject/interference.hpp"
#include "uinject/rng.hpp"

namespace uinject {

struct MimoConfig {
  int antennas = 4;                 // M
  int users = 4;                    // K
  double total_power_w = 1.0;       // P
  double bandwidth_hz = 10e6;       // w
  double noise_psd_dbm_hz = -75.0;
  double sigma_e2 = 0.075;          // estimation-error variance
  double rzf_alpha = 0.2;

  // 10^((psd_dBm - 30)/10) * w
  double noise_power_w() const;
  LinkBudget budget() const { return {noise_power_w(), bandwidth_hz}; }
  void validate() const;
};

struct MimoScenario {
  MimoConfig config;
  Eigen::MatrixXcd h_hat;        // M x K estimated channel, column k = user k
  Eigen::MatrixXcd beamformers;  // M x K, unit-norm columns
  Eigen::MatrixXcd h_eff_hat;    // K x K, h_hat^H * beamformers

  // Network input: |h_eff_hat(k, j)| flattened row-major, length K^2.
  Eigen::VectorXd features() const;
  // P |h_hat_k^H b_j|^2, the gains of the nominal problem.
  Eigen::MatrixXd nominal_gains() const;
};

struct MimoRealization {
  Eigen::MatrixXcd h;  // M x K true channel
};

// RZF precoder h_hat (h_hat^H h_hat + alpha I)^{-1} with unit-norm columns.
// Throws a numeric error when the regularized Gram matrix is singular.
Eigen::MatrixXcd rzf_beamformers(const Eigen::MatrixXcd& h_hat, double alpha);

// Builds beamformers and effective channels for a given estimate.
MimoScenario make_mimo_scenario(const MimoConfig& config, Eigen::MatrixXcd h_hat);

// h_hat entries i.i.d. CN(0, 1).
MimoScenario sample_mimo_scenario(Rng& rng, const MimoConfig& config);

// H = h_hat + E, E entries i.i.d. CN(0, sigma_e2).
std::vector<MimoRealization> sample_mimo_realizations(const MimoScenario& scenario, Rng& rng,
                                                      std::size_t count);
void draw_mimo_realization(const MimoScenario& scenario, Rng& rng, Eigen::MatrixXcd& h);

// P |h_k^H b_j|^2 for a true channel h.
Eigen::MatrixXd mimo_gains(const MimoScenario& scenario, const Eigen::MatrixXcd& h);

Eigen::VectorXd mimo_rates(const MimoScenario& scenario, const MimoRealization& realization,
                           const Eigen::VectorXd& x);
double mimo_min_rate(const MimoScenario& scenario, const MimoRealization& realization,
                     const Eigen::VectorXd& x);
Eigen::VectorXd mimo_rate_gradient(const MimoScenario& scenario, const MimoRealization& realization,
                                   const Eigen::VectorXd& x);

struct AlphaSelection {
  double alpha = 0.0;
  std::vector<double> grid;
  std::vector<double> median_min_rate;  // per grid entry, bits/s
};

// Picks the grid alpha with the highest median min-rate under equal power,
// pooled over scenarios x realizations. Every candidate sees the same draws.
AlphaSelection select_alpha(const MimoConfig& config, std::span<const double> grid,
                            std::size_t scenarios, std::size_t realizations, std::uint64_t seed);

void write_mimo_scenario(std::ostream& out, const MimoScenario& scenario);
MimoScenario read_mimo_scenario(std::istream& in);

}  // namespace uinject
