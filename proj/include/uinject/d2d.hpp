#pragma once

// Device-to-device interference network: random layouts, two-slope LoS
// pathloss with piecewise beam gains, shadowing and fast-fading draws, and
// per-link rates.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uinject/interference.hpp"
#include "uinject/rng.hpp"

namespace uinject {

struct D2dConfig {
  int links = 10;                   // N
  double region_m = 150.0;          // square side
  double min_direct_m = 5.0;
  double max_direct_m = 15.0;
  double min_cross_m = 5.0;         // any tx to any other link's rx
  double max_power_dbm = 30.0;      // per-link budget p_i
  double bandwidth_hz = 5e6;
  double noise_psd_dbm_hz = -169.0;
  double shadowing_db = 8.0;        // sigma_S
  bool fast_fading = true;
  double carrier_hz = 25e9;
  double tx_height_m = 1.5;
  double rx_height_m = 1.5;
  double direct_beam_db = 9.0;
  double main_lobe_db = 6.0;
  double side_lobe_db = -9.0;
  double main_lobe_half_width_deg = 10.0;
  int max_placement_attempts = 10000;  // per link

  double max_power_w() const;
  double noise_power_w() const;
  LinkBudget budget() const { return {noise_power_w(), bandwidth_hz}; }
  void validate() const;
};

// Table settings A, B, C; anything else is a configuration error.
D2dConfig d2d_setting(char name);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point& a, const Point& b);

struct D2dScenario {
  D2dConfig config;
  std::vector<Point> tx;
  std::vector<Point> rx;
  // Linear pathloss x beam gains; entry (i, j) is tx j -> rx i.
  Eigen::MatrixXd pathloss_gain;

  int links() const { return static_cast<int>(tx.size()); }
  // pathloss_gain scaled by the per-link power budget.
  Eigen::MatrixXd nominal_gains() const;
  Eigen::MatrixXd pathloss_gain_db() const;
};

struct D2dRealization {
  Eigen::MatrixXd gains;  // realized linear channel gains, tx j -> rx i
};

// Piecewise beam pattern: direct gain at exactly 0 degrees, main lobe within
// the half width, side lobe elsewhere.
double beam_gain_db(double angle_off_boresight_deg, const D2dConfig& config = {});

// Two-slope LoS model: L_bp + 20 log10(d/R_bp) below the breakpoint
// R_bp = 4 h_tx h_rx / lambda, L_bp + 40 log10(d/R_bp) above it, with
// L_bp = |20 log10(lambda^2 / (8 pi h_tx h_rx))|.
double pathloss_db(double distance_m, const D2dConfig& config);
double breakpoint_distance_m(const D2dConfig& config);

D2dScenario make_d2d_layout(const D2dConfig& config, std::vector<Point> tx, std::vector<Point> rx);
D2dScenario sample_d2d_layout(Rng& rng, const D2dConfig& config);

// g_ij = pathloss_gain_ij * 10^(s/10) * f, s ~ N(0, sigma_S^2), f ~ Exp(1).
std::vector<D2dRealization> sample_d2d_realizations(const D2dScenario& scenario, Rng& rng,
                                                    std::size_t count);
void draw_d2d_realization(const D2dScenario& scenario, Rng& rng, Eigen::MatrixXd& gains);

Eigen::VectorXd d2d_rates(const D2dScenario& scenario, const D2dRealization& realization,
                          const Eigen::VectorXd& x);
double d2d_min_rate(const D2dScenario& scenario, const D2dRealization& realization,
                    const Eigen::VectorXd& x);
Eigen::VectorXd d2d_rate_gradient(const D2dScenario& scenario, const D2dRealization& realization,
                                  const Eigen::VectorXd& x);

// Per-entry z-scoring of the N^2 pathloss gains in dB.
class InputNormalizer {
 public:
  InputNormalizer() = default;
  InputNormalizer(Eigen::VectorXd mean, Eigen::VectorXd stddev);

  static InputNormalizer fit(std::span<const D2dScenario> corpus);

  bool fitted() const { return mean_.size() > 0; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }

  // Row-major flattening of pathloss_gain_db(), then z-scored.
  Eigen::VectorXd normalize(const Eigen::MatrixXd& pathloss_gain) const;
  Eigen::VectorXd normalize_db(const Eigen::VectorXd& flattened_db) const;
  Eigen::VectorXd denormalize(const Eigen::VectorXd& z) const;

  void save(const std::filesystem::path& path) const;
  static InputNormalizer load(const std::filesystem::path& path);

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
};

Eigen::VectorXd flatten_db(const Eigen::MatrixXd& pathloss_gain);

void write_d2d_layout(std::ostream& out, const D2dScenario& scenario);
D2dScenario read_d2d_layout(std::istream& in);

}  // namespace uinject
