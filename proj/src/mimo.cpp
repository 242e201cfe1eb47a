#include "uinject/mimo.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "text_io.hpp"
#include "uinject/error.hpp"
#include "uinject/percentile.hpp"

namespace uinject {

namespace {

constexpr const char* kScenarioMagic = "uinject-mimo-scenario";
constexpr int kScenarioVersion = 1;

void fill_cn(Rng& rng, double variance, Eigen::MatrixXcd& out) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      out(i, j) = {re, im};
    }
  }
}

void write_complex_matrix(std::ostream& out, const char* name, const Eigen::MatrixXcd& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << (j ? "  " : "") << detail::format_double(m(i, j).real()) << ' '
          << detail::format_double(m(i, j).imag());
    }
    out << '\n';
  }
}

Eigen::MatrixXcd read_complex_matrix(detail::TokenReader& reader, const char* name,
                                     Eigen::Index rows, Eigen::Index cols) {
  reader.expect(name);
  if (reader.next_int() != rows || reader.next_int() != cols) {
    throw_format(std::string("mimo scenario: ") + name + " dimensions disagree with M, K");
  }
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double re = reader.next_double();
      const double im = reader.next_double();
      m(i, j) = {re, im};
    }
  }
  return m;
}

}  // namespace

double MimoConfig::noise_power_w() const {
  return std::pow(10.0, (noise_psd_dbm_hz - 30.0) / 10.0) * bandwidth_hz;
}

void MimoConfig::validate() const {
  if (antennas < 1 || users < 1) throw_config("MIMO needs M >= 1 and K >= 1");
  if (!(total_power_w > 0.0) || !(bandwidth_hz > 0.0)) {
    throw_config("MIMO total power and bandwidth must be positive");
  }
  if (!(sigma_e2 >= 0.0)) throw_config("MIMO estimation-error variance must be >= 0");
  if (!(rzf_alpha >= 0.0)) throw_config("RZF alpha must be >= 0");
  if (!std::isfinite(noise_psd_dbm_hz)) throw_config("MIMO noise PSD must be finite");
}

Eigen::VectorXd MimoScenario::features() const {
  const Eigen::Index k = h_eff_hat.rows();
  Eigen::VectorXd q(k * k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) q(r * k + c) = std::abs(h_eff_hat(r, c));
  }
  return q;
}

Eigen::MatrixXd MimoScenario::nominal_gains() const {
  return config.total_power_w * h_eff_hat.cwiseAbs2();
}

Eigen::MatrixXcd rzf_beamformers(const Eigen::MatrixXcd& h_hat, double alpha) {
  if (alpha < 0.0) throw_usage("RZF alpha must be >= 0");
  const Eigen::Index k = h_hat.cols();
  Eigen::MatrixXcd gram = h_hat.adjoint() * h_hat;
  gram.diagonal().array() += alpha;

  Eigen::FullPivLU<Eigen::MatrixXcd> lu(gram);
  if (!lu.isInvertible()) {
    throw_numeric("RZF Gram matrix is singular (alpha = " + std::to_string(alpha) +
                  ", rank " + std::to_string(lu.rank()) + " of " + std::to_string(k) + ")");
  }
  // B' = h_hat G^{-1}; G is Hermitian so B'^H = G^{-1} h_hat^H.
  Eigen::MatrixXcd b = lu.solve(h_hat.adjoint()).adjoint();
  for (Eigen::Index j = 0; j < k; ++j) {
    const double norm = b.col(j).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw_numeric("RZF beamformer column " + std::to_string(j) + " has zero or non-finite norm");
    }
    b.col(j) /= norm;
  }
  return b;
}

MimoScenario make_mimo_scenario(const MimoConfig& config, Eigen::MatrixXcd h_hat) {
  config.validate();
  if (h_hat.rows() != config.antennas || h_hat.cols() != config.users) {
    throw_config("estimated channel must be M x K");
  }
  MimoScenario s;
  s.config = config;
  s.beamformers = rzf_beamformers(h_hat, config.rzf_alpha);
  s.h_eff_hat = h_hat.adjoint() * s.beamformers;
  s.h_hat = std::move(h_hat);
  return s;
}

MimoScenario sample_mimo_scenario(Rng& rng, const MimoConfig& config) {
  config.validate();
  Eigen::MatrixXcd h_hat(config.antennas, config.users);
  fill_cn(rng, 1.0, h_hat);
  return make_mimo_scenario(config, std::move(h_hat));
}

void draw_mimo_realization(const MimoScenario& scenario, Rng& rng, Eigen::MatrixXcd& h) {
  h.resize(scenario.h_hat.rows(), scenario.h_hat.cols());
  if (scenario.config.sigma_e2 == 0.0) {
    h = scenario.h_hat;
    return;
  }
  fill_cn(rng, scenario.config.sigma_e2, h);
  h += scenario.h_hat;
}

std::vector<MimoRealization> sample_mimo_realizations(const MimoScenario& scenario, Rng& rng,
                                                      std::size_t count) {
  if (count == 0) throw_usage("need at least one realization");
  std::vector<MimoRealization> out(count);
  for (MimoRealization& r : out) draw_mimo_realization(scenario, rng, r.h);
  return out;
}

Eigen::MatrixXd mimo_gains(const MimoScenario& scenario, const Eigen::MatrixXcd& h) {
  if (h.rows() != scenario.h_hat.rows() || h.cols() != scenario.h_hat.cols()) {
    throw_config("channel realization must be M x K");
  }
  return scenario.config.total_power_w * (h.adjoint() * scenario.beamformers).cwiseAbs2();
}

Eigen::VectorXd mimo_rates(const MimoScenario& scenario, const MimoRealization& realization,
                           const Eigen::VectorXd& x) {
  check_feasible(x, PowerConstraint::kSimplex);
  return link_rates(mimo_gains(scenario, realization.h), x, scenario.config.budget());
}

double mimo_min_rate(const MimoScenario& scenario, const MimoRealization& realization,
                     const Eigen::VectorXd& x) {
  check_feasible(x, PowerConstraint::kSimplex);
  return min_rate(mimo_gains(scenario, realization.h), x, scenario.config.budget());
}

Eigen::VectorXd mimo_rate_gradient(const MimoScenario& scenario, const MimoRealization& realization,
                                   const Eigen::VectorXd& x) {
  check_feasible(x, PowerConstraint::kSimplex);
  return min_rate_gradient(mimo_gains(scenario, realization.h), x, scenario.config.budget());
}

AlphaSelection select_alpha(const MimoConfig& config, std::span<const double> grid,
                            std::size_t scenarios, std::size_t realizations, std::uint64_t seed) {
  if (grid.empty()) throw_usage("alpha grid is empty");
  if (scenarios == 0 || realizations == 0) throw_usage("alpha selection needs draws");
  config.validate();

  AlphaSelection result;
  result.grid.assign(grid.begin(), grid.end());
  const Eigen::VectorXd equal =
      Eigen::VectorXd::Constant(config.users, 1.0 / static_cast<double>(config.users));
  std::vector<double> pooled(scenarios * realizations);
  Eigen::MatrixXcd h_hat(config.antennas, config.users);
  Eigen::MatrixXcd h;

  for (double alpha : grid) {
    MimoConfig candidate = config;
    candidate.rzf_alpha = alpha;
    // Same stream for every candidate: identical estimates and errors.
    Rng rng = make_rng(seed, Stream::kAlphaSelect);
    std::size_t n = 0;
    for (std::size_t s = 0; s < scenarios; ++s) {
      fill_cn(rng, 1.0, h_hat);
      const MimoScenario scenario = make_mimo_scenario(candidate, h_hat);
      for (std::size_t r = 0; r < realizations; ++r) {
        draw_mimo_realization(scenario, rng, h);
        pooled[n++] = min_rate(mimo_gains(scenario, h), equal, candidate.budget());
      }
    }
    result.median_min_rate.push_back(empirical_percentile(pooled, 50.0).value);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < result.median_min_rate.size(); ++i) {
    if (result.median_min_rate[i] > result.median_min_rate[best]) best = i;
  }
  result.alpha = result.grid[best];
  return result;
}

void write_mimo_scenario(std::ostream& out, const MimoScenario& scenario) {
  const MimoConfig& c = scenario.config;
  out << kScenarioMagic << '\n';
  out << "format_version " << kScenarioVersion << '\n';
  out << "antennas " << c.antennas << '\n';
  out << "users " << c.users << '\n';
  out << "total_power_w " << detail::format_double(c.total_power_w) << '\n';
  out << "bandwidth_hz " << detail::format_double(c.bandwidth_hz) << '\n';
  out << "noise_psd_dbm_hz " << detail::format_double(c.noise_psd_dbm_hz) << '\n';
  out << "sigma_e2 " << detail::format_double(c.sigma_e2) << '\n';
  out << "rzf_alpha " << detail::format_double(c.rzf_alpha) << '\n';
  write_complex_matrix(out, "h_hat", scenario.h_hat);
  write_complex_matrix(out, "beamformers", scenario.beamformers);
  out << "end\n";
}

MimoScenario read_mimo_scenario(std::istream& in) {
  detail::TokenReader reader(in, "mimo scenario");
  reader.expect(kScenarioMagic);
  reader.expect("format_version");
  if (const auto v = reader.next_int(); v != kScenarioVersion) {
    throw_format("mimo scenario format_version " + std::to_string(v) + " is not supported");
  }
  MimoConfig c;
  reader.expect("antennas");
  c.antennas = static_cast<int>(reader.next_int());
  reader.expect("users");
  c.users = static_cast<int>(reader.next_int());
  reader.expect("total_power_w");
  c.total_power_w = reader.next_double();
  reader.expect("bandwidth_hz");
  c.bandwidth_hz = reader.next_double();
  reader.expect("noise_psd_dbm_hz");
  c.noise_psd_dbm_hz = reader.next_double();
  reader.expect("sigma_e2");
  c.sigma_e2 = reader.next_double();
  reader.expect("rzf_alpha");
  c.rzf_alpha = reader.next_double();
  try {
    c.validate();
  } catch (const Error& e) {
    throw_format(std::string("mimo scenario constants invalid: ") + e.what());
  }

  MimoScenario s;
  s.config = c;
  s.h_hat = read_complex_matrix(reader, "h_hat", c.antennas, c.users);
  s.beamformers = read_complex_matrix(reader, "beamformers", c.antennas, c.users);
  reader.expect("end");
  s.h_eff_hat = s.h_hat.adjoint() * s.beamformers;
  return s;
}

}  // namespace uinject
