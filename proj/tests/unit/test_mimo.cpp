#include <cmath>
#include <complex>
#include <sstream>

#include "doctest.h"
#include "uinject/error.hpp"
#include "uinject/mimo.hpp"

using namespace uinject;

namespace {

MimoScenario scenario_with(double sigma_e2, double alpha, std::uint64_t seed) {
  MimoConfig c;
  c.sigma_e2 = sigma_e2;
  c.rzf_alpha = alpha;
  Rng rng(seed);
  return sample_mimo_scenario(rng, c);
}

// Normalized columns of (H H^H + alpha I)^{-1} H, the other side of the push-through identity.
Eigen::MatrixXcd push_through(const Eigen::MatrixXcd& h, double alpha) {
  Eigen::MatrixXcd outer = h * h.adjoint();
  outer.diagonal().array() += alpha;
  Eigen::MatrixXcd b = outer.inverse() * h;
  for (Eigen::Index j = 0; j < b.cols(); ++j) b.col(j).normalize();
  return b;
}

}  // namespace

TEST_CASE("mimo: noise power from PSD and bandwidth") {
  MimoConfig c;
  CHECK(c.noise_power_w() == doctest::Approx(std::pow(10.0, -10.5) * 1e7).epsilon(1e-12));
  c.bandwidth_hz = 1.0;
  c.noise_psd_dbm_hz = 30.0;
  CHECK(c.noise_power_w() == doctest::Approx(1.0));
}

TEST_CASE("mimo: estimated channel entries are CN(0,1)") {
  Rng rng(1);
  MimoConfig c;
  double re = 0, im = 0, p = 0, re2 = 0, cross = 0;
  const int n = 6250;  // 10^5 entries
  for (int s = 0; s < n; ++s) {
    const MimoScenario sc = sample_mimo_scenario(rng, c);
    for (Eigen::Index i = 0; i < sc.h_hat.size(); ++i) {
      const std::complex<double> z = sc.h_hat(i);
      re += z.real();
      im += z.imag();
      p += std::norm(z);
      re2 += z.real() * z.real();
      cross += z.real() * z.imag();
    }
  }
  const double m = n * 16.0;
  CHECK(std::abs(re / m) < 0.01);
  CHECK(std::abs(im / m) < 0.01);
  CHECK(p / m == doctest::Approx(1.0).epsilon(0.01));
  CHECK(re2 / m == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(cross / m) < 0.01);
}

TEST_CASE("mimo: RZF matches the push-through form") {
  Rng rng(2);
  for (double alpha : {0.01, 0.2, 1.0, 10.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      MimoConfig c;
      c.rzf_alpha = alpha;
      const MimoScenario s = sample_mimo_scenario(rng, c);
      CHECK((s.beamformers - push_through(s.h_hat, alpha)).cwiseAbs().maxCoeff() < 1e-10);
      for (Eigen::Index j = 0; j < s.beamformers.cols(); ++j) {
        CHECK(s.beamformers.col(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("mimo: RZF on orthonormal columns returns the columns") {
  Rng rng(3);
  MimoConfig c;
  const MimoScenario s = sample_mimo_scenario(rng, c);
  const Eigen::MatrixXcd q = Eigen::HouseholderQR<Eigen::MatrixXcd>(s.h_hat).householderQ();
  for (double alpha : {0.0, 0.2, 5.0}) {
    CHECK((rzf_beamformers(q, alpha) - q).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mimo: large alpha approaches matched filtering") {
  const MimoScenario s = scenario_with(0.075, 0.2, 4);
  const Eigen::MatrixXcd b = rzf_beamformers(s.h_hat, 1e9);
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    const Eigen::VectorXcd mrt = s.h_hat.col(j).normalized();
    CHECK((b.col(j) - mrt).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("mimo: small alpha suppresses cross terms") {
  const MimoScenario s = scenario_with(0.0, 1e-8, 5);
  const Eigen::MatrixXd mag = s.h_eff_hat.cwiseAbs();
  const double diag_min = mag.diagonal().minCoeff();
  for (Eigen::Index r = 0; r < mag.rows(); ++r) {
    for (Eigen::Index col = 0; col < mag.cols(); ++col) {
      if (r != col) CHECK(mag(r, col) < 1e-6 * diag_min);
    }
  }
}

TEST_CASE("mimo: singular Gram matrix at alpha 0 is a numeric error") {
  MimoConfig c;
  c.antennas = 2;
  c.users = 4;
  c.rzf_alpha = 0.0;
  Rng rng(6);
  try {
    sample_mimo_scenario(rng, c);
    FAIL("rank-deficient Gram matrix accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
  }
  c.rzf_alpha = 0.2;
  CHECK_NOTHROW(sample_mimo_scenario(rng, c));
}

TEST_CASE("mimo: zero estimation error reproduces the estimate") {
  const MimoScenario s = scenario_with(0.0, 0.2, 7);
  Rng rng(8);
  const auto reals = sample_mimo_realizations(s, rng, 5);
  for (const auto& r : reals) CHECK(r.h == s.h_hat);
  CHECK((mimo_gains(s, reals[0].h) - s.nominal_gains()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mimo: estimation error moments") {
  const MimoScenario s = scenario_with(0.075, 0.2, 9);
  Rng rng(10);
  const auto reals = sample_mimo_realizations(s, rng, 50000);
  double p = 0, re2 = 0, im2 = 0, mean_re = 0;
  for (const auto& r : reals) {
    const Eigen::MatrixXcd e = r.h - s.h_hat;
    p += e.cwiseAbs2().sum();
    re2 += e.real().cwiseAbs2().sum();
    im2 += e.imag().cwiseAbs2().sum();
    mean_re += e.real().sum();
  }
  const double m = 50000.0 * 16.0;
  CHECK(std::abs(p / m - 0.075) < 0.001);
  CHECK(std::abs(re2 / m - 0.0375) < 0.0005);
  CHECK(std::abs(im2 / m - 0.0375) < 0.0005);
  CHECK(std::abs(mean_re / m) < 0.001);
}

TEST_CASE("mimo: rates follow the shared kernel and need a simplex allocation") {
  const MimoScenario s = scenario_with(0.075, 0.2, 11);
  Rng rng(12);
  const auto reals = sample_mimo_realizations(s, rng, 3);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.25);
  for (const auto& r : reals) {
    const Eigen::MatrixXcd eff = r.h.adjoint() * s.beamformers;
    for (int k = 0; k < 4; ++k) {
      double interference = 0.0;
      for (int j = 0; j < 4; ++j) {
        if (j != k) interference += std::norm(eff(k, j)) * x(j);
      }
      const double sinr = std::norm(eff(k, k)) * x(k) / (interference + s.config.noise_power_w());
      CHECK(mimo_rates(s, r, x)(k) == doctest::Approx(1e7 * std::log2(1.0 + sinr)).epsilon(1e-12));
    }
    CHECK(mimo_min_rate(s, r, x) == doctest::Approx(mimo_rates(s, r, x).minCoeff()));
  }
  CHECK_THROWS_AS(mimo_min_rate(s, reals[0], Eigen::VectorXd::Constant(4, 0.3)), Error);
}

TEST_CASE("mimo property: common phase rotation of a user changes nothing") {
  const MimoScenario s = scenario_with(0.075, 0.2, 13);
  Eigen::MatrixXcd rotated = s.h_hat;
  rotated.col(1) *= std::polar(1.0, 1.234);
  rotated.col(3) *= std::polar(1.0, -2.5);
  const MimoScenario r = make_mimo_scenario(s.config, rotated);
  CHECK((r.features() - s.features()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.nominal_gains() - s.nominal_gains()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mimo property: more noise never raises the min-rate") {
  MimoScenario s = scenario_with(0.075, 0.2, 14);
  Rng rng(15);
  const auto reals = sample_mimo_realizations(s, rng, 20);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.25);
  for (const auto& r : reals) {
    double prev = mimo_min_rate(s, r, x);
    for (double psd : {-70.0, -60.0, -50.0}) {
      MimoScenario louder = s;
      louder.config.noise_psd_dbm_hz = psd;
      const double now = mimo_min_rate(louder, r, x);
      CHECK(now <= prev);
      prev = now;
    }
  }
}

TEST_CASE("mimo: min-rate gradient matches finite differences") {
  const MimoScenario s = scenario_with(0.075, 0.2, 16);
  Rng rng(17);
  const auto reals = sample_mimo_realizations(s, rng, 20);
  const Eigen::VectorXd x(Eigen::Vector4d(0.1, 0.2, 0.3, 0.25));
  for (const auto& r : reals) {
    const Eigen::VectorXd g = mimo_rate_gradient(s, r, x);
    Eigen::Index a = 0;
    min_rate(mimo_gains(s, r.h), x, s.config.budget(), &a);
    for (int j = 0; j < 4; ++j) {
      Eigen::VectorXd up = x, down = x;
      up(j) += 1e-7;
      down(j) -= 1e-7;
      const double fd = (mimo_rates(s, r, up)(a) - mimo_rates(s, r, down)(a)) / 2e-7;
      CHECK(fd == doctest::Approx(g(j)).epsilon(1e-5).scale(1e-3 * g.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("mimo: alpha selection") {
  MimoConfig c;
  const double single[] = {0.7};
  const AlphaSelection one = select_alpha(c, single, 5, 5, 1);
  CHECK(one.alpha == 0.7);
  REQUIRE(one.median_min_rate.size() == 1);

  const double grid[] = {0.01, 0.05, 0.1, 0.2, 0.5, 1.0};
  const AlphaSelection a = select_alpha(c, grid, 100, 50, 3);
  const AlphaSelection b = select_alpha(c, grid, 100, 50, 3);
  CHECK(a.alpha == b.alpha);
  CHECK(a.median_min_rate == b.median_min_rate);
  for (double m : a.median_min_rate) CHECK(m > 0.0);

  MimoConfig noisy = c;
  noisy.sigma_e2 = 0.3;
  MimoConfig clean = c;
  clean.sigma_e2 = 0.0;
  CHECK(select_alpha(noisy, grid, 100, 50, 3).alpha >= select_alpha(clean, grid, 100, 50, 3).alpha);

  const std::span<const double> empty;
  CHECK_THROWS_AS(select_alpha(c, empty, 5, 5, 1), Error);
}

TEST_CASE("mimo: scenario file round trip") {
  const MimoScenario s = scenario_with(0.075, 0.2, 18);
  std::stringstream ss;
  write_mimo_scenario(ss, s);
  const MimoScenario r = read_mimo_scenario(ss);
  CHECK(r.h_hat == s.h_hat);
  CHECK(r.beamformers == s.beamformers);
  CHECK(r.config.sigma_e2 == s.config.sigma_e2);
  CHECK(r.features() == s.features());

  std::stringstream again;
  write_mimo_scenario(again, r);
  std::stringstream first;
  write_mimo_scenario(first, s);
  CHECK(again.str() == first.str());

  std::stringstream truncated(first.str().substr(0, first.str().size() / 2));
  CHECK_THROWS_AS(read_mimo_scenario(truncated), Error);
}
