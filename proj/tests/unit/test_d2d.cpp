#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "uinject/d2d.hpp"
#include "uinject/error.hpp"

using namespace uinject;

namespace {

D2dScenario layout(char setting, std::uint64_t seed) {
  Rng rng(seed);
  return sample_d2d_layout(rng, d2d_setting(setting));
}

template <typename F>
void expect_kind(ErrorKind kind, F&& f) {
  try {
    f();
    FAIL("no error raised");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_CASE("d2d: settings") {
  const D2dConfig a = d2d_setting('A');
  CHECK(a.links == 10);
  CHECK(a.region_m == 150.0);
  CHECK(a.min_direct_m == 5.0);
  CHECK(a.max_direct_m == 15.0);
  const D2dConfig b = d2d_setting('B');
  CHECK(b.links == 10);
  CHECK(b.region_m == 200.0);
  CHECK(b.min_direct_m == 20.0);
  CHECK(b.max_direct_m == 30.0);
  const D2dConfig c = d2d_setting('C');
  CHECK(c.links == 15);
  CHECK(c.region_m == 300.0);
  CHECK(c.min_direct_m == 10.0);
  CHECK(c.max_direct_m == 30.0);
  expect_kind(ErrorKind::kConfig, [] { d2d_setting('D'); });
}

TEST_CASE("d2d: noise and power budget") {
  const D2dConfig a = d2d_setting('A');
  CHECK(a.max_power_w() == doctest::Approx(1.0));
  CHECK(a.noise_power_w() == doctest::Approx(std::pow(10.0, -19.9) * 5e6).epsilon(1e-12));
}

TEST_CASE("d2d property: sampled layouts respect the geometry") {
  for (char setting : {'A', 'B', 'C'}) {
    const D2dConfig c = d2d_setting(setting);
    Rng rng(static_cast<std::uint64_t>(setting));
    const int layouts = setting == 'A' ? 10000 : 2000;
    double worst_cross = 1e9, lo = 1e9, hi = 0.0;
    bool inside = true;
    for (int n = 0; n < layouts; ++n) {
      const D2dScenario s = sample_d2d_layout(rng, c);
      REQUIRE(s.links() == c.links);
      for (int i = 0; i < s.links(); ++i) {
        const double d = distance(s.tx[i], s.rx[i]);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        for (const Point& p : {s.tx[i], s.rx[i]}) {
          inside = inside && p.x >= 0.0 && p.x <= c.region_m && p.y >= 0.0 && p.y <= c.region_m;
        }
        for (int j = 0; j < s.links(); ++j) {
          if (i != j) worst_cross = std::min(worst_cross, distance(s.tx[j], s.rx[i]));
        }
      }
    }
    CHECK(inside);
    CHECK(lo >= c.min_direct_m);
    CHECK(hi <= c.max_direct_m);
    CHECK(worst_cross >= c.min_cross_m);
  }
}

TEST_CASE("d2d: impossible geometry exhausts the placement budget") {
  D2dConfig c = d2d_setting('A');
  c.region_m = 10.0;
  c.links = 30;
  c.max_placement_attempts = 50;
  Rng rng(1);
  expect_kind(ErrorKind::kConfig, [&] { sample_d2d_layout(rng, c); });
}

TEST_CASE("d2d: beam pattern") {
  CHECK(beam_gain_db(0.0) == 9.0);
  CHECK(beam_gain_db(7.0) == 6.0);
  CHECK(beam_gain_db(-7.0) == 6.0);
  CHECK(beam_gain_db(10.0) == 6.0);
  CHECK(beam_gain_db(10.5) == -9.0);
  CHECK(beam_gain_db(90.0) == -9.0);
  CHECK(beam_gain_db(180.0) == -9.0);
  CHECK(beam_gain_db(-179.0) == -9.0);
  CHECK(beam_gain_db(360.0 + 5.0) == 6.0);
}

TEST_CASE("d2d: two-slope pathloss") {
  const D2dConfig c = d2d_setting('A');
  const double r_bp = breakpoint_distance_m(c);
  const double lambda = 299792458.0 / 25e9;
  CHECK(r_bp == doctest::Approx(4 * 1.5 * 1.5 / lambda).epsilon(1e-12));
  const double d = 0.2 * r_bp;
  CHECK(pathloss_db(2 * d, c) - pathloss_db(d, c) == doctest::Approx(20 * std::log10(2.0)).epsilon(1e-12));
  const double far = 2.0 * r_bp;
  CHECK(pathloss_db(2 * far, c) - pathloss_db(far, c) == doctest::Approx(40 * std::log10(2.0)).epsilon(1e-12));
  const double below = pathloss_db(r_bp * (1 - 1e-13), c);
  const double above = pathloss_db(r_bp * (1 + 1e-13), c);
  CHECK(std::abs(above - below) < 1e-9);
  const double l_bp = std::abs(20 * std::log10(lambda * lambda / (8 * std::numbers::pi * 1.5 * 1.5)));
  CHECK(pathloss_db(r_bp, c) == doctest::Approx(l_bp).epsilon(1e-12));
  double prev = pathloss_db(1.0, c);
  for (double m = 2.0; m < 2000.0; m *= 1.3) {
    CHECK(pathloss_db(m, c) >= prev);
    prev = pathloss_db(m, c);
  }
  expect_kind(ErrorKind::kUsage, [&] { pathloss_db(0.0, c); });
}

TEST_CASE("d2d: gain assembly for a hand-placed layout") {
  D2dConfig c = d2d_setting('A');
  c.links = 2;
  // Link 0 points east, link 1 sits 40 m north and points east too.
  const std::vector<Point> tx{{0, 0}, {0, 40}};
  const std::vector<Point> rx{{10, 0}, {10, 40}};
  const D2dScenario s = make_d2d_layout(c, tx, rx);
  CHECK(s.pathloss_gain_db()(0, 0) == doctest::Approx(18.0 - pathloss_db(10.0, c)).epsilon(1e-12));
  // tx1 -> rx0: tx side sees the path 76 deg off its boresight, rx side sees 104 deg; both side lobes.
  const double d = std::hypot(10.0, 40.0);
  CHECK(s.pathloss_gain_db()(0, 1) == doctest::Approx(-18.0 - pathloss_db(d, c)).epsilon(1e-12));

  // A collinear interferer lands in the main lobe of both ends.
  const std::vector<Point> tx2{{0, 0}, {30, 0}};
  const std::vector<Point> rx2{{10, 0}, {40, 0}};
  const D2dScenario t = make_d2d_layout(c, tx2, rx2);
  // tx0 -> rx1 lies on both boresights; cross links get the main lobe, never the direct gain.
  CHECK(t.pathloss_gain_db()(1, 0) == doctest::Approx(12.0 - pathloss_db(40.0, c)).epsilon(1e-12));
  // tx1 -> rx0 leaves tx1 pointing backwards and reaches rx0 from behind.
  CHECK(t.pathloss_gain_db()(0, 1) == doctest::Approx(-18.0 - pathloss_db(20.0, c)).epsilon(1e-12));
}

TEST_CASE("d2d property: no shadowing and no fading reproduce the pathloss gains") {
  D2dConfig c = d2d_setting('A');
  c.shadowing_db = 0.0;
  c.fast_fading = false;
  Rng rng(3);
  const D2dScenario s = sample_d2d_layout(rng, c);
  for (const auto& r : sample_d2d_realizations(s, rng, 4)) CHECK(r.gains == s.pathloss_gain);
}

TEST_CASE("d2d: shadowing spread is 8 dB") {
  D2dConfig c = d2d_setting('A');
  c.fast_fading = false;
  Rng rng(4);
  const D2dScenario s = sample_d2d_layout(rng, c);
  double sum = 0, sq = 0;
  std::size_t n = 0;
  Eigen::MatrixXd g;
  for (int r = 0; r < 10000; ++r) {
    draw_d2d_realization(s, rng, g);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double db = 10 * std::log10(g(i) / s.pathloss_gain(i));
      sum += db;
      sq += db * db;
      ++n;
    }
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(std::sqrt(sq / n - mean * mean) - 8.0) < 0.05);
}

// Sample correlation of neighbouring entries (k, k+1 in storage order) of the
// per-realization factor g / pathloss, pooled over realizations.
static double neighbour_correlation(const D2dScenario& s, Rng& rng, std::size_t pairs, bool in_db,
                                    double* mean_factor) {
  Eigen::MatrixXd g;
  double sa = 0, sb = 0, sab = 0, sa2 = 0, sb2 = 0, sum = 0;
  std::size_t n = 0, entries = 0;
  while (n < pairs) {
    draw_d2d_realization(s, rng, g);
    const Eigen::MatrixXd f = g.cwiseQuotient(s.pathloss_gain);
    sum += f.sum();
    entries += static_cast<std::size_t>(f.size());
    for (Eigen::Index k = 0; k + 1 < f.size() && n < pairs; ++k, ++n) {
      const double a = in_db ? 10.0 * std::log10(f.data()[k]) : f.data()[k];
      const double b = in_db ? 10.0 * std::log10(f.data()[k + 1]) : f.data()[k + 1];
      sa += a;
      sb += b;
      sab += a * b;
      sa2 += a * a;
      sb2 += b * b;
    }
  }
  const double m = static_cast<double>(n);
  if (mean_factor) *mean_factor = sum / static_cast<double>(entries);
  const double ma = sa / m, mb = sb / m;
  return (sab / m - ma * mb) / std::sqrt((sa2 / m - ma * ma) * (sb2 / m - mb * mb));
}

TEST_CASE("d2d property: fading and shadowing are independent across entries") {
  const std::size_t pairs = 1000000;
  D2dConfig c = d2d_setting('A');
  c.shadowing_db = 0.0;
  Rng rng(5);
  const D2dScenario fading_only = sample_d2d_layout(rng, c);
  double mean = 0.0;
  CHECK(std::abs(neighbour_correlation(fading_only, rng, pairs, false, &mean)) < 0.01);
  CHECK(std::abs(mean - 1.0) < 0.01);

  c = d2d_setting('A');
  c.fast_fading = false;
  const D2dScenario shadowing_only = sample_d2d_layout(rng, c);
  CHECK(std::abs(neighbour_correlation(shadowing_only, rng, pairs, true, nullptr)) < 0.01);
}

TEST_CASE("d2d: rates, straight-line check and box constraint") {
  const D2dScenario s = layout('A', 6);
  Rng rng(7);
  const auto reals = sample_d2d_realizations(s, rng, 5);
  Eigen::VectorXd x(10);
  for (int i = 0; i < 10; ++i) x(i) = 0.05 + 0.09 * i;
  const double p = s.config.max_power_w();
  const double noise = s.config.noise_power_w();
  for (const auto& r : reals) {
    const Eigen::VectorXd rates = d2d_rates(s, r, x);
    for (int i = 0; i < 10; ++i) {
      double interference = 0.0;
      for (int j = 0; j < 10; ++j) {
        if (j != i) interference += r.gains(i, j) * p * x(j);
      }
      const double expected = 5e6 * std::log2(1 + r.gains(i, i) * p * x(i) / (interference + noise));
      CHECK(rates(i) == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(d2d_min_rate(s, r, x) == doctest::Approx(rates.minCoeff()));
    CHECK(d2d_rates(s, r, Eigen::VectorXd::Zero(10)).maxCoeff() == 0.0);
  }
  expect_kind(ErrorKind::kUsage, [&] { d2d_rates(s, reals[0], Eigen::VectorXd::Constant(10, 1.1)); });
}

TEST_CASE("d2d: min-rate gradient matches finite differences") {
  // Rates sit near 1e7 while interferer slopes can be ~10, so the difference
  // quotient is taken in extended precision on a straight-line rate.
  auto rate = [](const Eigen::MatrixXd& g, const Eigen::VectorXd& x, Eigen::Index i, long double dx,
                 Eigen::Index j, const D2dConfig& c) {
    long double interference = c.noise_power_w();
    long double own = 0.0L;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const long double xk = static_cast<long double>(x(k)) + (k == j ? dx : 0.0L);
      const long double term = static_cast<long double>(g(i, k)) * c.max_power_w() * xk;
      if (k == i) {
        own = term;
      } else {
        interference += term;
      }
    }
    return static_cast<long double>(c.bandwidth_hz) * std::log2(1.0L + own / interference);
  };
  Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const D2dScenario s = sample_d2d_layout(rng, d2d_setting('A'));
    D2dRealization r = sample_d2d_realizations(s, rng, 1)[0];
    Eigen::VectorXd x(10);
    for (int i = 0; i < 10; ++i) x(i) = 0.2 + 0.06 * i;
    const Eigen::VectorXd grad = d2d_rate_gradient(s, r, x);
    Eigen::Index a = 0;
    min_rate(r.gains * s.config.max_power_w(), x, s.config.budget(), &a);
    CHECK(grad(a) >= 0.0);
    for (int j = 0; j < 10; ++j) {
      if (j != a) CHECK(grad(j) <= 0.0);
      const long double h = 1e-6L;
      const double fd = static_cast<double>(
          (rate(r.gains, x, a, h, j, s.config) - rate(r.gains, x, a, -h, j, s.config)) / (2 * h));
      worst = std::max(worst, std::abs(fd - grad(j)) / std::abs(grad(j)));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("d2d: direct links dominate their row") {
  Rng rng(9);
  int dominant = 0;
  const int layouts = 500;
  for (int n = 0; n < layouts; ++n) {
    const D2dScenario s = sample_d2d_layout(rng, d2d_setting('A'));
    for (int i = 0; i < 10; ++i) {
      std::vector<double> off;
      for (int j = 0; j < 10; ++j) {
        if (j != i) off.push_back(s.pathloss_gain(i, j));
      }
      std::nth_element(off.begin(), off.begin() + 4, off.end());
      if (s.pathloss_gain(i, i) > off[4]) ++dominant;
    }
  }
  CHECK(dominant == layouts * 10);
}

TEST_CASE("d2d: input normalizer") {
  Rng rng(10);
  std::vector<D2dScenario> corpus;
  for (int n = 0; n < 1000; ++n) corpus.push_back(sample_d2d_layout(rng, d2d_setting('A')));
  const InputNormalizer norm = InputNormalizer::fit(corpus);
  REQUIRE(norm.fitted());
  CHECK(norm.mean().size() == 100);
  CHECK(norm.stddev().minCoeff() > 0.0);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(100), sq = Eigen::VectorXd::Zero(100);
  for (const auto& s : corpus) {
    const Eigen::VectorXd z = norm.normalize(s.pathloss_gain);
    sum += z;
    sq += z.cwiseAbs2();
  }
  CHECK((sum / 1000.0).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(((sq / 1000.0).array().sqrt() - 1.0).abs().maxCoeff() < 1e-3);

  const Eigen::VectorXd flat = flatten_db(corpus[3].pathloss_gain);
  CHECK((norm.denormalize(norm.normalize(corpus[3].pathloss_gain)) - flat).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(flat(12) == doctest::Approx(10 * std::log10(corpus[3].pathloss_gain(1, 2))));

  const auto path = std::filesystem::temp_directory_path() / "uinject_test_normalizer.txt";
  norm.save(path);
  const InputNormalizer back = InputNormalizer::load(path);
  CHECK(back.mean() == norm.mean());
  CHECK(back.stddev() == norm.stddev());
  std::filesystem::remove(path);

  const InputNormalizer unfitted;
  expect_kind(ErrorKind::kUsage, [&] { unfitted.normalize(corpus[0].pathloss_gain); });
  const std::vector<D2dScenario> constant(5, corpus[0]);
  expect_kind(ErrorKind::kNumeric, [&] { InputNormalizer::fit(constant); });
  expect_kind(ErrorKind::kIo, [&] { InputNormalizer::load("/nonexistent/dir/normalizer.txt"); });
}

TEST_CASE("d2d: layout file round trip") {
  const D2dScenario s = layout('C', 11);
  std::stringstream first;
  write_d2d_layout(first, s);
  const D2dScenario r = read_d2d_layout(first);
  CHECK(r.links() == 15);
  CHECK((r.pathloss_gain - s.pathloss_gain).cwiseAbs().maxCoeff() <= 1e-12 * s.pathloss_gain.maxCoeff());
  std::stringstream again;
  write_d2d_layout(again, r);
  std::stringstream original;
  write_d2d_layout(original, s);
  CHECK(again.str() == original.str());
  std::stringstream bad("not a layout");
  CHECK_THROWS_AS(read_d2d_layout(bad), Error);
}
