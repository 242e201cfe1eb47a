#include "uinject/d2d.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>

#include "text_io.hpp"
#include "uinject/error.hpp"

namespace uinject {

namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr const char* kLayoutMagic = "uinject-d2d-layout";
constexpr const char* kNormalizerMagic = "uinject-input-normalizer";
constexpr int kFormatVersion = 1;
constexpr double kLn10Over10 = std::numbers::ln10 / 10.0;  // 10^(s/10) = exp(s ln10 / 10)

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

// Signed angle from `boresight` to `path`, degrees in [-180, 180].
double angle_between_deg(const Point& boresight, const Point& path) {
  const double cross = boresight.x * path.y - boresight.y * path.x;
  const double dot = boresight.x * path.x + boresight.y * path.y;
  return std::atan2(cross, dot) * 180.0 / std::numbers::pi;
}

Point minus(const Point& a, const Point& b) { return {a.x - b.x, a.y - b.y}; }

// The direct gain is reserved for a link's own pair; an exactly aligned
// interferer still only sees the main lobe.
double cross_beam_gain_db(double angle_deg, const D2dConfig& config) {
  const double g = beam_gain_db(angle_deg, config);
  return g == config.direct_beam_db ? config.main_lobe_db : g;
}

}  // namespace

double D2dConfig::max_power_w() const { return dbm_to_watts(max_power_dbm); }

double D2dConfig::noise_power_w() const { return dbm_to_watts(noise_psd_dbm_hz) * bandwidth_hz; }

void D2dConfig::validate() const {
  if (links < 1) throw_config("D2D needs at least one link");
  if (!(region_m > 0.0)) throw_config("D2D region side must be positive");
  if (!(min_direct_m > 0.0) || !(max_direct_m >= min_direct_m)) {
    throw_config("D2D direct-link distance range must satisfy 0 < min <= max");
  }
  if (!(min_cross_m >= 0.0)) throw_config("D2D minimum cross distance must be >= 0");
  if (!(bandwidth_hz > 0.0) || !(carrier_hz > 0.0)) {
    throw_config("D2D bandwidth and carrier must be positive");
  }
  if (!(tx_height_m > 0.0) || !(rx_height_m > 0.0)) throw_config("antenna heights must be positive");
  if (!(shadowing_db >= 0.0)) throw_config("shadowing deviation must be >= 0");
  if (!(main_lobe_half_width_deg >= 0.0)) throw_config("main lobe half width must be >= 0");
  if (max_placement_attempts < 1) throw_config("placement attempts must be >= 1");
}

D2dConfig d2d_setting(char name) {
  D2dConfig c;
  switch (name) {
    case 'A':
    case 'a':
      c.links = 10;
      c.region_m = 150.0;
      c.min_direct_m = 5.0;
      c.max_direct_m = 15.0;
      break;
    case 'B':
    case 'b':
      c.links = 10;
      c.region_m = 200.0;
      c.min_direct_m = 20.0;
      c.max_direct_m = 30.0;
      break;
    case 'C':
    case 'c':
      c.links = 15;
      c.region_m = 300.0;
      c.min_direct_m = 10.0;
      c.max_direct_m = 30.0;
      break;
    default:
      throw_config(std::string("unknown D2D setting '") + name + "' (expected A, B or C)");
  }
  return c;
}

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

Eigen::MatrixXd D2dScenario::nominal_gains() const { return pathloss_gain * config.max_power_w(); }

Eigen::MatrixXd D2dScenario::pathloss_gain_db() const {
  return pathloss_gain.unaryExpr([](double g) { return 10.0 * std::log10(g); });
}

double beam_gain_db(double angle_off_boresight_deg, const D2dConfig& config) {
  double a = std::fmod(angle_off_boresight_deg, 360.0);
  if (a > 180.0) a -= 360.0;
  if (a < -180.0) a += 360.0;
  if (a == 0.0) return config.direct_beam_db;
  if (std::abs(a) <= config.main_lobe_half_width_deg) return config.main_lobe_db;
  return config.side_lobe_db;
}

double breakpoint_distance_m(const D2dConfig& config) {
  const double lambda = kSpeedOfLight / config.carrier_hz;
  return 4.0 * config.tx_height_m * config.rx_height_m / lambda;
}

double pathloss_db(double distance_m, const D2dConfig& config) {
  if (!(distance_m > 0.0)) throw_usage("pathloss distance must be positive");
  const double lambda = kSpeedOfLight / config.carrier_hz;
  const double r_bp = breakpoint_distance_m(config);
  const double l_bp = std::abs(
      20.0 * std::log10(lambda * lambda /
                        (8.0 * std::numbers::pi * config.tx_height_m * config.rx_height_m)));
  const double slope = distance_m <= r_bp ? 20.0 : 40.0;
  return l_bp + slope * std::log10(distance_m / r_bp);
}

D2dScenario make_d2d_layout(const D2dConfig& config, std::vector<Point> tx, std::vector<Point> rx) {
  config.validate();
  if (tx.size() != rx.size() || tx.size() != static_cast<std::size_t>(config.links)) {
    throw_config("layout needs exactly N transmitters and N receivers");
  }
  const std::size_t n = tx.size();
  D2dScenario s;
  s.config = config;
  s.pathloss_gain.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Point rx_boresight = minus(tx[i], rx[i]);
    for (std::size_t j = 0; j < n; ++j) {
      const double d = distance(tx[j], rx[i]);
      double gain_db = -pathloss_db(d, config);
      if (i == j) {
        gain_db += 2.0 * config.direct_beam_db;
      } else {
        const Point tx_boresight = minus(rx[j], tx[j]);
        gain_db += cross_beam_gain_db(angle_between_deg(tx_boresight, minus(rx[i], tx[j])), config);
        gain_db += cross_beam_gain_db(angle_between_deg(rx_boresight, minus(tx[j], rx[i])), config);
      }
      s.pathloss_gain(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::pow(10.0, gain_db / 10.0);
    }
  }
  s.tx = std::move(tx);
  s.rx = std::move(rx);
  return s;
}

D2dScenario sample_d2d_layout(Rng& rng, const D2dConfig& config) {
  config.validate();
  std::uniform_real_distribution<double> coord(0.0, config.region_m);
  std::uniform_real_distribution<double> length(config.min_direct_m, config.max_direct_m);
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);

  std::vector<Point> tx;
  std::vector<Point> rx;
  tx.reserve(static_cast<std::size_t>(config.links));
  rx.reserve(static_cast<std::size_t>(config.links));
  for (int link = 0; link < config.links; ++link) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_placement_attempts && !placed; ++attempt) {
      const Point t{coord(rng), coord(rng)};
      const double d = length(rng);
      const double phi = heading(rng);
      const Point r{t.x + d * std::cos(phi), t.y + d * std::sin(phi)};
      if (r.x < 0.0 || r.x > config.region_m || r.y < 0.0 || r.y > config.region_m) continue;
      bool separated = true;
      for (std::size_t j = 0; j < tx.size() && separated; ++j) {
        separated = distance(t, rx[j]) >= config.min_cross_m && distance(tx[j], r) >= config.min_cross_m;
      }
      if (!separated) continue;
      tx.push_back(t);
      rx.push_back(r);
      placed = true;
    }
    if (!placed) {
      throw_config("could not place D2D link " + std::to_string(link) + " within " +
                   std::to_string(config.max_placement_attempts) + " attempts");
    }
  }
  return make_d2d_layout(config, std::move(tx), std::move(rx));
}

void draw_d2d_realization(const D2dScenario& scenario, Rng& rng, Eigen::MatrixXd& gains) {
  const D2dConfig& c = scenario.config;
  gains.resize(scenario.pathloss_gain.rows(), scenario.pathloss_gain.cols());
  std::normal_distribution<double> shadow(0.0, c.shadowing_db);
  std::exponential_distribution<double> fading(1.0);
  for (Eigen::Index j = 0; j < gains.cols(); ++j) {
    for (Eigen::Index i = 0; i < gains.rows(); ++i) {
      double g = scenario.pathloss_gain(i, j);
      if (c.shadowing_db > 0.0) g *= std::exp(shadow(rng) * kLn10Over10);
      if (c.fast_fading) g *= fading(rng);
      gains(i, j) = g;
    }
  }
}

std::vector<D2dRealization> sample_d2d_realizations(const D2dScenario& scenario, Rng& rng,
                                                    std::size_t count) {
  if (count == 0) throw_usage("need at least one realization");
  std::vector<D2dRealization> out(count);
  for (D2dRealization& r : out) draw_d2d_realization(scenario, rng, r.gains);
  return out;
}

Eigen::VectorXd d2d_rates(const D2dScenario& scenario, const D2dRealization& realization,
                          const Eigen::VectorXd& x) {
  check_feasible(x, PowerConstraint::kBox);
  return link_rates(realization.gains * scenario.config.max_power_w(), x, scenario.config.budget());
}

double d2d_min_rate(const D2dScenario& scenario, const D2dRealization& realization,
                    const Eigen::VectorXd& x) {
  check_feasible(x, PowerConstraint::kBox);
  return min_rate(realization.gains * scenario.config.max_power_w(), x, scenario.config.budget());
}

Eigen::VectorXd d2d_rate_gradient(const D2dScenario& scenario, const D2dRealization& realization,
                                  const Eigen::VectorXd& x) {
  check_feasible(x, PowerConstraint::kBox);
  return min_rate_gradient(realization.gains * scenario.config.max_power_w(), x,
                           scenario.config.budget());
}

Eigen::VectorXd flatten_db(const Eigen::MatrixXd& pathloss_gain) {
  const Eigen::Index n = pathloss_gain.rows();
  Eigen::VectorXd v(n * pathloss_gain.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < pathloss_gain.cols(); ++j) {
      v(i * pathloss_gain.cols() + j) = 10.0 * std::log10(pathloss_gain(i, j));
    }
  }
  return v;
}

InputNormalizer::InputNormalizer(Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {
  if (mean_.size() != stddev_.size()) throw_config("normalizer mean/stddev sizes differ");
  for (Eigen::Index i = 0; i < stddev_.size(); ++i) {
    if (!(stddev_(i) > 0.0) || !std::isfinite(stddev_(i))) {
      throw_numeric("normalizer input " + std::to_string(i) + " has zero or non-finite spread");
    }
  }
}

InputNormalizer InputNormalizer::fit(std::span<const D2dScenario> corpus) {
  if (corpus.size() < 2) throw_usage("normalizer needs at least two training layouts");
  const Eigen::Index dim = corpus.front().pathloss_gain.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(corpus.size());
  for (const D2dScenario& s : corpus) {
    if (s.pathloss_gain.size() != dim) throw_config("normalizer corpus mixes network sizes");
    rows.push_back(flatten_db(s.pathloss_gain));
    sum += rows.back();
  }
  const double n = static_cast<double>(corpus.size());
  Eigen::VectorXd mean = sum / n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const Eigen::VectorXd& r : rows) var += (r - mean).cwiseAbs2();
  return InputNormalizer(std::move(mean), (var / n).cwiseSqrt());
}

Eigen::VectorXd InputNormalizer::normalize_db(const Eigen::VectorXd& flattened_db) const {
  if (!fitted()) throw_usage("input normalizer used before fitting");
  if (flattened_db.size() != mean_.size()) throw_config("normalizer input size mismatch");
  return (flattened_db - mean_).cwiseQuotient(stddev_);
}

Eigen::VectorXd InputNormalizer::normalize(const Eigen::MatrixXd& pathloss_gain) const {
  return normalize_db(flatten_db(pathloss_gain));
}

Eigen::VectorXd InputNormalizer::denormalize(const Eigen::VectorXd& z) const {
  if (!fitted()) throw_usage("input normalizer used before fitting");
  if (z.size() != mean_.size()) throw_config("normalizer input size mismatch");
  return z.cwiseProduct(stddev_) + mean_;
}

void InputNormalizer::save(const std::filesystem::path& path) const {
  if (!fitted()) throw_usage("cannot save an unfitted normalizer");
  std::ofstream out(path);
  if (!out) throw_io("cannot open normalizer for writing: " + path.string());
  out << kNormalizerMagic << '\n' << "format_version " << kFormatVersion << '\n';
  out << "size " << mean_.size() << '\n' << "mean";
  for (Eigen::Index i = 0; i < mean_.size(); ++i) out << ' ' << detail::format_double(mean_(i));
  out << '\n' << "stddev";
  for (Eigen::Index i = 0; i < stddev_.size(); ++i) out << ' ' << detail::format_double(stddev_(i));
  out << '\n' << "end\n";
  if (!out) throw_io("failed writing normalizer: " + path.string());
}

InputNormalizer InputNormalizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open normalizer: " + path.string());
  detail::TokenReader reader(in, "normalizer " + path.string());
  reader.expect(kNormalizerMagic);
  reader.expect("format_version");
  if (const auto v = reader.next_int(); v != kFormatVersion) {
    throw_format("normalizer format_version " + std::to_string(v) + " is not supported");
  }
  reader.expect("size");
  const auto n = reader.next_int();
  if (n <= 0 || n > (1 << 20)) throw_format("implausible normalizer size");
  Eigen::VectorXd mean(n);
  Eigen::VectorXd stddev(n);
  reader.expect("mean");
  for (Eigen::Index i = 0; i < n; ++i) mean(i) = reader.next_double();
  reader.expect("stddev");
  for (Eigen::Index i = 0; i < n; ++i) stddev(i) = reader.next_double();
  reader.expect("end");
  return InputNormalizer(std::move(mean), std::move(stddev));
}

void write_d2d_layout(std::ostream& out, const D2dScenario& scenario) {
  const D2dConfig& c = scenario.config;
  auto f = [](double v) { return detail::format_double(v); };
  out << kLayoutMagic << '\n' << "format_version " << kFormatVersion << '\n';
  out << "links " << scenario.links() << '\n';
  out << "region_m " << f(c.region_m) << '\n';
  out << "direct_range_m " << f(c.min_direct_m) << ' ' << f(c.max_direct_m) << '\n';
  out << "min_cross_m " << f(c.min_cross_m) << '\n';
  out << "max_power_dbm " << f(c.max_power_dbm) << '\n';
  out << "bandwidth_hz " << f(c.bandwidth_hz) << '\n';
  out << "noise_psd_dbm_hz " << f(c.noise_psd_dbm_hz) << '\n';
  out << "shadowing_db " << f(c.shadowing_db) << '\n';
  out << "fast_fading " << (c.fast_fading ? 1 : 0) << '\n';
  out << "carrier_hz " << f(c.carrier_hz) << '\n';
  out << "positions\n";
  for (int i = 0; i < scenario.links(); ++i) {
    out << f(scenario.tx[i].x) << ' ' << f(scenario.tx[i].y) << ' ' << f(scenario.rx[i].x) << ' '
        << f(scenario.rx[i].y) << '\n';
  }
  out << "pathloss_gain_db\n";
  const Eigen::MatrixXd db = scenario.pathloss_gain_db();
  for (Eigen::Index i = 0; i < db.rows(); ++i) {
    for (Eigen::Index j = 0; j < db.cols(); ++j) out << (j ? " " : "") << f(db(i, j));
    out << '\n';
  }
  out << "end\n";
}

D2dScenario read_d2d_layout(std::istream& in) {
  detail::TokenReader reader(in, "d2d layout");
  reader.expect(kLayoutMagic);
  reader.expect("format_version");
  if (const auto v = reader.next_int(); v != kFormatVersion) {
    throw_format("d2d layout format_version " + std::to_string(v) + " is not supported");
  }
  D2dConfig c;
  reader.expect("links");
  const auto n = reader.next_int();
  if (n < 1 || n > 100000) throw_format("implausible link count in layout");
  c.links = static_cast<int>(n);
  reader.expect("region_m");
  c.region_m = reader.next_double();
  reader.expect("direct_range_m");
  c.min_direct_m = reader.next_double();
  c.max_direct_m = reader.next_double();
  reader.expect("min_cross_m");
  c.min_cross_m = reader.next_double();
  reader.expect("max_power_dbm");
  c.max_power_dbm = reader.next_double();
  reader.expect("bandwidth_hz");
  c.bandwidth_hz = reader.next_double();
  reader.expect("noise_psd_dbm_hz");
  c.noise_psd_dbm_hz = reader.next_double();
  reader.expect("shadowing_db");
  c.shadowing_db = reader.next_double();
  reader.expect("fast_fading");
  c.fast_fading = reader.next_int() != 0;
  reader.expect("carrier_hz");
  c.carrier_hz = reader.next_double();
  try {
    c.validate();
  } catch (const Error& e) {
    throw_format(std::string("d2d layout constants invalid: ") + e.what());
  }

  D2dScenario s;
  s.config = c;
  reader.expect("positions");
  for (int i = 0; i < c.links; ++i) {
    const double tx = reader.next_double();
    const double ty = reader.next_double();
    const double rx = reader.next_double();
    const double ry = reader.next_double();
    s.tx.push_back({tx, ty});
    s.rx.push_back({rx, ry});
  }
  reader.expect("pathloss_gain_db");
  s.pathloss_gain.resize(c.links, c.links);
  for (int i = 0; i < c.links; ++i) {
    for (int j = 0; j < c.links; ++j) s.pathloss_gain(i, j) = std::pow(10.0, reader.next_double() / 10.0);
  }
  reader.expect("end");
  return s;
}

}  // namespace uinject
