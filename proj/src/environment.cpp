#include "uinject/environment.hpp"

#include "uinject/error.hpp"

namespace uinject {

namespace {

template <typename T>
const T& expect_scenario(const AnyScenario& scenario, const char* environment) {
  const T* s = std::get_if<T>(&scenario);
  if (!s) throw_usage(std::string("scenario does not belong to the ") + environment + " environment");
  return *s;
}

}  // namespace

const char* to_string(EnvironmentKind kind) {
  return kind == EnvironmentKind::kMimo ? "mimo" : "d2d";
}

MimoEnvironment::MimoEnvironment(MimoConfig config) : config_(config) { config_.validate(); }

Eigen::Index MimoEnvironment::input_dim() const {
  return static_cast<Eigen::Index>(config_.users) * config_.users;
}

AnyScenario MimoEnvironment::sample_scenario(Rng& rng) const {
  return sample_mimo_scenario(rng, config_);
}

Eigen::VectorXd MimoEnvironment::features(const AnyScenario& scenario) const {
  return expect_scenario<MimoScenario>(scenario, "MIMO").features();
}

Eigen::MatrixXd MimoEnvironment::nominal_gains(const AnyScenario& scenario) const {
  return expect_scenario<MimoScenario>(scenario, "MIMO").nominal_gains();
}

void MimoEnvironment::draw_gains(const AnyScenario& scenario, Rng& rng,
                                 Eigen::MatrixXd& gains) const {
  const auto& s = expect_scenario<MimoScenario>(scenario, "MIMO");
  thread_local Eigen::MatrixXcd h;
  draw_mimo_realization(s, rng, h);
  gains = mimo_gains(s, h);
}

D2dEnvironment::D2dEnvironment(D2dConfig config, InputNormalizer normalizer)
    : config_(config), normalizer_(std::move(normalizer)) {
  config_.validate();
  if (!normalizer_.fitted()) throw_usage("D2D environment needs a fitted input normalizer");
  if (normalizer_.mean().size() != input_dim()) {
    throw_config("input normalizer size does not match N^2 for this D2D configuration");
  }
}

D2dEnvironment D2dEnvironment::with_fitted_normalizer(const D2dConfig& config, std::size_t layouts,
                                                      std::uint64_t seed) {
  Rng rng = make_rng(seed, Stream::kNormalizer);
  std::vector<D2dScenario> corpus;
  corpus.reserve(layouts);
  for (std::size_t i = 0; i < layouts; ++i) corpus.push_back(sample_d2d_layout(rng, config));
  return D2dEnvironment(config, InputNormalizer::fit(corpus));
}

Eigen::Index D2dEnvironment::input_dim() const {
  return static_cast<Eigen::Index>(config_.links) * config_.links;
}

AnyScenario D2dEnvironment::sample_scenario(Rng& rng) const {
  return sample_d2d_layout(rng, config_);
}

Eigen::VectorXd D2dEnvironment::features(const AnyScenario& scenario) const {
  return normalizer_.normalize(expect_scenario<D2dScenario>(scenario, "D2D").pathloss_gain);
}

Eigen::MatrixXd D2dEnvironment::nominal_gains(const AnyScenario& scenario) const {
  return expect_scenario<D2dScenario>(scenario, "D2D").nominal_gains();
}

void D2dEnvironment::draw_gains(const AnyScenario& scenario, Rng& rng,
                                Eigen::MatrixXd& gains) const {
  const auto& s = expect_scenario<D2dScenario>(scenario, "D2D");
  draw_d2d_realization(s, rng, gains);
  gains *= s.config.max_power_w();
}

}  // namespace uinject
