#pragma once

// A problem family seen by the trainer: how to draw a measured scenario q,
// what the network sees of it, and how to draw true-parameter realizations p
// conditioned on it (as power-scaled gain matrices).

#include <memory>
#include <variant>

#include <Eigen/Dense>

#include "uinject/d2d.hpp"
#include "uinject/interference.hpp"
#include "uinject/mimo.hpp"
#include "uinject/mlp.hpp"
#include "uinject/rng.hpp"

namespace uinject {

using AnyScenario = std::variant<MimoScenario, D2dScenario>;

enum class EnvironmentKind { kMimo, kD2d };

const char* to_string(EnvironmentKind kind);

class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvironmentKind kind() const = 0;
  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual OutputActivation output_activation() const = 0;
  virtual PowerConstraint constraint() const = 0;
  virtual LinkBudget budget() const = 0;

  virtual AnyScenario sample_scenario(Rng& rng) const = 0;
  virtual Eigen::VectorXd features(const AnyScenario& scenario) const = 0;
  // Gains of p = q.
  virtual Eigen::MatrixXd nominal_gains(const AnyScenario& scenario) const = 0;
  // One draw of p given q.
  virtual void draw_gains(const AnyScenario& scenario, Rng& rng, Eigen::MatrixXd& gains) const = 0;
};

class MimoEnvironment final : public Environment {
 public:
  explicit MimoEnvironment(MimoConfig config);

  const MimoConfig& config() const { return config_; }

  EnvironmentKind kind() const override { return EnvironmentKind::kMimo; }
  Eigen::Index input_dim() const override;
  Eigen::Index output_dim() const override { return config_.users; }
  OutputActivation output_activation() const override { return OutputActivation::kSoftmax; }
  PowerConstraint constraint() const override { return PowerConstraint::kSimplex; }
  LinkBudget budget() const override { return config_.budget(); }

  AnyScenario sample_scenario(Rng& rng) const override;
  Eigen::VectorXd features(const AnyScenario& scenario) const override;
  Eigen::MatrixXd nominal_gains(const AnyScenario& scenario) const override;
  void draw_gains(const AnyScenario& scenario, Rng& rng, Eigen::MatrixXd& gains) const override;

 private:
  MimoConfig config_;
};

class D2dEnvironment final : public Environment {
 public:
  D2dEnvironment(D2dConfig config, InputNormalizer normalizer);

  // Fits the normalizer on `layouts` fresh layouts from `seed`.
  static D2dEnvironment with_fitted_normalizer(const D2dConfig& config, std::size_t layouts,
                                               std::uint64_t seed);

  const D2dConfig& config() const { return config_; }
  const InputNormalizer& normalizer() const { return normalizer_; }

  EnvironmentKind kind() const override { return EnvironmentKind::kD2d; }
  Eigen::Index input_dim() const override;
  Eigen::Index output_dim() const override { return config_.links; }
  OutputActivation output_activation() const override { return OutputActivation::kSigmoid; }
  PowerConstraint constraint() const override { return PowerConstraint::kBox; }
  LinkBudget budget() const override { return config_.budget(); }

  AnyScenario sample_scenario(Rng& rng) const override;
  Eigen::VectorXd features(const AnyScenario& scenario) const override;
  Eigen::MatrixXd nominal_gains(const AnyScenario& scenario) const override;
  void draw_gains(const AnyScenario& scenario, Rng& rng, Eigen::MatrixXd& gains) const override;

 private:
  D2dConfig config_;
  InputNormalizer normalizer_;
};

}  // namespace uinject
