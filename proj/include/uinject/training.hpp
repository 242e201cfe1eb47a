#pragma once

// Uncertainty-injection training and the nominal (no-injection) trainer, plus
// the pool evaluation both are validated and tested with.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uinject/environment.hpp"
#include "uinject/mlp.hpp"
#include "uinject/rng.hpp"

namespace uinject {

enum class TrainMode { kInject, kNominal };

const char* to_string(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::kInject;
  double gamma = 5.0;
  std::size_t inject_samples = 200;        // L
  std::size_t minibatch_size = 200;
  std::size_t minibatches_per_epoch = 20;
  std::size_t max_epochs = 100;
  std::size_t early_stop_patience = 50;
  std::size_t validation_pool = 500;
  std::size_t validation_samples = 200;    // realizations per validation scenario
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  double utility_scale = 1e-6;             // rates enter the gradient in Mbps

  void validate() const;
};

// Default hidden widths for an environment: 4 x 200 for MIMO, 5 x 6N^2 for D2D.
std::vector<Eigen::Index> default_layer_dims(const Environment& env);
MlpModel make_model(const Environment& env);

// Scenarios with fixed per-scenario realization seeds, so that every policy
// scored on the pool sees the same draws.
struct ScenarioPool {
  std::vector<AnyScenario> scenarios;
  std::vector<std::uint64_t> realization_seeds;

  std::size_t size() const { return scenarios.size(); }
};

ScenarioPool make_pool(const Environment& env, std::size_t count, std::uint64_t seed, Stream stream);

// Network inputs, one column per scenario.
Eigen::MatrixXd pool_features(const Environment& env, std::span<const AnyScenario> scenarios);

struct PolicyEvaluation {
  std::vector<double> nominal;  // min-rate at p = q, bits/s
  std::vector<double> robust;   // empirical gamma-percentile min-rate, bits/s

  double mean_nominal() const;
  double mean_robust() const;
};

// allocations: one feasible column per pool scenario. samples >= 100.
PolicyEvaluation evaluate_allocations(const Environment& env, const ScenarioPool& pool,
                                      const Eigen::MatrixXd& allocations, std::size_t samples,
                                      double gamma);
PolicyEvaluation evaluate(const MlpModel& model, const Environment& env, const ScenarioPool& pool,
                          std::size_t samples, double gamma);

// A scenario with its realization gains already drawn.
struct FrozenScenario {
  Eigen::VectorXd features;
  std::vector<Eigen::MatrixXd> gains;
};

struct ObjectiveValue {
  double value = 0.0;        // mean over kept scenarios, in scaled units
  std::size_t kept = 0;
  std::size_t skipped = 0;   // non-finite utilities
};

// Mean over the batch of the empirical gamma-percentile of each scenario's
// min-rates (times scale). With `gradients`, also its parameter gradient,
// routed through the selected realization(s) of every scenario.
ObjectiveValue percentile_objective(const MlpModel& model, const Environment& env,
                                    std::span<const FrozenScenario> batch, double gamma,
                                    double scale, Gradients* gradients = nullptr);

struct EpochRecord {
  std::size_t epoch = 0;     // 0 is the untrained model
  double val_robust = 0.0;   // bits/s
  double val_nominal = 0.0;  // bits/s
  double seconds = 0.0;      // since training start
  std::size_t skipped = 0;   // scenarios skipped during this epoch
};

struct TrainLog {
  TrainMode mode = TrainMode::kInject;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  // Model selection metric: robust for injection, nominal for the nominal trainer.
  double selection_metric(const EpochRecord& record) const;
  void write_csv(std::ostream& out) const;
};

struct TrainResult {
  MlpModel model;
  TrainLog log;
};

// Runs config.mode from `model`'s current parameters; returns the best
// validated model. Streams: TrainScenarios, Injection and Validation from
// config.seed.
TrainResult train(MlpModel model, const Environment& env, const TrainConfig& config);
TrainResult train_injected(MlpModel model, const Environment& env, TrainConfig config);
TrainResult train_nominal(MlpModel model, const Environment& env, TrainConfig config);

}  // namespace uinject
