#include "uinject/training.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "text_io.hpp"
#include "uinject/error.hpp"
#include "uinject/interference.hpp"
#include "uinject/percentile.hpp"

namespace uinject {

namespace {

struct ScenarioUtility {
  double value = 0.0;
  Eigen::VectorXd grad_x;
};

// Percentile of the min-rates over `gains` at allocation x; false when any
// utility is non-finite.
bool scenario_utility(const Environment& env, const Eigen::VectorXd& x,
                      std::span<const Eigen::MatrixXd> gains, double gamma, double scale,
                      bool with_gradient, std::vector<double>& rates, ScenarioUtility& out) {
  if (!x.allFinite()) return false;
  const LinkBudget budget = env.budget();
  rates.resize(gains.size());
  for (std::size_t l = 0; l < gains.size(); ++l) {
    rates[l] = scale * min_rate(gains[l], x, budget);
    if (!std::isfinite(rates[l])) return false;
  }
  const PercentileSelection selection = empirical_percentile(rates, gamma);
  out.value = selection.value;
  if (with_gradient) {
    out.grad_x = Eigen::VectorXd::Zero(x.size());
    for (const SampleWeight& sw : percentile_gradient(selection)) {
      out.grad_x += (sw.weight * scale) * min_rate_gradient(gains[sw.sample], x, budget);
    }
    if (!out.grad_x.allFinite()) return false;
  }
  return true;
}

void check_skips(std::size_t skipped, std::size_t total) {
  // More than 1% of the batch lost to non-finite utilities aborts training.
  if (skipped * 100 > total) {
    throw_numeric(std::to_string(skipped) + " of " + std::to_string(total) +
                  " scenarios produced non-finite utilities");
  }
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double e : v) s += e;
  return s / static_cast<double>(v.size());
}

}  // namespace

const char* to_string(TrainMode mode) { return mode == TrainMode::kInject ? "inject" : "nominal"; }

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 100.0)) throw_config("train.gamma must be in (0, 100)");
  if (inject_samples < 1 || minibatch_size < 1 || minibatches_per_epoch < 1 || max_epochs < 1 ||
      early_stop_patience < 1 || validation_pool < 1 || validation_samples < 1) {
    throw_config("training counts must all be >= 1");
  }
  if (!(optimizer.learning_rate >= 0.0) || !std::isfinite(optimizer.learning_rate)) {
    throw_config("learning rate must be finite and >= 0");
  }
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0) || !(optimizer.epsilon > 0.0)) {
    throw_config("Adam needs beta1, beta2 in [0, 1) and epsilon > 0");
  }
  if (!(utility_scale > 0.0) || !std::isfinite(utility_scale)) {
    throw_config("train.utility_scale must be positive");
  }
}

std::vector<Eigen::Index> default_layer_dims(const Environment& env) {
  std::vector<Eigen::Index> dims{env.input_dim()};
  if (env.kind() == EnvironmentKind::kMimo) {
    dims.insert(dims.end(), 4, 200);
  } else {
    dims.insert(dims.end(), 5, 6 * env.input_dim());
  }
  dims.push_back(env.output_dim());
  return dims;
}

MlpModel make_model(const Environment& env) {
  return MlpModel(default_layer_dims(env), env.output_activation());
}

ScenarioPool make_pool(const Environment& env, std::size_t count, std::uint64_t seed, Stream stream) {
  Rng rng = make_rng(seed, stream);
  ScenarioPool pool;
  pool.scenarios.reserve(count);
  pool.realization_seeds.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    pool.scenarios.push_back(env.sample_scenario(rng));
    pool.realization_seeds.push_back(rng());
  }
  return pool;
}

Eigen::MatrixXd pool_features(const Environment& env, std::span<const AnyScenario> scenarios) {
  Eigen::MatrixXd features(env.input_dim(), static_cast<Eigen::Index>(scenarios.size()));
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    features.col(static_cast<Eigen::Index>(i)) = env.features(scenarios[i]);
  }
  return features;
}

double PolicyEvaluation::mean_nominal() const { return mean(nominal); }
double PolicyEvaluation::mean_robust() const { return mean(robust); }

namespace {

PolicyEvaluation evaluate_unchecked(const Environment& env, const ScenarioPool& pool,
                                    const Eigen::MatrixXd& allocations, std::size_t samples,
                                    double gamma) {
  if (allocations.cols() != static_cast<Eigen::Index>(pool.size()) ||
      allocations.rows() != env.output_dim()) {
    throw_usage("allocations must have one column of length output_dim per pool scenario");
  }
  const LinkBudget budget = env.budget();
  PolicyEvaluation result;
  result.nominal.resize(pool.size());
  result.robust.resize(pool.size());
  std::vector<double> rates(samples);
  Eigen::MatrixXd gains;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Eigen::VectorXd x = allocations.col(static_cast<Eigen::Index>(i));
    check_feasible(x, env.constraint());
    result.nominal[i] = min_rate(env.nominal_gains(pool.scenarios[i]), x, budget);
    Rng rng(pool.realization_seeds[i]);
    for (std::size_t l = 0; l < samples; ++l) {
      env.draw_gains(pool.scenarios[i], rng, gains);
      rates[l] = min_rate(gains, x, budget);
    }
    result.robust[i] = empirical_percentile(rates, gamma).value;
  }
  return result;
}

}  // namespace

PolicyEvaluation evaluate_allocations(const Environment& env, const ScenarioPool& pool,
                                      const Eigen::MatrixXd& allocations, std::size_t samples,
                                      double gamma) {
  if (samples < 100) throw_usage("evaluation needs at least 100 realizations per scenario");
  return evaluate_unchecked(env, pool, allocations, samples, gamma);
}

PolicyEvaluation evaluate(const MlpModel& model, const Environment& env, const ScenarioPool& pool,
                          std::size_t samples, double gamma) {
  return evaluate_allocations(env, pool, forward_batch(model, pool_features(env, pool.scenarios)),
                              samples, gamma);
}

ObjectiveValue percentile_objective(const MlpModel& model, const Environment& env,
                                    std::span<const FrozenScenario> batch, double gamma,
                                    double scale, Gradients* gradients) {
  if (batch.empty()) throw_usage("percentile objective needs a non-empty batch");
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd inputs(env.input_dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) inputs.col(i) = batch[static_cast<std::size_t>(i)].features;

  GradientTape tape;
  const Eigen::MatrixXd x = forward_batch(model, inputs, gradients ? &tape : nullptr);

  ObjectiveValue result;
  Eigen::MatrixXd output_gradient;
  if (gradients) output_gradient = Eigen::MatrixXd::Zero(x.rows(), n);
  std::vector<double> rates;
  ScenarioUtility utility;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& scenario = batch[static_cast<std::size_t>(i)];
    if (scenario.gains.empty()) throw_usage("frozen scenario has no realizations");
    if (!scenario_utility(env, x.col(i), scenario.gains, gamma, scale, gradients != nullptr, rates,
                          utility)) {
      ++result.skipped;
      continue;
    }
    ++result.kept;
    total += utility.value;
    if (gradients) output_gradient.col(i) = utility.grad_x;
  }
  if (result.kept == 0) {
    throw_numeric("every scenario in the batch produced a non-finite utility");
  }
  const double inv = 1.0 / static_cast<double>(result.kept);
  result.value = total * inv;
  if (gradients) *gradients = backward(model, tape, output_gradient * inv);
  return result;
}

double TrainLog::selection_metric(const EpochRecord& record) const {
  return mode == TrainMode::kInject ? record.val_robust : record.val_nominal;
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "epoch,val_robust,val_nominal,seconds\n";
  for (const EpochRecord& r : epochs) {
    out << r.epoch << ',' << detail::format_double(r.val_robust) << ','
        << detail::format_double(r.val_nominal) << ',' << detail::format_double(r.seconds) << '\n';
  }
}

TrainResult train(MlpModel model, const Environment& env, const TrainConfig& config) {
  config.validate();
  if (model.input_dim() != env.input_dim() || model.output_dim() != env.output_dim()) {
    throw_config("model widths do not match the environment (" +
                 std::to_string(model.input_dim()) + " -> " + std::to_string(model.output_dim()) +
                 ", expected " + std::to_string(env.input_dim()) + " -> " +
                 std::to_string(env.output_dim()) + ")");
  }
  if (model.output_activation() != env.output_activation()) {
    throw_config("model output activation does not match the environment's power constraint");
  }

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  Rng scenario_rng = make_rng(config.seed, Stream::kTrainScenarios);
  Rng injection_rng = make_rng(config.seed, Stream::kInjection);
  const ScenarioPool validation =
      make_pool(env, config.validation_pool, config.seed, Stream::kValidation);

  TrainLog log;
  log.mode = config.mode;
  auto validate_model = [&](const MlpModel& m, std::size_t epoch, std::size_t skipped) {
    const PolicyEvaluation eval = evaluate_unchecked(
        env, validation, forward_batch(m, pool_features(env, validation.scenarios)),
        config.validation_samples, config.gamma);
    log.epochs.push_back({epoch, eval.mean_robust(), eval.mean_nominal(), elapsed(), skipped});
  };

  validate_model(model, 0, 0);
  MlpModel best = model;
  double best_metric = log.selection_metric(log.epochs.back());

  const bool inject = config.mode == TrainMode::kInject;
  std::vector<FrozenScenario> batch(config.minibatch_size);
  for (FrozenScenario& s : batch) s.gains.resize(inject ? config.inject_samples : 1);

  Gradients gradients;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::size_t skipped = 0;
    for (std::size_t b = 0; b < config.minibatches_per_epoch; ++b) {
      for (FrozenScenario& s : batch) {
        const AnyScenario scenario = env.sample_scenario(scenario_rng);
        s.features = env.features(scenario);
        if (inject) {
          for (Eigen::MatrixXd& g : s.gains) env.draw_gains(scenario, injection_rng, g);
        } else {
          s.gains.front() = env.nominal_gains(scenario);
        }
      }
      const ObjectiveValue objective = percentile_objective(
          model, env, batch, config.gamma, config.utility_scale, &gradients);
      check_skips(objective.skipped, batch.size());
      skipped += objective.skipped;
      step(model, gradients, config.optimizer);
    }

    validate_model(model, epoch, skipped);
    const double metric = log.selection_metric(log.epochs.back());
    if (metric > best_metric) {
      best_metric = metric;
      best = model;
      log.best_epoch = epoch;
    }
    if (epoch - log.best_epoch >= config.early_stop_patience) {
      log.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  return {std::move(best), std::move(log)};
}

TrainResult train_injected(MlpModel model, const Environment& env, TrainConfig config) {
  config.mode = TrainMode::kInject;
  return train(std::move(model), env, config);
}

TrainResult train_nominal(MlpModel model, const Environment& env, TrainConfig config) {
  config.mode = TrainMode::kNominal;
  return train(std::move(model), env, config);
}

}  // namespace uinject
