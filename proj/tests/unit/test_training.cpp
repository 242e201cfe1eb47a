#include <cmath>
#include <sstream>

#include "doctest.h"
#include "support/gradient_check.hpp"
#include "uinject/error.hpp"
#include "uinject/training.hpp"

using namespace uinject;
using uinject::testing::frozen_batch;
using uinject::testing::probe_gradient;

namespace {

MimoConfig mimo_config(double sigma_e2 = 0.075) {
  MimoConfig c;
  c.sigma_e2 = sigma_e2;
  return c;
}

D2dConfig small_d2d() {
  D2dConfig c = d2d_setting('A');
  c.links = 4;
  return c;
}

MlpModel seeded_model(const Environment& env, std::vector<Eigen::Index> dims, std::uint64_t seed) {
  MlpModel m(std::move(dims), env.output_activation());
  Rng rng(seed);
  m.initialize(rng);
  return m;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.inject_samples = 20;
  c.minibatch_size = 8;
  c.minibatches_per_epoch = 3;
  c.max_epochs = 4;
  c.validation_pool = 10;
  c.validation_samples = 100;
  c.gamma = 5.0;  // t = 1 at L = 20: a single routed sample
  return c;
}

bool same_parameters(const MlpModel& a, const MlpModel& b) {
  if (a.num_layers() != b.num_layers()) return false;
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    if (a.layer(l).weights != b.layer(l).weights || a.layer(l).bias != b.layer(l).bias) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("training: default architectures") {
  const MimoEnvironment mimo(mimo_config());
  CHECK(default_layer_dims(mimo) == std::vector<Eigen::Index>{16, 200, 200, 200, 200, 4});
  const D2dEnvironment d2d = D2dEnvironment::with_fitted_normalizer(d2d_setting('A'), 50, 1);
  CHECK(default_layer_dims(d2d) == std::vector<Eigen::Index>{100, 600, 600, 600, 600, 600, 10});
  CHECK(make_model(d2d).output_activation() == OutputActivation::kSigmoid);
  CHECK(make_model(mimo).output_activation() == OutputActivation::kSoftmax);
}

TEST_CASE("training: objective gradient matches finite differences (MIMO)") {
  const MimoEnvironment env(mimo_config());
  MlpModel model = seeded_model(env, {16, 32, 32, 4}, 1);
  Rng rng(2);
  const auto batch = frozen_batch(env, 6, 50, rng);  // t = 2.5: interpolated ranks
  Gradients g;
  percentile_objective(model, env, batch, 5.0, 1e-6, &g);
  auto objective = [&](const MlpModel& m) { return percentile_objective(m, env, batch, 5.0, 1e-6).value; };
  Rng probe_rng(3);
  const auto report = probe_gradient(model, g, objective, 300, probe_rng, 1e-6, 0, model.num_layers() - 1);
  CHECK(report.checked >= 250);
  CHECK(report.max_rel_error < 1e-3);
}

TEST_CASE("training: objective gradient matches finite differences (D2D)") {
  const D2dEnvironment env = D2dEnvironment::with_fitted_normalizer(small_d2d(), 200, 4);
  MlpModel model = seeded_model(env, {16, 24, 24, 4}, 5);
  Rng rng(6);
  const auto batch = frozen_batch(env, 6, 60, rng);
  Gradients g;
  percentile_objective(model, env, batch, 10.0, 1e-6, &g);
  auto objective = [&](const MlpModel& m) { return percentile_objective(m, env, batch, 10.0, 1e-6).value; };
  Rng probe_rng(7);
  const auto report = probe_gradient(model, g, objective, 300, probe_rng, 1e-6, 0, model.num_layers() - 1);
  CHECK(report.checked >= 250);
  CHECK(report.max_rel_error < 1e-3);
}

TEST_CASE("training: a single realization reduces to the plain min-rate") {
  const MimoEnvironment env(mimo_config());
  const MlpModel model = seeded_model(env, {16, 20, 4}, 8);
  Rng rng(9);
  const auto batch = frozen_batch(env, 5, 1, rng);
  double expected = 0.0;
  for (const FrozenScenario& s : batch) {
    expected += min_rate(s.gains[0], forward(model, s.features), env.budget());
  }
  expected /= 5.0;
  for (double gamma : {1.0, 5.0, 50.0, 99.0}) {
    const ObjectiveValue v = percentile_objective(model, env, batch, gamma, 1.0);
    CHECK(v.value == doctest::Approx(expected).epsilon(1e-14));
    CHECK(v.kept == 5);
    CHECK(v.skipped == 0);
  }
}

TEST_CASE("training: objective input errors") {
  const MimoEnvironment env(mimo_config());
  const MlpModel model = seeded_model(env, {16, 20, 4}, 8);
  const std::vector<FrozenScenario> empty;
  CHECK_THROWS_AS(percentile_objective(model, env, empty, 5.0, 1.0), Error);
  std::vector<FrozenScenario> no_gains(1);
  no_gains[0].features = Eigen::VectorXd::Zero(16);
  CHECK_THROWS_AS(percentile_objective(model, env, no_gains, 5.0, 1.0), Error);
}

TEST_CASE("training property: zero uncertainty collapses injection onto nominal training") {
  const MimoEnvironment env(mimo_config(0.0));
  const MlpModel start = seeded_model(env, {16, 24, 24, 4}, 10);
  TrainConfig c = tiny_config();
  const TrainResult inject = train_injected(start, env, c);
  const TrainResult nominal = train_nominal(start, env, c);
  CHECK(same_parameters(inject.model, nominal.model));
  REQUIRE(inject.log.epochs.size() == nominal.log.epochs.size());
  for (std::size_t e = 0; e < inject.log.epochs.size(); ++e) {
    CHECK(inject.log.epochs[e].val_robust == nominal.log.epochs[e].val_robust);
    CHECK(inject.log.epochs[e].val_nominal == nominal.log.epochs[e].val_nominal);
    CHECK(inject.log.epochs[e].val_robust == inject.log.epochs[e].val_nominal);
  }
  CHECK(inject.log.best_epoch == nominal.log.best_epoch);
}

TEST_CASE("training property: identical seeds give identical parameters") {
  const D2dEnvironment env = D2dEnvironment::with_fitted_normalizer(small_d2d(), 100, 11);
  const MlpModel start = seeded_model(env, {16, 24, 24, 4}, 12);
  TrainConfig c = tiny_config();
  c.gamma = 10.0;
  const TrainResult a = train(start, env, c);
  const TrainResult b = train(start, env, c);
  CHECK(same_parameters(a.model, b.model));
  c.seed = 2;
  const TrainResult other = train(start, env, c);
  CHECK_FALSE(same_parameters(a.model, other.model));
}

TEST_CASE("training: the returned model is the best validated one") {
  const MimoEnvironment env(mimo_config());
  const MlpModel start = seeded_model(env, {16, 24, 24, 4}, 13);
  TrainConfig c = tiny_config();
  c.max_epochs = 8;
  c.early_stop_patience = 2;
  c.optimizer.learning_rate = 3e-2;  // noisy enough to make the best epoch interesting
  const TrainResult r = train(start, env, c);
  const TrainLog& log = r.log;
  REQUIRE(!log.epochs.empty());
  CHECK(log.epochs.front().epoch == 0);
  std::size_t argmax = 0;
  for (std::size_t e = 1; e < log.epochs.size(); ++e) {
    CHECK(log.epochs[e].epoch == e);
    if (log.selection_metric(log.epochs[e]) > log.selection_metric(log.epochs[argmax])) argmax = e;
  }
  CHECK(log.best_epoch == argmax);
  CHECK(log.epochs.size() <= log.best_epoch + c.early_stop_patience + 1);
  if (log.stopped_early) CHECK(log.epochs.size() == log.best_epoch + c.early_stop_patience + 1);

  // Re-scoring the returned model on the validation pool reproduces its record.
  const ScenarioPool validation = make_pool(env, c.validation_pool, c.seed, Stream::kValidation);
  const PolicyEvaluation again = evaluate(r.model, env, validation, c.validation_samples, c.gamma);
  CHECK(again.mean_robust() == doctest::Approx(log.epochs[argmax].val_robust).epsilon(1e-12));

  std::ostringstream csv;
  log.write_csv(csv);
  CHECK(csv.str().rfind("epoch,val_robust,val_nominal,seconds\n", 0) == 0);
}

TEST_CASE("training: configuration checks") {
  const MimoEnvironment env(mimo_config());
  TrainConfig c = tiny_config();
  c.minibatch_size = 0;
  CHECK_THROWS_AS(train(make_model(env), env, c), Error);
  c = tiny_config();
  c.gamma = 0.0;
  CHECK_THROWS_AS(train(make_model(env), env, c), Error);
  c = tiny_config();
  const MlpModel wrong({16, 8, 3}, OutputActivation::kSoftmax);
  CHECK_THROWS_AS(train(wrong, env, c), Error);
  const MlpModel sigmoid({16, 8, 4}, OutputActivation::kSigmoid);
  CHECK_THROWS_AS(train(sigmoid, env, c), Error);
}

TEST_CASE("evaluation property: paired draws, read-only and deterministic") {
  const MimoEnvironment env(mimo_config());
  const MlpModel model = seeded_model(env, {16, 24, 4}, 14);
  const ScenarioPool pool = make_pool(env, 30, 3, Stream::kTestPool);
  const ScenarioPool same = make_pool(env, 30, 3, Stream::kTestPool);
  CHECK(pool.realization_seeds == same.realization_seeds);

  const MlpModel before = model;
  const PolicyEvaluation a = evaluate(model, env, pool, 200, 5.0);
  const PolicyEvaluation b = evaluate(model, env, pool, 200, 5.0);
  CHECK(same_parameters(model, before));
  CHECK(a.robust == b.robust);
  CHECK(a.nominal == b.nominal);
  // Robust percentile sits below the nominal min-rate on average.
  CHECK(a.mean_robust() < a.mean_nominal());

  CHECK_THROWS_AS(evaluate(model, env, pool, 99, 5.0), Error);
  Eigen::MatrixXd infeasible = Eigen::MatrixXd::Constant(4, 30, 0.5);
  CHECK_THROWS_AS(evaluate_allocations(env, pool, infeasible, 100, 5.0), Error);
  CHECK_THROWS_AS(evaluate_allocations(env, pool, Eigen::MatrixXd::Constant(4, 29, 0.25), 100, 5.0), Error);
}

TEST_CASE("evaluation: more realizations move the estimate less than its noise") {
  const MimoEnvironment env(mimo_config());
  const ScenarioPool pool = make_pool(env, 200, 4, Stream::kTestPool);
  const Eigen::MatrixXd equal = Eigen::MatrixXd::Constant(4, 200, 0.25);
  const PolicyEvaluation small = evaluate_allocations(env, pool, equal, 500, 5.0);
  const PolicyEvaluation large = evaluate_allocations(env, pool, equal, 1000, 5.0);
  double var = 0.0;
  for (double r : large.robust) var += (r - large.mean_robust()) * (r - large.mean_robust());
  const double standard_error = std::sqrt(var / 199.0 / 200.0);
  CHECK(std::abs(small.mean_robust() - large.mean_robust()) < 2.0 * standard_error);
  CHECK(small.nominal == large.nominal);
}
