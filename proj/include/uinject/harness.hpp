#pragma once

// Experiment orchestration: train the learned methods, score every method on
// one shared test pool with shared realization draws, and write the report,
// summary, CDF and training-log files.

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uinject/config.hpp"
#include "uinject/environment.hpp"
#include "uinject/mlp.hpp"
#include "uinject/training.hpp"

namespace uinject {

inline constexpr const char* kVersion = "1.0.0";

struct MethodResult {
  Method method = Method::kInject;
  double mean_nominal = 0.0;     // bits/s
  double mean_robust = 0.0;      // bits/s
  std::vector<double> nominal;   // per test scenario
  std::vector<double> robust;    // per test scenario, the CDF samples
};

struct EvalReport {
  std::string version = kVersion;
  std::string run_id;
  EnvironmentKind environment = EnvironmentKind::kMimo;
  double gamma = 0.0;
  std::size_t eval_pool = 0;
  std::size_t eval_samples = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;  // every key, resolved
  std::vector<MethodResult> methods;

  bool has(Method method) const;
  const MethodResult& method(Method method) const;
};

// Config with the MIMO alpha search resolved (when enabled) and validated.
ExperimentConfig resolve_config(ExperimentConfig config);

// D2D fits its input normalizer on normalizer_layouts layouts from the
// Normalizer stream of config.seed unless one is supplied.
std::unique_ptr<Environment> make_environment(const ExperimentConfig& config,
                                              const InputNormalizer* normalizer = nullptr);

// He-uniform model from the Init stream of config.seed; both learned methods
// start from these parameters.
MlpModel initial_model(const ExperimentConfig& config, const Environment& env);

// Trains one learned method.
TrainResult train_method(const ExperimentConfig& config, const Environment& env, Method method);

// One feasible allocation column per pool scenario. `model` is required for
// the learned methods and ignored otherwise.
Eigen::MatrixXd method_allocations(Method method, const Environment& env, const ScenarioPool& pool,
                                   const MlpModel* model);

ScenarioPool test_pool(const ExperimentConfig& config, const Environment& env);

// Scores every configured method on the test pool. Learned methods must be
// present in `models`.
EvalReport evaluate_methods(const ExperimentConfig& config, const Environment& env,
                            const std::map<Method, MlpModel>& models);

// File names inside an output directory.
std::string checkpoint_file(Method method);   // checkpoint_<method>.txt
std::string trainlog_file(Method method);     // trainlog_<method>.csv
std::string cdf_file(Method method);          // cdf_<method>.csv
inline constexpr const char* kNormalizerFile = "normalizer.txt";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kSummaryFile = "summary.csv";
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kIncompleteMarker = "INCOMPLETE";

// Trains the learned methods and writes checkpoints, training logs, the
// resolved config and (D2D) the normalizer into config.output_dir.
void train_to_directory(const ExperimentConfig& config);

// Loads learned methods from checkpoint_dir (default: output_dir), evaluates
// every method and writes report, summary and CDF files into output_dir.
EvalReport evaluate_to_directory(const ExperimentConfig& config,
                                 const std::filesystem::path& checkpoint_dir = {});

// Both of the above in one pass.
EvalReport run_experiment(const ExperimentConfig& config);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

// method,scenarios,nominal_mbps,robust_mbps with 6 significant digits.
std::string summary_csv(const EvalReport& report);

// rate_mbps,cdf: sorted robust values against k/n.
std::string cdf_csv(const EvalReport& report, Method method);

struct MethodRatio {
  Method numerator;
  Method denominator;
  double robust_ratio;
  double nominal_ratio;
};

struct Comparison {
  std::vector<MethodRatio> ratios;  // every ordered pair of distinct methods
  // Robust: inject > nominal > full > maxmin over the methods present.
  std::vector<Method> robust_chain;
  bool robust_order_holds = false;
  // Nominal: maxmin > nominal >= inject over the methods present.
  std::vector<Method> nominal_chain;
  bool nominal_order_holds = false;

  double robust_ratio(Method a, Method b) const;
  double nominal_ratio(Method a, Method b) const;
};

Comparison compare_methods(const EvalReport& report);
std::string comparison_csv(const Comparison& comparison);

}  // namespace uinject
