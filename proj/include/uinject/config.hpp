#pragma once

// Experiment configuration: flat `key = value` text with dotted sections
// (environment.*, train.*, eval.*, experiment.*). Every physical constant has
// a named key; format_config() echoes all of them in a fixed order.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "uinject/d2d.hpp"
#include "uinject/environment.hpp"
#include "uinject/mimo.hpp"
#include "uinject/training.hpp"

namespace uinject {

enum class Method { kInject, kNominal, kMaxmin, kUniform, kFull };

const char* to_string(Method method);
Method parse_method(const std::string& name);
std::vector<Method> parse_method_list(const std::string& list);  // comma separated
std::string format_method_list(const std::vector<Method>& methods);
bool is_learned(Method method);

EnvironmentKind parse_environment_kind(const std::string& name);

struct ExperimentConfig {
  EnvironmentKind environment = EnvironmentKind::kMimo;

  MimoConfig mimo;
  bool select_alpha = false;  // run the alpha grid search before training
  std::vector<double> alpha_grid{0.01, 0.05, 0.1, 0.2, 0.5, 1.0};
  std::size_t alpha_scenarios = 200;
  std::size_t alpha_realizations = 200;

  char d2d_setting_name = 'A';
  D2dConfig d2d = d2d_setting('A');
  std::size_t normalizer_layouts = 2000;

  TrainConfig train;  // train.gamma and train.seed are taken from below

  double gamma = 5.0;  // eval.gamma, percent; used for training and evaluation
  std::size_t eval_pool = 200;
  std::size_t eval_samples = 500;

  std::vector<Method> methods{Method::kInject, Method::kNominal, Method::kMaxmin,
                              Method::kUniform};
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  // Defaults for one environment: gamma 5 with inject, nominal, maxmin and
  // uniform for MIMO; gamma 10 with inject, nominal, full and maxmin for D2D.
  static ExperimentConfig defaults(EnvironmentKind kind);

  // Switching environment.kind resets gamma, the learning rate and the method list to that
  // environment's defaults; environment.d2d.setting rewrites the layout
  // geometry (links, region, direct-link range). Unknown keys are errors.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  // minibatch 1000 x 50 per epoch, 500 epochs, L 1000, pool 2000 x 1000.
  void apply_paper_scale();

  // The training config actually used, with gamma and seed filled in.
  TrainConfig resolved_train() const;

  void validate() const;
};

// All keys in echo order.
const std::vector<std::string>& config_keys();

// environment.kind and environment.d2d.setting are applied before the other
// keys regardless of where they appear; repeated keys are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

// `key = value` lines for every key, fixed order; parse_config round-trips it.
std::string format_config(const ExperimentConfig& config);
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config);

// 16 hex digits identifying the resolved configuration (FNV-1a of format_config).
std::string run_id(const ExperimentConfig& config);

}  // namespace uinject
