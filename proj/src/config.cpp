#include "uinject/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "text_io.hpp"
#include "uinject/error.hpp"

namespace uinject {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw_config(key + ": expected an integer, got '" + value + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw_config(key + ": expected a number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw_config(key + ": expected true or false, got '" + value + "'");
}

std::vector<double> parse_real_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) throw_config(key + ": expected a comma-separated list of numbers");
  return out;
}

std::string format_real_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += detail::format_double(values[i]);
  }
  return out;
}

std::string fmt(double v) { return detail::format_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string fmt_int(T v) {
  return std::to_string(v);
}

struct KeySpec {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

#define REAL_KEY(name, field)                                                               \
  KeySpec {                                                                                 \
    name, [](const ExperimentConfig& c) { return fmt(c.field); },                           \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {               \
          c.field = parse_real(k, v);                                                       \
        }                                                                                   \
  }
#define INT_KEY(name, field, type)                                                          \
  KeySpec {                                                                                 \
    name, [](const ExperimentConfig& c) { return fmt_int(c.field); },                       \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {               \
          c.field = parse_integer<type>(k, v);                                              \
        }                                                                                   \
  }
#define BOOL_KEY(name, field)                                                               \
  KeySpec {                                                                                 \
    name, [](const ExperimentConfig& c) { return fmt(c.field); },                           \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {               \
          c.field = parse_bool(k, v);                                                       \
        }                                                                                   \
  }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      KeySpec{"environment.kind",
              [](const ExperimentConfig& c) { return std::string(to_string(c.environment)); },
              [](ExperimentConfig& c, const std::string&, const std::string& v) {
                const EnvironmentKind kind = parse_environment_kind(v);
                const ExperimentConfig d = ExperimentConfig::defaults(kind);
                c.environment = kind;
                c.gamma = d.gamma;
                c.methods = d.methods;
                c.train.optimizer.learning_rate = d.train.optimizer.learning_rate;
              }},

      INT_KEY("environment.mimo.antennas", mimo.antennas, int),
      INT_KEY("environment.mimo.users", mimo.users, int),
      REAL_KEY("environment.mimo.total_power_w", mimo.total_power_w),
      REAL_KEY("environment.mimo.bandwidth_hz", mimo.bandwidth_hz),
      REAL_KEY("environment.mimo.noise_psd_dbm_hz", mimo.noise_psd_dbm_hz),
      REAL_KEY("environment.mimo.sigma_e2", mimo.sigma_e2),
      REAL_KEY("environment.mimo.rzf_alpha", mimo.rzf_alpha),
      BOOL_KEY("environment.mimo.select_alpha", select_alpha),
      KeySpec{"environment.mimo.alpha_grid",
              [](const ExperimentConfig& c) { return format_real_list(c.alpha_grid); },
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.alpha_grid = parse_real_list(k, v);
              }},
      INT_KEY("environment.mimo.alpha_scenarios", alpha_scenarios, std::size_t),
      INT_KEY("environment.mimo.alpha_realizations", alpha_realizations, std::size_t),

      KeySpec{"environment.d2d.setting",
              [](const ExperimentConfig& c) { return std::string(1, c.d2d_setting_name); },
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                if (v.size() != 1) throw_config(k + ": expected A, B or C, got '" + v + "'");
                const D2dConfig preset = d2d_setting(v[0]);
                c.d2d_setting_name = static_cast<char>(std::toupper(v[0]));
                c.d2d.links = preset.links;
                c.d2d.region_m = preset.region_m;
                c.d2d.min_direct_m = preset.min_direct_m;
                c.d2d.max_direct_m = preset.max_direct_m;
              }},
      INT_KEY("environment.d2d.links", d2d.links, int),
      REAL_KEY("environment.d2d.region_m", d2d.region_m),
      REAL_KEY("environment.d2d.min_direct_m", d2d.min_direct_m),
      REAL_KEY("environment.d2d.max_direct_m", d2d.max_direct_m),
      REAL_KEY("environment.d2d.min_cross_m", d2d.min_cross_m),
      REAL_KEY("environment.d2d.max_power_dbm", d2d.max_power_dbm),
      REAL_KEY("environment.d2d.bandwidth_hz", d2d.bandwidth_hz),
      REAL_KEY("environment.d2d.noise_psd_dbm_hz", d2d.noise_psd_dbm_hz),
      REAL_KEY("environment.d2d.shadowing_db", d2d.shadowing_db),
      BOOL_KEY("environment.d2d.fast_fading", d2d.fast_fading),
      REAL_KEY("environment.d2d.carrier_hz", d2d.carrier_hz),
      REAL_KEY("environment.d2d.tx_height_m", d2d.tx_height_m),
      REAL_KEY("environment.d2d.rx_height_m", d2d.rx_height_m),
      REAL_KEY("environment.d2d.direct_beam_db", d2d.direct_beam_db),
      REAL_KEY("environment.d2d.main_lobe_db", d2d.main_lobe_db),
      REAL_KEY("environment.d2d.side_lobe_db", d2d.side_lobe_db),
      REAL_KEY("environment.d2d.main_lobe_half_width_deg", d2d.main_lobe_half_width_deg),
      INT_KEY("environment.d2d.max_placement_attempts", d2d.max_placement_attempts, int),
      INT_KEY("environment.d2d.normalizer_layouts", normalizer_layouts, std::size_t),

      INT_KEY("train.inject_samples", train.inject_samples, std::size_t),
      INT_KEY("train.minibatch_size", train.minibatch_size, std::size_t),
      INT_KEY("train.minibatches_per_epoch", train.minibatches_per_epoch, std::size_t),
      INT_KEY("train.max_epochs", train.max_epochs, std::size_t),
      INT_KEY("train.early_stop_patience", train.early_stop_patience, std::size_t),
      INT_KEY("train.validation_pool", train.validation_pool, std::size_t),
      INT_KEY("train.validation_samples", train.validation_samples, std::size_t),
      KeySpec{"train.optimizer",
              [](const ExperimentConfig& c) {
                return std::string(c.train.optimizer.kind == OptimizerKind::kAdam ? "adam" : "sgd");
              },
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                if (v == "adam") {
                  c.train.optimizer.kind = OptimizerKind::kAdam;
                } else if (v == "sgd") {
                  c.train.optimizer.kind = OptimizerKind::kSgd;
                } else {
                  throw_config(k + ": expected adam or sgd, got '" + v + "'");
                }
              }},
      REAL_KEY("train.learning_rate", train.optimizer.learning_rate),
      REAL_KEY("train.beta1", train.optimizer.beta1),
      REAL_KEY("train.beta2", train.optimizer.beta2),
      REAL_KEY("train.epsilon", train.optimizer.epsilon),
      REAL_KEY("train.utility_scale", train.utility_scale),

      REAL_KEY("eval.gamma", gamma),
      INT_KEY("eval.pool", eval_pool, std::size_t),
      INT_KEY("eval.samples", eval_samples, std::size_t),

      KeySpec{"experiment.methods",
              [](const ExperimentConfig& c) { return format_method_list(c.methods); },
              [](ExperimentConfig& c, const std::string&, const std::string& v) {
                c.methods = parse_method_list(v);
              }},
      INT_KEY("experiment.seed", seed, std::uint64_t),
      KeySpec{"experiment.output_dir", [](const ExperimentConfig& c) { return c.output_dir; },
              [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                if (v.empty()) throw_config(k + ": must not be empty");
                c.output_dir = v;
              }},
  };
  return specs;
}

#undef REAL_KEY
#undef INT_KEY
#undef BOOL_KEY

const KeySpec& find_key(const std::string& key) {
  for (const KeySpec& spec : key_specs()) {
    if (key == spec.key) return spec;
  }
  throw_config("unknown configuration key '" + key + "'");
}

}  // namespace

const char* to_string(Method method) {
  switch (method) {
    case Method::kInject: return "inject";
    case Method::kNominal: return "nominal";
    case Method::kMaxmin: return "maxmin";
    case Method::kUniform: return "uniform";
    case Method::kFull: return "full";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kInject, Method::kNominal, Method::kMaxmin, Method::kUniform,
                   Method::kFull}) {
    if (name == to_string(m)) return m;
  }
  throw_config("unknown method '" + name + "' (expected inject, nominal, maxmin, uniform or full)");
}

std::vector<Method> parse_method_list(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const Method m = parse_method(trim(item));
    if (std::find(out.begin(), out.end(), m) != out.end()) {
      throw_config(std::string("method '") + to_string(m) + "' listed twice");
    }
    out.push_back(m);
  }
  if (out.empty()) throw_config("method list must not be empty");
  return out;
}

std::string format_method_list(const std::vector<Method>& methods) {
  std::string out;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (i) out += ',';
    out += to_string(methods[i]);
  }
  return out;
}

bool is_learned(Method method) { return method == Method::kInject || method == Method::kNominal; }

EnvironmentKind parse_environment_kind(const std::string& name) {
  if (name == "mimo") return EnvironmentKind::kMimo;
  if (name == "d2d") return EnvironmentKind::kD2d;
  throw_config("unknown environment '" + name + "' (expected mimo or d2d)");
}

ExperimentConfig ExperimentConfig::defaults(EnvironmentKind kind) {
  ExperimentConfig c;
  c.environment = kind;
  if (kind == EnvironmentKind::kD2d) {
    c.gamma = 10.0;
    c.methods = {Method::kInject, Method::kNominal, Method::kFull, Method::kMaxmin};
    c.train.optimizer.learning_rate = 1e-4;  // 1e-3 saturates the sigmoid outputs
  }
  return c;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  find_key(key).set(*this, key, trim(value));
}

std::string ExperimentConfig::get(const std::string& key) const { return find_key(key).get(*this); }

void ExperimentConfig::apply_paper_scale() {
  train.minibatch_size = 1000;
  train.minibatches_per_epoch = 50;
  train.max_epochs = 500;
  train.inject_samples = 1000;
  eval_pool = 2000;
  eval_samples = 1000;
}

TrainConfig ExperimentConfig::resolved_train() const {
  TrainConfig t = train;
  t.gamma = gamma;
  t.seed = seed;
  return t;
}

void ExperimentConfig::validate() const {
  if (environment == EnvironmentKind::kMimo) {
    mimo.validate();
    if (alpha_grid.empty()) throw_config("environment.mimo.alpha_grid must not be empty");
    for (double a : alpha_grid) {
      if (!(a >= 0.0)) throw_config("environment.mimo.alpha_grid entries must be >= 0");
    }
    if (select_alpha && (alpha_scenarios < 1 || alpha_realizations < 1)) {
      throw_config("alpha selection needs at least one scenario and realization");
    }
  } else {
    d2d.validate();
    if (normalizer_layouts < 2) throw_config("environment.d2d.normalizer_layouts must be >= 2");
  }
  resolved_train().validate();
  if (eval_pool < 1) throw_config("eval.pool must be >= 1");
  if (eval_samples < 100) throw_config("eval.samples must be >= 100");
  if (methods.empty()) throw_config("experiment.methods must not be empty");
  for (Method m : methods) {
    if (m == Method::kUniform && environment != EnvironmentKind::kMimo) {
      throw_config("method 'uniform' applies to the MIMO environment only");
    }
    if (m == Method::kFull && environment != EnvironmentKind::kD2d) {
      throw_config("method 'full' applies to the D2D environment only");
    }
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const KeySpec& spec : key_specs()) k.emplace_back(spec.key);
    return k;
  }();
  return keys;
}

ExperimentConfig parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::map<std::string, int> seen;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw_config("config line " + std::to_string(line_number) + ": expected 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    find_key(key);
    if (!seen.emplace(key, line_number).second) {
      throw_config("config line " + std::to_string(line_number) + ": '" + key +
                   "' already set on line " + std::to_string(seen[key]));
    }
    entries.emplace_back(std::move(key), std::move(value));
  }

  ExperimentConfig config;
  for (const char* first : {"environment.kind", "environment.d2d.setting"}) {
    for (const auto& [key, value] : entries) {
      if (key == first) config.set(key, value);
    }
  }
  for (const auto& [key, value] : entries) {
    if (key != "environment.kind" && key != "environment.d2d.setting") config.set(key, value);
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open config file " + path.string());
  return parse_config(in);
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const KeySpec& spec : key_specs()) out.emplace_back(spec.key, spec.get(config));
  return out;
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_entries(config)) out += key + " = " + value + "\n";
  return out;
}

std::string run_id(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : format_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

}  // namespace uinject
