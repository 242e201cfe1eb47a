#include "uinject/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>

#include "json.hpp"
#include "uinject/baselines.hpp"
#include "uinject/error.hpp"

namespace uinject {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string sig6(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return buffer;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot write " + path.string());
  out << text;
  if (!out) throw_io("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Exclusive use of an output directory for one run. Files written before a
// failure stay in place next to an INCOMPLETE marker holding the error.
class OutputDirectory {
 public:
  explicit OutputDirectory(const std::filesystem::path& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw_io("cannot create output directory " + dir_.string() + ": " + ec.message());
    lock_ = dir_ / ".lock";
    std::FILE* f = std::fopen(lock_.c_str(), "wx");
    if (!f) {
      throw_io("output directory " + dir_.string() +
               " is in use by another run (remove .lock if that run is gone)");
    }
    std::fclose(f);
    write_text(dir_ / kIncompleteMarker, "run in progress\n");
  }
  ~OutputDirectory() {
    std::error_code ec;
    std::filesystem::remove(lock_, ec);
  }
  OutputDirectory(const OutputDirectory&) = delete;
  OutputDirectory& operator=(const OutputDirectory&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return dir_ / name; }

  void complete() {
    std::error_code ec;
    std::filesystem::remove(dir_ / kIncompleteMarker, ec);
  }
  void fail(const std::string& message) {
    try {
      write_text(dir_ / kIncompleteMarker, "run failed: " + message + "\n");
    } catch (const Error&) {
    }
  }

 private:
  std::filesystem::path dir_;
  std::filesystem::path lock_;
};

template <typename F>
auto guarded(OutputDirectory& out, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    out.fail(e.what());
    throw;
  }
}

void write_training(OutputDirectory& out, Method method, const TrainResult& result) {
  save_checkpoint(result.model, out / checkpoint_file(method));
  std::ostringstream log;
  result.log.write_csv(log);
  write_text(out / trainlog_file(method), log.str());
}

void write_evaluation(OutputDirectory& out, const EvalReport& report) {
  save_report(report, out / kReportFile);
  write_text(out / kSummaryFile, summary_csv(report));
  for (const MethodResult& m : report.methods) {
    write_text(out / cdf_file(m.method), cdf_csv(report, m.method));
  }
}

void write_setup(OutputDirectory& out, const ExperimentConfig& config, const Environment& env) {
  write_text(out / kConfigFile, format_config(config));
  if (const auto* d2d = dynamic_cast<const D2dEnvironment*>(&env)) {
    d2d->normalizer().save(out / kNormalizerFile);
  }
}

std::map<Method, MlpModel> train_all(const ExperimentConfig& config, const Environment& env,
                                     OutputDirectory& out) {
  std::map<Method, MlpModel> models;
  for (Method m : config.methods) {
    if (!is_learned(m)) continue;
    TrainResult result = train_method(config, env, m);
    write_training(out, m, result);
    models.emplace(m, std::move(result.model));
  }
  return models;
}

}  // namespace

bool EvalReport::has(Method m) const {
  return std::any_of(methods.begin(), methods.end(),
                     [m](const MethodResult& r) { return r.method == m; });
}

const MethodResult& EvalReport::method(Method m) const {
  for (const MethodResult& r : methods) {
    if (r.method == m) return r;
  }
  throw_usage(std::string("report has no method '") + to_string(m) + "'");
}

ExperimentConfig resolve_config(ExperimentConfig config) {
  config.validate();
  if (config.environment == EnvironmentKind::kMimo && config.select_alpha) {
    const AlphaSelection selection =
        select_alpha(config.mimo, config.alpha_grid, config.alpha_scenarios,
                     config.alpha_realizations, config.seed);
    config.mimo.rzf_alpha = selection.alpha;
  }
  return config;
}

std::unique_ptr<Environment> make_environment(const ExperimentConfig& config,
                                              const InputNormalizer* normalizer) {
  if (config.environment == EnvironmentKind::kMimo) {
    return std::make_unique<MimoEnvironment>(config.mimo);
  }
  if (normalizer) return std::make_unique<D2dEnvironment>(config.d2d, *normalizer);
  return std::make_unique<D2dEnvironment>(
      D2dEnvironment::with_fitted_normalizer(config.d2d, config.normalizer_layouts, config.seed));
}

MlpModel initial_model(const ExperimentConfig& config, const Environment& env) {
  MlpModel model = make_model(env);
  Rng rng = make_rng(config.seed, Stream::kInit);
  model.initialize(rng);
  return model;
}

TrainResult train_method(const ExperimentConfig& config, const Environment& env, Method method) {
  if (!is_learned(method)) {
    throw_usage(std::string("method '") + to_string(method) + "' is not trained");
  }
  TrainConfig tc = config.resolved_train();
  tc.mode = method == Method::kInject ? TrainMode::kInject : TrainMode::kNominal;
  return train(initial_model(config, env), env, tc);
}

Eigen::MatrixXd method_allocations(Method method, const Environment& env, const ScenarioPool& pool,
                                   const MlpModel* model) {
  const Eigen::Index n = static_cast<Eigen::Index>(pool.size());
  switch (method) {
    case Method::kInject:
    case Method::kNominal:
      if (!model) throw_usage(std::string("method '") + to_string(method) + "' needs a model");
      return forward_batch(*model, pool_features(env, pool.scenarios));
    case Method::kMaxmin: {
      Eigen::MatrixXd x(env.output_dim(), n);
      for (Eigen::Index i = 0; i < n; ++i) {
        x.col(i) = std::visit([](const auto& s) { return maxmin_nominal(s).x; },
                              pool.scenarios[static_cast<std::size_t>(i)]);
      }
      return x;
    }
    case Method::kUniform:
      if (env.kind() != EnvironmentKind::kMimo) throw_usage("uniform power is a MIMO baseline");
      return uniform_power(static_cast<int>(env.output_dim())).replicate(1, n);
    case Method::kFull:
      if (env.kind() != EnvironmentKind::kD2d) throw_usage("full power is a D2D baseline");
      return full_power(static_cast<int>(env.output_dim())).replicate(1, n);
  }
  throw_usage("unknown method");
}

ScenarioPool test_pool(const ExperimentConfig& config, const Environment& env) {
  return make_pool(env, config.eval_pool, config.seed, Stream::kTestPool);
}

EvalReport evaluate_methods(const ExperimentConfig& config, const Environment& env,
                            const std::map<Method, MlpModel>& models) {
  const ScenarioPool pool = test_pool(config, env);
  EvalReport report;
  report.run_id = run_id(config);
  report.environment = config.environment;
  report.gamma = config.gamma;
  report.eval_pool = config.eval_pool;
  report.eval_samples = config.eval_samples;
  report.seed = config.seed;
  report.config = config_entries(config);
  for (Method m : config.methods) {
    const MlpModel* model = nullptr;
    if (is_learned(m)) {
      auto it = models.find(m);
      if (it == models.end()) {
        throw_usage(std::string("no trained model for method '") + to_string(m) + "'");
      }
      model = &it->second;
    }
    const PolicyEvaluation eval = evaluate_allocations(
        env, pool, method_allocations(m, env, pool, model), config.eval_samples, config.gamma);
    report.methods.push_back({m, eval.mean_nominal(), eval.mean_robust(), eval.nominal, eval.robust});
  }
  return report;
}

std::string checkpoint_file(Method method) {
  return std::string("checkpoint_") + to_string(method) + ".txt";
}
std::string trainlog_file(Method method) {
  return std::string("trainlog_") + to_string(method) + ".csv";
}
std::string cdf_file(Method method) { return std::string("cdf_") + to_string(method) + ".csv"; }

void train_to_directory(const ExperimentConfig& config) {
  const ExperimentConfig resolved = resolve_config(config);
  OutputDirectory out(resolved.output_dir);
  guarded(out, [&] {
    const auto env = make_environment(resolved);
    write_setup(out, resolved, *env);
    train_all(resolved, *env, out);
    return 0;
  });
  out.complete();
}

EvalReport evaluate_to_directory(const ExperimentConfig& config,
                                 const std::filesystem::path& checkpoint_dir) {
  const ExperimentConfig resolved = resolve_config(config);
  const std::filesystem::path from =
      checkpoint_dir.empty() ? std::filesystem::path(resolved.output_dir) : checkpoint_dir;
  OutputDirectory out(resolved.output_dir);
  EvalReport report = guarded(out, [&] {
    std::unique_ptr<Environment> env;
    if (resolved.environment == EnvironmentKind::kD2d &&
        std::filesystem::exists(from / kNormalizerFile)) {
      const InputNormalizer normalizer = InputNormalizer::load(from / kNormalizerFile);
      env = make_environment(resolved, &normalizer);
    } else {
      env = make_environment(resolved);
    }
    std::map<Method, MlpModel> models;
    for (Method m : resolved.methods) {
      if (!is_learned(m)) continue;
      models.emplace(m, load_checkpoint(from / checkpoint_file(m), default_layer_dims(*env),
                                        env->output_activation()));
    }
    EvalReport r = evaluate_methods(resolved, *env, models);
    write_evaluation(out, r);
    return r;
  });
  out.complete();
  return report;
}

EvalReport run_experiment(const ExperimentConfig& config) {
  const ExperimentConfig resolved = resolve_config(config);
  OutputDirectory out(resolved.output_dir);
  EvalReport report = guarded(out, [&] {
    const auto env = make_environment(resolved);
    write_setup(out, resolved, *env);
    const std::map<Method, MlpModel> models = train_all(resolved, *env, out);
    EvalReport r = evaluate_methods(resolved, *env, models);
    write_evaluation(out, r);
    return r;
  });
  out.complete();
  return report;
}

std::string report_to_json(const EvalReport& report) {
  ordered_json j;
  j["format"] = "uinject-report";
  j["version"] = report.version;
  j["run_id"] = report.run_id;
  j["environment"] = to_string(report.environment);
  j["units"] = "bits/s";
  j["gamma"] = report.gamma;
  j["eval_pool"] = report.eval_pool;
  j["eval_samples"] = report.eval_samples;
  j["seed"] = report.seed;
  ordered_json config = ordered_json::object();
  for (const auto& [key, value] : report.config) config[key] = value;
  j["config"] = std::move(config);
  ordered_json methods = ordered_json::array();
  for (const MethodResult& m : report.methods) {
    ordered_json e;
    e["method"] = to_string(m.method);
    e["mean_nominal"] = m.mean_nominal;
    e["mean_robust"] = m.mean_robust;
    e["nominal"] = m.nominal;
    e["robust"] = m.robust;
    methods.push_back(std::move(e));
  }
  j["methods"] = std::move(methods);
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    if (j.at("format").get<std::string>() != "uinject-report") {
      throw_format("not a uinject report");
    }
    EvalReport r;
    r.version = j.at("version").get<std::string>();
    r.run_id = j.at("run_id").get<std::string>();
    r.environment = parse_environment_kind(j.at("environment").get<std::string>());
    r.gamma = j.at("gamma").get<double>();
    r.eval_pool = j.at("eval_pool").get<std::size_t>();
    r.eval_samples = j.at("eval_samples").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [key, value] : j.at("config").items()) {
      r.config.emplace_back(key, value.get<std::string>());
    }
    for (const auto& e : j.at("methods")) {
      MethodResult m;
      m.method = parse_method(e.at("method").get<std::string>());
      m.mean_nominal = e.at("mean_nominal").get<double>();
      m.mean_robust = e.at("mean_robust").get<double>();
      m.nominal = e.at("nominal").get<std::vector<double>>();
      m.robust = e.at("robust").get<std::vector<double>>();
      if (m.robust.size() != r.eval_pool || m.nominal.size() != r.eval_pool) {
        throw_format(std::string("report method '") + to_string(m.method) +
                     "' does not have one value per pool scenario");
      }
      r.methods.push_back(std::move(m));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw_format(std::string("malformed report: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kFormat) throw;
    throw_format(std::string("malformed report: ") + e.what());
  }
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  write_text(path, report_to_json(report));
}

EvalReport load_report(const std::filesystem::path& path) { return report_from_json(read_text(path)); }

std::string summary_csv(const EvalReport& report) {
  std::string out = "method,scenarios,nominal_mbps,robust_mbps\n";
  for (const MethodResult& m : report.methods) {
    out += std::string(to_string(m.method)) + ',' + std::to_string(m.robust.size()) + ',' +
           sig6(m.mean_nominal * 1e-6) + ',' + sig6(m.mean_robust * 1e-6) + '\n';
  }
  return out;
}

std::string cdf_csv(const EvalReport& report, Method method) {
  std::vector<double> values = report.method(method).robust;
  std::sort(values.begin(), values.end());
  std::string out = "rate_mbps,cdf\n";
  const double n = static_cast<double>(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    out += sig6(values[k] * 1e-6) + ',' + sig6(static_cast<double>(k + 1) / n) + '\n';
  }
  return out;
}

double Comparison::robust_ratio(Method a, Method b) const {
  for (const MethodRatio& r : ratios) {
    if (r.numerator == a && r.denominator == b) return r.robust_ratio;
  }
  throw_usage(std::string("no ratio for ") + to_string(a) + "/" + to_string(b));
}

double Comparison::nominal_ratio(Method a, Method b) const {
  for (const MethodRatio& r : ratios) {
    if (r.numerator == a && r.denominator == b) return r.nominal_ratio;
  }
  throw_usage(std::string("no ratio for ") + to_string(a) + "/" + to_string(b));
}

Comparison compare_methods(const EvalReport& report) {
  if (report.methods.size() < 2) throw_usage("comparison needs at least two methods");
  Comparison c;
  for (const MethodResult& a : report.methods) {
    for (const MethodResult& b : report.methods) {
      if (a.method == b.method) continue;
      c.ratios.push_back({a.method, b.method, a.mean_robust / b.mean_robust,
                          a.mean_nominal / b.mean_nominal});
    }
  }

  for (Method m : {Method::kInject, Method::kNominal, Method::kFull, Method::kMaxmin}) {
    if (report.has(m)) c.robust_chain.push_back(m);
  }
  c.robust_order_holds = c.robust_chain.size() >= 2;
  for (std::size_t i = 1; i < c.robust_chain.size(); ++i) {
    if (!(report.method(c.robust_chain[i - 1]).mean_robust >
          report.method(c.robust_chain[i]).mean_robust)) {
      c.robust_order_holds = false;
    }
  }

  for (Method m : {Method::kMaxmin, Method::kNominal, Method::kInject}) {
    if (report.has(m)) c.nominal_chain.push_back(m);
  }
  c.nominal_order_holds = c.nominal_chain.size() >= 2;
  for (std::size_t i = 1; i < c.nominal_chain.size(); ++i) {
    const double upper = report.method(c.nominal_chain[i - 1]).mean_nominal;
    const double lower = report.method(c.nominal_chain[i]).mean_nominal;
    // maxmin must strictly beat nominal; nominal may tie inject.
    const bool strict = c.nominal_chain[i - 1] == Method::kMaxmin;
    if (strict ? !(upper > lower) : !(upper >= lower)) c.nominal_order_holds = false;
  }
  return c;
}

std::string comparison_csv(const Comparison& comparison) {
  std::string out = "numerator,denominator,robust_ratio,nominal_ratio\n";
  for (const MethodRatio& r : comparison.ratios) {
    out += std::string(to_string(r.numerator)) + ',' + to_string(r.denominator) + ',' +
           sig6(r.robust_ratio) + ',' + sig6(r.nominal_ratio) + '\n';
  }
  auto chain = [](const std::vector<Method>& methods) {
    std::string s;
    for (std::size_t i = 0; i < methods.size(); ++i) {
      if (i) s += methods[i - 1] == Method::kNominal && methods[i] == Method::kInject ? ">=" : ">";
      s += to_string(methods[i]);
    }
    return s;
  };
  out += "# robust order " + chain(comparison.robust_chain) + ": " +
         (comparison.robust_order_holds ? "holds" : "violated") + "\n";
  out += "# nominal order " + chain(comparison.nominal_chain) + ": " +
         (comparison.nominal_order_holds ? "holds" : "violated") + "\n";
  return out;
}

}  // namespace uinject
