#include "uinject/uinject.h"

#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "uinject/config.hpp"
#include "uinject/error.hpp"
#include "uinject/harness.hpp"
#include "uinject/mimo.hpp"
#include "uinject/mlp.hpp"
#include "uinject/percentile.hpp"

struct uinject_config {
  uinject::ExperimentConfig value;
};

struct uinject_report {
  uinject::EvalReport value;
};

struct uinject_model {
  uinject::MlpModel value;
};

namespace {

thread_local std::string last_error;

uinject_status status_of(uinject::ErrorKind kind) {
  switch (kind) {
    case uinject::ErrorKind::kUsage: return UINJECT_ERR_USAGE;
    case uinject::ErrorKind::kConfig: return UINJECT_ERR_CONFIG;
    case uinject::ErrorKind::kNumeric: return UINJECT_ERR_NUMERIC;
    case uinject::ErrorKind::kFormat: return UINJECT_ERR_FORMAT;
    case uinject::ErrorKind::kIo: return UINJECT_ERR_IO;
  }
  return UINJECT_ERR_INTERNAL;
}

uinject_status fail(uinject_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename F>
uinject_status guard(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const uinject::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(UINJECT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(UINJECT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(UINJECT_ERR_INTERNAL, "unknown exception");
  }
}

#define REQUIRE(cond, what) \
  if (!(cond)) return fail(UINJECT_ERR_USAGE, what)

uinject_status copy_text(const std::string& text, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = text.size();
  if (!buf) {
    if (cap != 0) return fail(UINJECT_ERR_USAGE, "buffer is NULL but capacity is not 0");
    return UINJECT_OK;
  }
  if (cap == 0) return fail(UINJECT_ERR_BUFFER, "buffer too small");
  const size_t n = text.size() < cap - 1 ? text.size() : cap - 1;
  std::memcpy(buf, text.data(), n);
  buf[n] = '\0';
  if (n < text.size()) return fail(UINJECT_ERR_BUFFER, "buffer too small");
  return UINJECT_OK;
}

}  // namespace

extern "C" {

const char* uinject_version(void) { return uinject::kVersion; }

const char* uinject_status_name(uinject_status status) {
  switch (status) {
    case UINJECT_OK: return "ok";
    case UINJECT_ERR_USAGE: return "usage error";
    case UINJECT_ERR_CONFIG: return "config error";
    case UINJECT_ERR_NUMERIC: return "numeric error";
    case UINJECT_ERR_FORMAT: return "format error";
    case UINJECT_ERR_IO: return "io error";
    case UINJECT_ERR_BUFFER: return "buffer too small";
    case UINJECT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* uinject_last_error(void) { return last_error.c_str(); }

uinject_status uinject_config_new(const char* environment, uinject_config** out) {
  return guard([&] {
    REQUIRE(environment && out, "environment and out must not be NULL");
    *out = new uinject_config{
        uinject::ExperimentConfig::defaults(uinject::parse_environment_kind(environment))};
    return UINJECT_OK;
  });
}

uinject_status uinject_config_load(const char* path, uinject_config** out) {
  return guard([&] {
    REQUIRE(path && out, "path and out must not be NULL");
    *out = new uinject_config{uinject::load_config(path)};
    return UINJECT_OK;
  });
}

uinject_status uinject_config_parse(const char* text, uinject_config** out) {
  return guard([&] {
    REQUIRE(text && out, "text and out must not be NULL");
    std::istringstream in(text);
    *out = new uinject_config{uinject::parse_config(in)};
    return UINJECT_OK;
  });
}

void uinject_config_free(uinject_config* config) { delete config; }

uinject_status uinject_config_set(uinject_config* config, const char* key, const char* value) {
  return guard([&] {
    REQUIRE(config && key && value, "config, key and value must not be NULL");
    config->value.set(key, value);
    return UINJECT_OK;
  });
}

uinject_status uinject_config_get(const uinject_config* config, const char* key, char* buf,
                                  size_t cap, size_t* needed) {
  return guard([&] {
    REQUIRE(config && key, "config and key must not be NULL");
    return copy_text(config->value.get(key), buf, cap, needed);
  });
}

uinject_status uinject_config_paper_scale(uinject_config* config) {
  return guard([&] {
    REQUIRE(config, "config must not be NULL");
    config->value.apply_paper_scale();
    return UINJECT_OK;
  });
}

uinject_status uinject_config_validate(const uinject_config* config) {
  return guard([&] {
    REQUIRE(config, "config must not be NULL");
    config->value.validate();
    return UINJECT_OK;
  });
}

uinject_status uinject_config_format(const uinject_config* config, char* buf, size_t cap,
                                     size_t* needed) {
  return guard([&] {
    REQUIRE(config, "config must not be NULL");
    return copy_text(uinject::format_config(config->value), buf, cap, needed);
  });
}

uinject_status uinject_train(const uinject_config* config) {
  return guard([&] {
    REQUIRE(config, "config must not be NULL");
    uinject::train_to_directory(config->value);
    return UINJECT_OK;
  });
}

uinject_status uinject_evaluate(const uinject_config* config, const char* checkpoint_dir,
                                uinject_report** out) {
  return guard([&] {
    REQUIRE(config, "config must not be NULL");
    uinject::EvalReport report = uinject::evaluate_to_directory(
        config->value, checkpoint_dir ? std::filesystem::path(checkpoint_dir)
                                      : std::filesystem::path());
    if (out) *out = new uinject_report{std::move(report)};
    return UINJECT_OK;
  });
}

uinject_status uinject_run(const uinject_config* config, uinject_report** out) {
  return guard([&] {
    REQUIRE(config, "config must not be NULL");
    uinject::EvalReport report = uinject::run_experiment(config->value);
    if (out) *out = new uinject_report{std::move(report)};
    return UINJECT_OK;
  });
}

uinject_status uinject_select_alpha(const uinject_config* config, double* alpha, double* medians,
                                    size_t medians_cap, size_t* grid_size) {
  return guard([&] {
    REQUIRE(config && alpha, "config and alpha must not be NULL");
    const uinject::ExperimentConfig& c = config->value;
    REQUIRE(c.environment == uinject::EnvironmentKind::kMimo,
            "alpha selection applies to the MIMO environment");
    c.validate();
    const uinject::AlphaSelection s = uinject::select_alpha(
        c.mimo, c.alpha_grid, c.alpha_scenarios, c.alpha_realizations, c.seed);
    *alpha = s.alpha;
    if (grid_size) *grid_size = s.grid.size();
    if (medians) {
      if (medians_cap < s.median_min_rate.size()) return fail(UINJECT_ERR_BUFFER, "medians too small");
      for (size_t i = 0; i < s.median_min_rate.size(); ++i) medians[i] = s.median_min_rate[i];
    }
    return UINJECT_OK;
  });
}

uinject_status uinject_report_load(const char* path, uinject_report** out) {
  return guard([&] {
    REQUIRE(path && out, "path and out must not be NULL");
    *out = new uinject_report{uinject::load_report(path)};
    return UINJECT_OK;
  });
}

uinject_status uinject_report_save(const uinject_report* report, const char* path) {
  return guard([&] {
    REQUIRE(report && path, "report and path must not be NULL");
    uinject::save_report(report->value, path);
    return UINJECT_OK;
  });
}

void uinject_report_free(uinject_report* report) { delete report; }

size_t uinject_report_method_count(const uinject_report* report) {
  return report ? report->value.methods.size() : 0;
}

uinject_status uinject_report_method(const uinject_report* report, size_t index, const char** name,
                                     double* mean_nominal, double* mean_robust) {
  return guard([&] {
    REQUIRE(report, "report must not be NULL");
    REQUIRE(index < report->value.methods.size(), "method index out of range");
    const uinject::MethodResult& m = report->value.methods[index];
    if (name) *name = uinject::to_string(m.method);
    if (mean_nominal) *mean_nominal = m.mean_nominal;
    if (mean_robust) *mean_robust = m.mean_robust;
    return UINJECT_OK;
  });
}

uinject_status uinject_report_json(const uinject_report* report, char* buf, size_t cap,
                                   size_t* needed) {
  return guard([&] {
    REQUIRE(report, "report must not be NULL");
    return copy_text(uinject::report_to_json(report->value), buf, cap, needed);
  });
}

uinject_status uinject_report_summary_csv(const uinject_report* report, char* buf, size_t cap,
                                          size_t* needed) {
  return guard([&] {
    REQUIRE(report, "report must not be NULL");
    return copy_text(uinject::summary_csv(report->value), buf, cap, needed);
  });
}

uinject_status uinject_report_cdf_csv(const uinject_report* report, const char* method, char* buf,
                                      size_t cap, size_t* needed) {
  return guard([&] {
    REQUIRE(report && method, "report and method must not be NULL");
    return copy_text(uinject::cdf_csv(report->value, uinject::parse_method(method)), buf, cap,
                     needed);
  });
}

uinject_status uinject_report_compare_csv(const uinject_report* report, char* buf, size_t cap,
                                          size_t* needed, int* robust_order_holds,
                                          int* nominal_order_holds) {
  return guard([&] {
    REQUIRE(report, "report must not be NULL");
    const uinject::Comparison c = uinject::compare_methods(report->value);
    if (robust_order_holds) *robust_order_holds = c.robust_order_holds ? 1 : 0;
    if (nominal_order_holds) *nominal_order_holds = c.nominal_order_holds ? 1 : 0;
    return copy_text(uinject::comparison_csv(c), buf, cap, needed);
  });
}

uinject_status uinject_model_load(const char* path, uinject_model** out) {
  return guard([&] {
    REQUIRE(path && out, "path and out must not be NULL");
    *out = new uinject_model{uinject::load_checkpoint(path)};
    return UINJECT_OK;
  });
}

void uinject_model_free(uinject_model* model) { delete model; }

size_t uinject_model_input_dim(const uinject_model* model) {
  return model ? static_cast<size_t>(model->value.input_dim()) : 0;
}

size_t uinject_model_output_dim(const uinject_model* model) {
  return model ? static_cast<size_t>(model->value.output_dim()) : 0;
}

uinject_status uinject_model_forward(const uinject_model* model, const double* input,
                                     size_t input_len, double* output, size_t output_len) {
  return guard([&] {
    REQUIRE(model && input && output, "model, input and output must not be NULL");
    REQUIRE(input_len == static_cast<size_t>(model->value.input_dim()),
            "input length does not match the model");
    REQUIRE(output_len == static_cast<size_t>(model->value.output_dim()),
            "output length does not match the model");
    const Eigen::Map<const Eigen::VectorXd> in(input, static_cast<Eigen::Index>(input_len));
    const Eigen::VectorXd y = uinject::forward(model->value, in);
    for (size_t i = 0; i < output_len; ++i) output[i] = y(static_cast<Eigen::Index>(i));
    return UINJECT_OK;
  });
}

uinject_status uinject_percentile(const double* samples, size_t count, double gamma,
                                  double* value) {
  return guard([&] {
    REQUIRE(value && (samples || count == 0), "samples and value must not be NULL");
    *value = uinject::empirical_percentile(std::span<const double>(samples, count), gamma).value;
    return UINJECT_OK;
  });
}

}  // extern "C"
