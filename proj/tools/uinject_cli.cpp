// uinject command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "uinject/uinject.h"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string environment = "mimo";
  std::string seed;
  std::string out;
  std::string methods;
  bool paper_scale = false;
  std::vector<std::string> overrides;
};

struct CliError {
  int code;
};

void check(uinject_status status, const char* what) {
  if (status != UINJECT_OK) {
    std::fprintf(stderr, "uinject: %s: %s: %s\n", what, uinject_status_name(status),
                 uinject_last_error());
    throw CliError{static_cast<int>(status) + 1};
  }
}

template <typename F>
std::string read_string(F&& call, const char* what) {
  size_t needed = 0;
  check(call(nullptr, 0, &needed), what);
  std::string text(needed + 1, '\0');
  check(call(text.data(), text.size(), &needed), what);
  text.resize(needed);
  return text;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Experiment config file (key = value lines)");
  cmd->add_option("--env", o.environment, "Environment when no config is given: mimo or d2d")
      ->check(CLI::IsMember({"mimo", "d2d"}));
  cmd->add_option("--seed", o.seed, "Master seed (experiment.seed)");
  cmd->add_option("--out", o.out, "Output directory (experiment.output_dir)");
  cmd->add_option("--methods", o.methods,
                  "Comma-separated subset of inject,nominal,maxmin,uniform,full");
  cmd->add_flag("--paper-scale", o.paper_scale,
                "Full-size protocol: minibatch 1000 x 50, 500 epochs, L 1000, pool 2000 x 1000");
  cmd->add_option("--set", o.overrides, "Override a config key: --set key=value (repeatable)");
}

struct ConfigHandle {
  uinject_config* ptr = nullptr;
  ~ConfigHandle() { uinject_config_free(ptr); }
};

struct ReportHandle {
  uinject_report* ptr = nullptr;
  ~ReportHandle() { uinject_report_free(ptr); }
};

void build_config(const CommonOptions& o, ConfigHandle& config) {
  if (!o.config_path.empty()) {
    check(uinject_config_load(o.config_path.c_str(), &config.ptr), "loading config");
  } else {
    check(uinject_config_new(o.environment.c_str(), &config.ptr), "creating config");
  }
  if (o.paper_scale) check(uinject_config_paper_scale(config.ptr), "--paper-scale");
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "uinject: --set expects key=value, got '%s'\n", kv.c_str());
      throw CliError{2};
    }
    check(uinject_config_set(config.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()),
          "--set");
  }
  if (!o.seed.empty()) check(uinject_config_set(config.ptr, "experiment.seed", o.seed.c_str()), "--seed");
  if (!o.out.empty()) {
    check(uinject_config_set(config.ptr, "experiment.output_dir", o.out.c_str()), "--out");
  }
  if (!o.methods.empty()) {
    check(uinject_config_set(config.ptr, "experiment.methods", o.methods.c_str()), "--methods");
  }
  check(uinject_config_validate(config.ptr), "validating config");
}

std::string config_value(const ConfigHandle& config, const char* key) {
  return read_string(
      [&](char* buf, size_t cap, size_t* needed) {
        return uinject_config_get(config.ptr, key, buf, cap, needed);
      },
      key);
}

void print_summary(const ReportHandle& report) {
  std::cout << read_string(
      [&](char* buf, size_t cap, size_t* needed) {
        return uinject_report_summary_csv(report.ptr, buf, cap, needed);
      },
      "summary");
}

std::string report_path(const std::string& explicit_path, const std::string& out) {
  if (!explicit_path.empty()) return explicit_path;
  return (std::filesystem::path(out.empty() ? "out" : out) / "report.json").string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-injection training for percentile-robust power control"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(uinject_version()));

  CommonOptions train_opts, eval_opts, run_opts, alpha_opts;
  auto* train = app.add_subcommand("train", "Train the learned methods and write checkpoints");
  add_common(train, train_opts);

  std::string checkpoints;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate every method on the test pool");
  add_common(evaluate, eval_opts);
  evaluate->add_option("--checkpoints", checkpoints, "Directory holding checkpoints (default: --out)");

  auto* run = app.add_subcommand("run", "Train, then evaluate, in one pass");
  add_common(run, run_opts);

  std::string compare_report, compare_csv;
  bool compare_check = false;
  auto* compare = app.add_subcommand("compare", "Ratios and orderings from a saved report");
  compare->add_option("--report", compare_report, "Report file (default: <out>/report.json)");
  std::string compare_out;
  compare->add_option("--out", compare_out, "Directory holding report.json");
  compare->add_option("--csv", compare_csv, "Also write the table to this file");
  compare->add_flag("--check", compare_check, "Exit with status 1 if an ordering is violated");

  std::string cdf_report, cdf_out, cdf_methods;
  auto* cdf = app.add_subcommand("cdf", "Write cdf_<method>.csv files from a saved report");
  cdf->add_option("--report", cdf_report, "Report file (default: <out>/report.json)");
  cdf->add_option("--out", cdf_out, "Directory to write into (default: the report's directory)");
  cdf->add_option("--methods", cdf_methods, "Comma-separated methods (default: all in the report)");

  auto* alpha = app.add_subcommand("alpha-select", "Pick the RZF alpha on the configured grid");
  add_common(alpha, alpha_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ConfigHandle config;
      build_config(train_opts, config);
      check(uinject_train(config.ptr), "train");
      std::cout << "trained into " << config_value(config, "experiment.output_dir") << "\n";
    } else if (*evaluate) {
      ConfigHandle config;
      build_config(eval_opts, config);
      ReportHandle report;
      check(uinject_evaluate(config.ptr, checkpoints.empty() ? nullptr : checkpoints.c_str(),
                             &report.ptr),
            "evaluate");
      print_summary(report);
    } else if (*run) {
      ConfigHandle config;
      build_config(run_opts, config);
      ReportHandle report;
      check(uinject_run(config.ptr, &report.ptr), "run");
      print_summary(report);
    } else if (*compare) {
      ReportHandle report;
      check(uinject_report_load(report_path(compare_report, compare_out).c_str(), &report.ptr),
            "loading report");
      int robust_ok = 0, nominal_ok = 0;
      const std::string table = read_string(
          [&](char* buf, size_t cap, size_t* needed) {
            return uinject_report_compare_csv(report.ptr, buf, cap, needed, &robust_ok, &nominal_ok);
          },
          "compare");
      std::cout << table;
      if (!compare_csv.empty()) {
        std::ofstream f(compare_csv, std::ios::binary);
        f << table;
        if (!f) {
          std::fprintf(stderr, "uinject: cannot write %s\n", compare_csv.c_str());
          return 6;
        }
      }
      if (compare_check && !(robust_ok && nominal_ok)) return 1;
    } else if (*cdf) {
      const std::string path = report_path(cdf_report, cdf_out);
      ReportHandle report;
      check(uinject_report_load(path.c_str(), &report.ptr), "loading report");
      std::vector<std::string> methods;
      if (cdf_methods.empty()) {
        for (size_t i = 0; i < uinject_report_method_count(report.ptr); ++i) {
          const char* name = nullptr;
          check(uinject_report_method(report.ptr, i, &name, nullptr, nullptr), "report");
          methods.emplace_back(name);
        }
      } else {
        std::stringstream ss(cdf_methods);
        std::string m;
        while (std::getline(ss, m, ',')) methods.push_back(m);
      }
      const std::filesystem::path dir =
          cdf_out.empty() ? std::filesystem::path(path).parent_path() : std::filesystem::path(cdf_out);
      std::filesystem::create_directories(dir.empty() ? "." : dir);
      for (const std::string& m : methods) {
        const std::string text = read_string(
            [&](char* buf, size_t cap, size_t* needed) {
              return uinject_report_cdf_csv(report.ptr, m.c_str(), buf, cap, needed);
            },
            "cdf");
        const std::filesystem::path file = dir / ("cdf_" + m + ".csv");
        std::ofstream f(file, std::ios::binary);
        f << text;
        if (!f) {
          std::fprintf(stderr, "uinject: cannot write %s\n", file.string().c_str());
          return 6;
        }
        std::cout << file.string() << "\n";
      }
    } else if (*alpha) {
      ConfigHandle config;
      build_config(alpha_opts, config);
      const std::string grid = config_value(config, "environment.mimo.alpha_grid");
      std::vector<std::string> entries;
      std::stringstream ss(grid);
      for (std::string a; std::getline(ss, a, ',');) entries.push_back(a);
      double chosen = 0.0;
      size_t grid_size = 0;
      std::vector<double> medians(entries.size());
      check(uinject_select_alpha(config.ptr, &chosen, medians.data(), medians.size(), &grid_size),
            "alpha-select");
      std::cout << "alpha,median_min_rate_mbps\n";
      for (size_t i = 0; i < grid_size; ++i) {
        std::printf("%s,%.6g\n", entries[i].c_str(), medians[i] * 1e-6);
      }
      std::printf("# selected alpha %.6g\n", chosen);
    }
  } catch (const CliError& e) {
    return e.code;
  }
  return 0;
}
