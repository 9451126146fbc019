// Command-line front end. Talks to the library only through the C interface.
#include <oasd/oasd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace {

struct Flag {
  const char* key;    // config key
  const char* names;  // CLI11 option names
  const char* help;
  bool is_switch = false;
};

const std::vector<Flag> kShared = {
    {"seed", "--seed", "RNG seed; a random seed is drawn and logged when absent"},
    {"out", "--out,-o", "output prefix; writes <out>.txt and <out>.json or <out>.csv"},
    {"format", "--format", "structured output format: json or csv"},
    {"threads", "--threads", "worker threads (0 = available parallelism)"},
};

const std::vector<Flag> kModel = {
    {"degree", "--degree", "basis polynomial degree"},
    {"ell", "--ell", "difference scheme order"},
    {"riemann-steps", "--riemann-steps,--J", "Riemann steps for the integrated CDF"},
    {"interpolation", "--interpolation", "grid interpolation: step or linear"},
    {"loading-iters", "--loading-iters", "penalty loading iterations"},
    {"alpha", "--alpha", "significance level in (0, 0.5)"},
    {"riesz-rule", "--riesz-rule", "Riesz penalty rule: root-n or sqrt-log-p"},
    {"riesz-kappa", "--riesz-kappa", "scale on the Riesz penalty constant"},
    {"riesz-post-lasso", "--riesz-post-lasso", "refit the Riesz coefficients on their support (true/false)"},
    {"grid", "--grid", "number of outcome grid quantiles"},
};

const std::vector<Flag> kEstimate = {
    {"input", "--input,-i", "delimited data file with a header row"},
    {"outcome", "--outcome", "outcome column name"},
    {"treatment", "--treatment", "treatment column name"},
    {"covariates", "--covariates", "comma-separated covariate columns (default: all others)"},
    {"intervals", "--intervals", "comma-separated lo:hi pairs; prefix q for quantiles, e.g. q0.05:q0.15"},
    {"interval-units", "--interval-units", "reading of bare numbers in --intervals: value or quantile"},
    {"bootstrap", "--B,--bootstrap", "multiplier bootstrap draws"},
    {"weights", "--weights", "multiplier law: normal, rademacher or mammen"},
    {"estimator", "--estimator", "adml, naive or both"},
};

const std::vector<Flag> kSimulate = {
    {"design", "--design", "simulation design (main)"},
    {"rd2", "--rd2", "treatment equation R^2 in (0, 1)"},
    {"ry2", "--ry2", "outcome equation R^2 in (0, 1)"},
    {"reps", "--reps", "Monte Carlo replications"},
    {"n", "--n", "sample size per replication"},
    {"num-covariates", "--num-covariates,--K", "number of covariates"},
    {"oracle-n", "--oracle-n", "draws for the true-value oracle (>= 1e6)"},
    {"all-cells", "--all-cells", "run every (rd2, ry2) combination of 0.1, 0.2, 0.3, 0.4", true},
    {"homogeneity-draws", "--homogeneity-draws", "bootstrap draws for the homogeneity test (0 = off)"},
};

const std::vector<Flag> kCompare = {
    {"dgp", "--dgp", "data generating process: 1, 2 or 3"},
    {"design", "--design", "coefficient design: i, ii, iii or iv"},
    {"reps", "--reps", "replications"},
    {"n", "--n", "sample size"},
    {"dim", "--dim,--p", "basis dimension"},
    {"tau", "--tau", "comma-separated quantile levels"},
    {"loading-iters", "--loading-iters", "penalty loading iterations"},
};

struct Command {
  Command(std::string cmd_name, std::string out) : name(std::move(cmd_name)), default_out(std::move(out)) {}
  std::string name;
  std::string default_out;
  CLI::App* app = nullptr;
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> switches;
  std::map<std::string, CLI::Option*> options;
};

void add_flags(Command& cmd, const std::vector<Flag>& flags) {
  for (const auto& f : flags) {
    cmd.options[f.key] = f.is_switch ? cmd.app->add_flag(f.names, cmd.switches[f.key], f.help)
                                     : cmd.app->add_option(f.names, cmd.values[f.key], f.help);
  }
}

const char* kind_name(oasd_status st) {
  switch (st) {
    case OASD_ERR_INVALID_ARGUMENT:
      return "invalid_argument";
    case OASD_ERR_CONFIG:
      return "config";
    case OASD_ERR_DATA:
      return "data";
    case OASD_ERR_NUMERICAL:
      return "numerical";
    case OASD_ERR_IO:
      return "io";
    default:
      return "internal";
  }
}

// Failure carrying the library status; reported as one JSON line on stderr.
struct Failure {
  oasd_status status;
  std::string message;
};

void check(oasd_status st) {
  if (st != OASD_OK) throw Failure{st, oasd_last_error()};
}

void log(const std::string& line) { std::cerr << "oasd: " << line << '\n'; }

template <typename Handle, typename Fn>
struct Owned {
  Handle* ptr = nullptr;
  Fn release;
  explicit Owned(Fn f) : release(f) {}
  ~Owned() {
    if (ptr) release(ptr);
  }
  Owned(const Owned&) = delete;
  Owned& operator=(const Owned&) = delete;
};

template <typename Handle, typename Fn>
Owned<Handle, Fn> owned(Fn f) {
  return Owned<Handle, Fn>(f);
}

oasd_config* build_config(Command& cmd, Owned<oasd_config, void (*)(oasd_config*)>& cfg) {
  check(oasd_config_create(cmd.name.c_str(), &cfg.ptr));
  if (!cmd.config_path.empty()) check(oasd_config_load_file(cfg.ptr, cmd.config_path.c_str()));
  // Flags given on the command line override the file.
  for (const auto& [key, value] : cmd.values) {
    if (cmd.options.at(key)->count() > 0) check(oasd_config_set(cfg.ptr, key.c_str(), value.c_str()));
  }
  for (const auto& [key, on] : cmd.switches) {
    if (on) check(oasd_config_set(cfg.ptr, key.c_str(), "true"));
  }
  check(oasd_config_validate(cfg.ptr));
  return cfg.ptr;
}

std::string output_prefix(oasd_config* cfg, const Command& cmd) {
  const char* out = oasd_config_get(cfg, "out");
  return out && *out ? out : cmd.default_out;
}

void run_estimate(Command& cmd) {
  auto cfg = owned<oasd_config>(&oasd_config_free);
  build_config(cmd, cfg);
  const std::string input = oasd_config_get(cfg.ptr, "input");
  if (input.empty()) throw Failure{OASD_ERR_CONFIG, "estimate needs --input"};
  const std::string outcome = oasd_config_get(cfg.ptr, "outcome");
  const std::string treatment = oasd_config_get(cfg.ptr, "treatment");
  const std::string covariates = oasd_config_get(cfg.ptr, "covariates");

  auto data = owned<oasd_dataset>(&oasd_dataset_free);
  check(oasd_dataset_load(input.c_str(), outcome.c_str(), treatment.c_str(), covariates.c_str(), &data.ptr));
  log(oasd_dataset_summary(data.ptr));
  for (size_t i = 0; i < oasd_dataset_warning_count(data.ptr); ++i) {
    log(std::string("warning: ") + oasd_dataset_warning(data.ptr, i));
  }

  auto est = owned<oasd_estimate>(&oasd_estimate_free);
  check(oasd_run_estimate(cfg.ptr, data.ptr, &est.ptr));
  log("seed " + std::to_string(oasd_estimate_seed(est.ptr)));
  for (size_t i = 0; i < oasd_estimate_warning_count(est.ptr); ++i) {
    log(std::string("warning: ") + oasd_estimate_warning(est.ptr, i));
  }
  const std::string prefix = output_prefix(cfg.ptr, cmd);
  check(oasd_estimate_write(est.ptr, prefix.c_str(), oasd_config_get(cfg.ptr, "format")));
  const char* table = oasd_estimate_render(est.ptr, "table");
  if (table) std::cout << table;
  log("wrote " + prefix + ".*");
}

void run_simulate(Command& cmd) {
  auto cfg = owned<oasd_config>(&oasd_config_free);
  build_config(cmd, cfg);
  auto sim = owned<oasd_simulation>(&oasd_simulation_free);
  check(oasd_run_simulate(cfg.ptr, &sim.ptr));
  log("seed " + std::to_string(oasd_simulation_seed(sim.ptr)));
  for (size_t i = 0; i < oasd_simulation_flag_count(sim.ptr); ++i) {
    log(std::string("warning: ") + oasd_simulation_flag(sim.ptr, i));
  }
  const std::string prefix = output_prefix(cfg.ptr, cmd);
  check(oasd_simulation_write(sim.ptr, prefix.c_str(), oasd_config_get(cfg.ptr, "format")));
  const char* table = oasd_simulation_render(sim.ptr, "table");
  if (table) std::cout << table;
  log("wrote " + prefix + ".*");
}

void run_compare(Command& cmd) {
  auto cfg = owned<oasd_config>(&oasd_config_free);
  build_config(cmd, cfg);
  auto cmp = owned<oasd_derivative>(&oasd_derivative_free);
  check(oasd_run_compare_derivative(cfg.ptr, &cmp.ptr));
  log("seed " + std::to_string(oasd_derivative_seed(cmp.ptr)));
  const std::string prefix = output_prefix(cfg.ptr, cmd);
  check(oasd_derivative_write(cmp.ptr, prefix.c_str(), oasd_config_get(cfg.ptr, "format")));
  const char* table = oasd_derivative_render(cmp.ptr, "table");
  if (table) std::cout << table;
  log("wrote " + prefix + ".*");
}

int report_failure(const char* kind, int code, const std::string& message) {
  nlohmann::ordered_json err;
  err["error"] = kind;
  err["code"] = code;
  err["message"] = message;
  std::cerr << err.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outcome-conditioned average structural derivative estimation"};
  app.set_version_flag("--version", std::string(oasd_version()));
  app.require_subcommand(1);

  Command estimate{"estimate", "results"};
  Command simulate{"simulate", "mc_report"};
  Command compare{"compare-derivative", "deriv_report"};
  estimate.app = app.add_subcommand("estimate", "estimate OASD over outcome intervals on a data file");
  simulate.app = app.add_subcommand("simulate", "Monte Carlo reproduction of the main simulation design");
  compare.app = app.add_subcommand("compare-derivative", "partial-difference versus direct derivative accuracy");

  for (Command* cmd : {&estimate, &simulate, &compare}) {
    cmd->app->add_option("--config,-c", cmd->config_path, "flat key = value file; flags override it")
        ->check(CLI::ExistingFile);
    add_flags(*cmd, kShared);
  }
  add_flags(estimate, kModel);
  add_flags(estimate, kEstimate);
  add_flags(simulate, kModel);
  add_flags(simulate, kSimulate);
  add_flags(compare, kCompare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_failure("usage", 64, e.what());
  }

  try {
    if (estimate.app->parsed()) run_estimate(estimate);
    if (simulate.app->parsed()) run_simulate(simulate);
    if (compare.app->parsed()) run_compare(compare);
  } catch (const Failure& f) {
    return report_failure(kind_name(f.status), static_cast<int>(f.status), f.message);
  } catch (const std::exception& e) {
    return report_failure("internal", static_cast<int>(OASD_ERR_INTERNAL), e.what());
  }
  return 0;
}
