#include "oasd/oasd.h"

#include "oasd/run.hpp"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

struct oasd_dataset {
  oasd::LoadedDataset loaded;
};

struct oasd_config {
  oasd::RunConfig cfg;
  std::string scratch;
};

struct oasd_estimate {
  oasd::EstimateReport report;
  std::string rendered;
};

struct oasd_simulation {
  oasd::SimulateReport report;
  std::vector<oasd_mc_cell> rows;
  std::vector<std::string> flags;
  std::string rendered;
};

struct oasd_derivative {
  oasd::DerivativeComparison report;
  std::string rendered;
};

namespace {

thread_local std::string last_error;

oasd_status status_of(oasd::ErrorKind kind) {
  switch (kind) {
    case oasd::ErrorKind::InvalidArgument:
      return OASD_ERR_INVALID_ARGUMENT;
    case oasd::ErrorKind::Config:
      return OASD_ERR_CONFIG;
    case oasd::ErrorKind::Data:
      return OASD_ERR_DATA;
    case oasd::ErrorKind::Numerical:
      return OASD_ERR_NUMERICAL;
    case oasd::ErrorKind::Io:
      return OASD_ERR_IO;
  }
  return OASD_ERR_INTERNAL;
}

template <typename Fn>
oasd_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return OASD_OK;
  } catch (const oasd::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return OASD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return OASD_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return OASD_ERR_INTERNAL;
  }
}

void require(const void* ptr, const char* what) {
  if (!ptr) throw oasd::Error(oasd::ErrorKind::InvalidArgument, std::string(what) + " is null");
}

std::string text_or(const char* s, const char* fallback) { return s && *s ? s : fallback; }

}  // namespace

extern "C" {

const char* oasd_version(void) { return "1.0.0"; }

const char* oasd_last_error(void) { return last_error.c_str(); }

const char* oasd_status_name(oasd_status status) {
  switch (status) {
    case OASD_OK:
      return "ok";
    case OASD_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case OASD_ERR_CONFIG:
      return "config error";
    case OASD_ERR_DATA:
      return "data error";
    case OASD_ERR_NUMERICAL:
      return "numerical error";
    case OASD_ERR_IO:
      return "i/o error";
    case OASD_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

oasd_status oasd_dataset_load(const char* path, const char* outcome, const char* treatment, const char* covariates,
                              oasd_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    std::vector<std::string> cov;
    if (covariates && *covariates) {
      oasd::RunConfig parser(oasd::Command::Estimate);
      parser.set("covariates", covariates);
      cov = parser.covariates;
    }
    auto handle = std::make_unique<oasd_dataset>();
    handle->loaded = oasd::load_dataset(path, text_or(outcome, "y"), text_or(treatment, "d"), cov);
    handle->loaded.data.validate();
    *out = handle.release();
  });
}

oasd_status oasd_dataset_from_arrays(size_t n, size_t k, const double* y, const double* d, const double* x,
                                     oasd_dataset** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    if (n == 0) throw oasd::Error(oasd::ErrorKind::InvalidArgument, "n must be positive");
    require(y, "y");
    require(d, "d");
    if (k > 0) require(x, "x");
    auto handle = std::make_unique<oasd_dataset>();
    auto& data = handle->loaded.data;
    const auto rows = static_cast<oasd::Index>(n);
    const auto cols = static_cast<oasd::Index>(k);
    data.y = Eigen::Map<const oasd::Vector>(y, rows);
    data.d = Eigen::Map<const oasd::Vector>(d, rows);
    data.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x, rows, cols);
    for (size_t j = 0; j < k; ++j) data.covariate_names.push_back("x" + std::to_string(j + 1));
    data.validate();
    handle->loaded.summary = "dataset from arrays: " + std::to_string(n) + " rows, " + std::to_string(k) + " covariates";
    if (n < 50) handle->loaded.warnings.push_back("only " + std::to_string(n) + " rows (n < 50)");
    *out = handle.release();
  });
}

size_t oasd_dataset_rows(const oasd_dataset* data) {
  return data ? static_cast<size_t>(data->loaded.data.n()) : 0;
}

size_t oasd_dataset_covariates(const oasd_dataset* data) {
  return data ? static_cast<size_t>(data->loaded.data.num_covariates()) : 0;
}

const char* oasd_dataset_summary(const oasd_dataset* data) { return data ? data->loaded.summary.c_str() : ""; }

size_t oasd_dataset_warning_count(const oasd_dataset* data) { return data ? data->loaded.warnings.size() : 0; }

const char* oasd_dataset_warning(const oasd_dataset* data, size_t index) {
  if (!data || index >= data->loaded.warnings.size()) return nullptr;
  return data->loaded.warnings[index].c_str();
}

void oasd_dataset_free(oasd_dataset* data) { delete data; }

oasd_status oasd_config_create(const char* command, oasd_config** out) {
  return guarded([&] {
    require(command, "command");
    require(out, "out");
    *out = nullptr;
    *out = new oasd_config{oasd::RunConfig(oasd::parse_command(command)), {}};
  });
}

oasd_status oasd_config_set(oasd_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

oasd_status oasd_config_load_file(oasd_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    require(path, "path");
    cfg->cfg.load_file(path);
  });
}

oasd_status oasd_config_validate(const oasd_config* cfg) {
  return guarded([&] {
    require(cfg, "config");
    cfg->cfg.validate();
  });
}

const char* oasd_config_get(oasd_config* cfg, const char* key) {
  if (!cfg || !key) return nullptr;
  const std::string k = key;
  const auto& c = cfg->cfg;
  if (k == "out") {
    cfg->scratch = c.out;
  } else if (k == "format") {
    cfg->scratch = c.format;
  } else if (k == "input") {
    cfg->scratch = c.input;
  } else if (k == "outcome") {
    cfg->scratch = c.outcome;
  } else if (k == "treatment") {
    cfg->scratch = c.treatment;
  } else if (k == "covariates") {
    cfg->scratch.clear();
    for (std::size_t i = 0; i < c.covariates.size(); ++i) cfg->scratch += (i ? "," : "") + c.covariates[i];
  } else {
    last_error = "unknown config key '" + k + "'";
    return nullptr;
  }
  return cfg->scratch.c_str();
}

void oasd_config_free(oasd_config* cfg) { delete cfg; }

oasd_status oasd_run_estimate(const oasd_config* cfg, const oasd_dataset* data, oasd_estimate** out) {
  return guarded([&] {
    require(cfg, "config");
    require(data, "dataset");
    require(out, "out");
    *out = nullptr;
    if (cfg->cfg.command != oasd::Command::Estimate) {
      throw oasd::Error(oasd::ErrorKind::Config, "config was created for another command");
    }
    *out = new oasd_estimate{oasd::run_estimate(data->loaded.data, cfg->cfg), {}};
  });
}

uint64_t oasd_estimate_seed(const oasd_estimate* est) { return est ? est->report.seed : 0; }

size_t oasd_estimate_interval_count(const oasd_estimate* est) { return est ? est->report.rows.size() : 0; }

oasd_status oasd_estimate_interval(const oasd_estimate* est, size_t index, oasd_interval_result* out) {
  return guarded([&] {
    require(est, "estimate");
    require(out, "out");
    if (index >= est->report.rows.size()) {
      throw oasd::Error(oasd::ErrorKind::InvalidArgument, "interval index out of range");
    }
    const auto& r = est->report.rows[index];
    *out = oasd_interval_result{r.u.y1,         r.u.y2,          r.usable ? 1 : 0, r.p_hat,
                                r.theta_adml,   r.se_adml,       r.ci_adml_lo,     r.ci_adml_hi,
                                r.band_adml_lo, r.band_adml_hi,  r.theta_naive,    r.se_naive,
                                r.ci_naive_lo,  r.ci_naive_hi,   r.band_naive_lo,  r.band_naive_hi};
  });
}

size_t oasd_estimate_warning_count(const oasd_estimate* est) { return est ? est->report.warnings.size() : 0; }

const char* oasd_estimate_warning(const oasd_estimate* est, size_t index) {
  if (!est || index >= est->report.warnings.size()) return nullptr;
  return est->report.warnings[index].c_str();
}

const char* oasd_estimate_render(oasd_estimate* est, const char* kind) {
  const oasd_status st = guarded([&] {
    require(est, "estimate");
    require(kind, "kind");
    const std::string k = kind;
    if (k == "table") {
      est->rendered = oasd::format_estimate_table(est->report);
    } else if (k == "json") {
      est->rendered = oasd::format_estimate_json(est->report);
    } else if (k == "csv") {
      est->rendered = oasd::format_estimate_csv(est->report);
    } else {
      throw oasd::Error(oasd::ErrorKind::InvalidArgument, "render kind must be table, json or csv");
    }
  });
  return st == OASD_OK ? est->rendered.c_str() : nullptr;
}

oasd_status oasd_estimate_write(oasd_estimate* est, const char* prefix, const char* format) {
  return guarded([&] {
    require(est, "estimate");
    require(prefix, "prefix");
    const auto& r = est->report;
    oasd::write_outputs(prefix, text_or(format, "json"), oasd::format_estimate_table(r),
                        oasd::format_estimate_json(r), oasd::format_estimate_csv(r));
  });
}

void oasd_estimate_free(oasd_estimate* est) { delete est; }

oasd_status oasd_run_simulate(const oasd_config* cfg, oasd_simulation** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    *out = nullptr;
    if (cfg->cfg.command != oasd::Command::Simulate) {
      throw oasd::Error(oasd::ErrorKind::Config, "config was created for another command");
    }
    auto handle = std::make_unique<oasd_simulation>();
    handle->report = oasd::run_simulate(cfg->cfg);
    for (const auto& cell : handle->report.cells) {
      for (const auto& m : cell.cells) {
        oasd_mc_cell row{};
        row.rd2 = cell.config.rd2;
        row.ry2 = cell.config.ry2;
        std::strncpy(row.band, m.band.c_str(), sizeof row.band - 1);
        std::strncpy(row.estimator, m.estimator.c_str(), sizeof row.estimator - 1);
        row.theta_true = m.theta_true;
        row.mean_theta = m.mean_theta;
        row.bias_ratio = m.bias_ratio;
        row.std = m.std;
        row.mse = m.mse;
        row.coverage = m.coverage;
        row.reps = m.reps;
        handle->rows.push_back(row);
      }
      for (const auto& f : cell.flags) {
        handle->flags.push_back("cell (" + oasd::num(cell.config.rd2) + ", " + oasd::num(cell.config.ry2) + "): " + f);
      }
    }
    *out = handle.release();
  });
}

uint64_t oasd_simulation_seed(const oasd_simulation* sim) { return sim ? sim->report.seed : 0; }

size_t oasd_simulation_row_count(const oasd_simulation* sim) { return sim ? sim->rows.size() : 0; }

oasd_status oasd_simulation_row(const oasd_simulation* sim, size_t index, oasd_mc_cell* out) {
  return guarded([&] {
    require(sim, "simulation");
    require(out, "out");
    if (index >= sim->rows.size()) throw oasd::Error(oasd::ErrorKind::InvalidArgument, "row index out of range");
    *out = sim->rows[index];
  });
}

size_t oasd_simulation_flag_count(const oasd_simulation* sim) { return sim ? sim->flags.size() : 0; }

const char* oasd_simulation_flag(const oasd_simulation* sim, size_t index) {
  if (!sim || index >= sim->flags.size()) return nullptr;
  return sim->flags[index].c_str();
}

const char* oasd_simulation_render(oasd_simulation* sim, const char* kind) {
  const oasd_status st = guarded([&] {
    require(sim, "simulation");
    require(kind, "kind");
    const std::string k = kind;
    if (k == "table") {
      sim->rendered = oasd::format_simulate_table(sim->report);
    } else if (k == "json") {
      sim->rendered = oasd::format_simulate_json(sim->report);
    } else if (k == "csv") {
      sim->rendered = oasd::format_simulate_csv(sim->report);
    } else {
      throw oasd::Error(oasd::ErrorKind::InvalidArgument, "render kind must be table, json or csv");
    }
  });
  return st == OASD_OK ? sim->rendered.c_str() : nullptr;
}

oasd_status oasd_simulation_write(oasd_simulation* sim, const char* prefix, const char* format) {
  return guarded([&] {
    require(sim, "simulation");
    require(prefix, "prefix");
    const auto& r = sim->report;
    oasd::write_outputs(prefix, text_or(format, "json"), oasd::format_simulate_table(r),
                        oasd::format_simulate_json(r), oasd::format_simulate_csv(r));
  });
}

void oasd_simulation_free(oasd_simulation* sim) { delete sim; }

oasd_status oasd_run_compare_derivative(const oasd_config* cfg, oasd_derivative** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    *out = nullptr;
    if (cfg->cfg.command != oasd::Command::CompareDerivative) {
      throw oasd::Error(oasd::ErrorKind::Config, "config was created for another command");
    }
    *out = new oasd_derivative{oasd::run_compare_derivative(cfg->cfg), {}};
  });
}

uint64_t oasd_derivative_seed(const oasd_derivative* cmp) { return cmp ? cmp->report.config.seed : 0; }

size_t oasd_derivative_row_count(const oasd_derivative* cmp) { return cmp ? cmp->report.tau.size() : 0; }

oasd_status oasd_derivative_row(const oasd_derivative* cmp, size_t index, double* tau, double* partial,
                                double* direct) {
  return guarded([&] {
    require(cmp, "comparison");
    if (index >= cmp->report.tau.size()) {
      throw oasd::Error(oasd::ErrorKind::InvalidArgument, "row index out of range");
    }
    if (tau) *tau = cmp->report.tau[index];
    if (partial) *partial = cmp->report.mean_dist_partial[index];
    if (direct) *direct = cmp->report.mean_dist_direct[index];
  });
}

const char* oasd_derivative_render(oasd_derivative* cmp, const char* kind) {
  const oasd_status st = guarded([&] {
    require(cmp, "comparison");
    require(kind, "kind");
    const std::string k = kind;
    if (k == "table") {
      cmp->rendered = oasd::format_derivative_table(cmp->report);
    } else if (k == "json") {
      cmp->rendered = oasd::format_derivative_json(cmp->report);
    } else if (k == "csv") {
      cmp->rendered = oasd::format_derivative_csv(cmp->report);
    } else {
      throw oasd::Error(oasd::ErrorKind::InvalidArgument, "render kind must be table, json or csv");
    }
  });
  return st == OASD_OK ? cmp->rendered.c_str() : nullptr;
}

oasd_status oasd_derivative_write(oasd_derivative* cmp, const char* prefix, const char* format) {
  return guarded([&] {
    require(cmp, "comparison");
    require(prefix, "prefix");
    const auto& r = cmp->report;
    oasd::write_outputs(prefix, text_or(format, "json"), oasd::format_derivative_table(r),
                        oasd::format_derivative_json(r), oasd::format_derivative_csv(r));
  });
}

void oasd_derivative_free(oasd_derivative* cmp) { delete cmp; }

}  // extern "C"
