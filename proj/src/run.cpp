#include "oasd/run.hpp"

#include "oasd/parallel.hpp"
#include "oasd/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

namespace oasd {

using nlohmann::ordered_json;

Command parse_command(const std::string& name) {
  if (name == "estimate") return Command::Estimate;
  if (name == "simulate") return Command::Simulate;
  if (name == "compare-derivative") return Command::CompareDerivative;
  throw Error(ErrorKind::Config, "unknown command '" + name + "'");
}

std::string to_string(Command command) {
  switch (command) {
    case Command::Estimate:
      return "estimate";
    case Command::Simulate:
      return "simulate";
    case Command::CompareDerivative:
      return "compare-derivative";
  }
  return "estimate";
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

bool parse_double(const std::string& text, double& value) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* begin = t.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), value);
  return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(value);
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  if (!parse_double(value, out)) {
    throw Error(ErrorKind::Config, "option '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

long long to_integer(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw Error(ErrorKind::Config, "option '" + key + "' expects an integer, got '" + value + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  const std::string t = trim(value);
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw Error(ErrorKind::Config, "option '" + key + "' expects true/false, got '" + value + "'");
}

std::string normalize_key(std::string key) {
  key = trim(key);
  std::replace(key.begin(), key.end(), '_', '-');
  if (key == "b" || key == "B") return "bootstrap";
  if (key == "J" || key == "j") return "riemann-steps";
  if (key == "K") return "num-covariates";
  if (key == "p") return "dim";
  return key;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(to_double(key, item));
  }
  return out;
}

const std::vector<std::string> kSharedKeys = {"seed", "out", "format", "threads"};
const std::vector<std::string> kModelKeys = {
    "degree",      "ell",          "riemann-steps",    "interpolation", "loading-iters", "alpha",
    "riesz-rule",  "riesz-kappa",  "riesz-post-lasso", "grid"};

}  // namespace

/// Shortest decimal text that round-trips to the same double.
std::string num(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : "nan";
}

RunConfig::RunConfig(Command cmd) : command(cmd) {
  if (cmd == Command::CompareDerivative) {
    reps = 50;
    design = "i";
  }
}

std::vector<std::string> RunConfig::allowed_keys(Command command) {
  std::vector<std::string> keys = kSharedKeys;
  auto add = [&](std::initializer_list<const char*> extra) {
    for (const char* k : extra) keys.emplace_back(k);
  };
  switch (command) {
    case Command::Estimate:
      keys.insert(keys.end(), kModelKeys.begin(), kModelKeys.end());
      add({"bootstrap", "weights", "estimator", "input", "outcome", "treatment", "covariates", "intervals",
           "interval-units"});
      break;
    case Command::Simulate:
      keys.insert(keys.end(), kModelKeys.begin(), kModelKeys.end());
      add({"design", "rd2", "ry2", "reps", "n", "num-covariates", "oracle-n", "all-cells", "homogeneity-draws"});
      break;
    case Command::CompareDerivative:
      add({"loading-iters", "dgp", "design", "reps", "n", "dim", "tau"});
      break;
  }
  return keys;
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = normalize_key(raw_key);
  const std::string value = trim(raw_value);
  const auto allowed = allowed_keys(command);
  if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
    throw Error(ErrorKind::Config, "unknown option '" + raw_key + "' for command " + to_string(command));
  }
  if (key == "seed") {
    const long long s = to_integer(key, value);
    if (s < 0) throw Error(ErrorKind::Config, "seed must be non-negative");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "out") {
    out = value;
  } else if (key == "format") {
    format = value;
  } else if (key == "threads") {
    const long long t = to_integer(key, value);
    if (t < 0) throw Error(ErrorKind::Config, "threads must be >= 0");
    threads = static_cast<std::size_t>(t);
  } else if (key == "degree") {
    degree = static_cast<int>(to_integer(key, value));
  } else if (key == "ell") {
    ell = static_cast<int>(to_integer(key, value));
  } else if (key == "riemann-steps") {
    riemann_steps = static_cast<int>(to_integer(key, value));
  } else if (key == "interpolation") {
    interpolation = value;
  } else if (key == "loading-iters") {
    loading_iters = static_cast<int>(to_integer(key, value));
  } else if (key == "alpha") {
    alpha = to_double(key, value);
  } else if (key == "riesz-rule") {
    riesz_rule = value;
  } else if (key == "riesz-kappa") {
    riesz_kappa = to_double(key, value);
  } else if (key == "riesz-post-lasso") {
    riesz_post_lasso = to_bool(key, value);
  } else if (key == "grid") {
    grid = static_cast<int>(to_integer(key, value));
  } else if (key == "bootstrap") {
    bootstrap = static_cast<int>(to_integer(key, value));
  } else if (key == "weights") {
    weights = value;
  } else if (key == "estimator") {
    estimator = value;
  } else if (key == "input") {
    input = value;
  } else if (key == "outcome") {
    outcome = value;
  } else if (key == "treatment") {
    treatment = value;
  } else if (key == "covariates") {
    covariates.clear();
    for (const auto& c : split(value, ',')) {
      if (!trim(c).empty()) covariates.push_back(trim(c));
    }
  } else if (key == "intervals") {
    intervals = value;
  } else if (key == "interval-units") {
    interval_units = value;
  } else if (key == "design") {
    design = value;
  } else if (key == "rd2") {
    rd2 = to_double(key, value);
  } else if (key == "ry2") {
    ry2 = to_double(key, value);
  } else if (key == "reps") {
    reps = static_cast<int>(to_integer(key, value));
  } else if (key == "n") {
    n = static_cast<Index>(to_integer(key, value));
  } else if (key == "num-covariates") {
    num_covariates = static_cast<Index>(to_integer(key, value));
  } else if (key == "oracle-n") {
    oracle_n = static_cast<Index>(to_integer(key, value));
  } else if (key == "all-cells") {
    all_cells = to_bool(key, value);
  } else if (key == "homogeneity-draws") {
    homogeneity_draws = static_cast<int>(to_integer(key, value));
  } else if (key == "dgp") {
    dgp = static_cast<int>(to_integer(key, value));
  } else if (key == "dim") {
    dim = static_cast<Index>(to_integer(key, value));
  } else if (key == "tau") {
    tau = value;
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config file '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config,
                  path + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    }
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (format != "json" && format != "csv") fail("format must be json or csv");
  if (command != Command::CompareDerivative) {
    if (degree < 1 || degree > 2) fail("degree must be 1 or 2");
    if (ell < 1 || ell > 6) fail("ell must lie in 1..6");
    if (riemann_steps < 1) fail("riemann-steps must be >= 1");
    if (interpolation != "step" && interpolation != "linear") fail("interpolation must be step or linear");
    if (!(alpha > 0.0 && alpha < 0.5)) fail("alpha must lie in (0, 0.5)");
    if (riesz_rule != "root-n" && riesz_rule != "sqrt-log-p") fail("riesz-rule must be root-n or sqrt-log-p");
    if (!(riesz_kappa > 0.0)) fail("riesz-kappa must be positive");
    if (grid < 1) fail("grid must be >= 1");
  }
  if (loading_iters < 0) fail("loading-iters must be >= 0");
  switch (command) {
    case Command::Estimate: {
      if (input.empty()) fail("estimate needs --input");
      if (bootstrap < 1) fail("bootstrap must be >= 1");
      parse_multiplier_law(weights);
      if (estimator != "adml" && estimator != "naive" && estimator != "both") {
        fail("estimator must be adml, naive or both");
      }
      if (interval_units != "value" && interval_units != "quantile") {
        fail("interval-units must be value or quantile");
      }
      parse_intervals(intervals, interval_units == "quantile");
      break;
    }
    case Command::Simulate: {
      if (design != "main") fail("simulate supports design 'main' only");
      if (!(rd2 > 0.0 && rd2 < 1.0)) fail("rd2 must lie in (0, 1)");
      if (!(ry2 > 0.0 && ry2 < 1.0)) fail("ry2 must lie in (0, 1)");
      if (reps < 1) fail("reps must be >= 1");
      if (n < 20) fail("n must be >= 20");
      if (num_covariates < 1) fail("num-covariates must be >= 1");
      if (oracle_n < 1000000) fail("oracle-n must be >= 1000000");
      if (homogeneity_draws < 0) fail("homogeneity-draws must be >= 0");
      break;
    }
    case Command::CompareDerivative: {
      if (dgp < 1 || dgp > 3) fail("dgp must be 1, 2 or 3");
      parse_design(design);
      if (reps < 1) fail("reps must be >= 1");
      if (n < 20) fail("n must be >= 20");
      if (dim < 1) fail("dim must be >= 1");
      const auto taus = parse_list("tau", tau);
      if (taus.empty()) fail("tau list is empty");
      for (double t : taus) {
        if (!(t > 0.0 && t < 1.0)) fail("tau values must lie in (0, 1)");
      }
      break;
    }
  }
}

std::uint64_t RunConfig::resolved_seed() const {
  if (seed) return *seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

PipelineOptions RunConfig::pipeline_options() const {
  PipelineOptions opts;
  opts.basis.degree = degree;
  opts.dist.max_loading_iters = loading_iters;
  opts.dist.workers = threads;
  opts.ell = ell;
  opts.integral.riemann_steps = riemann_steps;
  opts.integral.interpolation = interpolation == "linear" ? GridInterpolation::Linear : GridInterpolation::Step;
  opts.riesz.rule = riesz_rule == "sqrt-log-p" ? RieszPenaltyRule::SqrtLogP : RieszPenaltyRule::Root_n;
  opts.riesz.kappa_scale = riesz_kappa;
  opts.riesz.post_lasso = riesz_post_lasso;
  opts.grid_quantiles = grid;
  return opts;
}

MultiplierLaw RunConfig::multiplier_law() const { return parse_multiplier_law(weights); }

std::vector<IntervalSpec> parse_intervals(const std::string& text, bool bare_as_quantile) {
  std::vector<IntervalSpec> out;
  for (const auto& raw : split(text, ',')) {
    const std::string item = trim(raw);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw Error(ErrorKind::Config, "interval '" + item + "' must look like lo:hi");
    }
    IntervalSpec spec;
    spec.text = item;
    bool kinds[2] = {bare_as_quantile, bare_as_quantile};
    double values[2] = {0.0, 0.0};
    const std::string parts[2] = {trim(item.substr(0, colon)), trim(item.substr(colon + 1))};
    for (int s = 0; s < 2; ++s) {
      std::string part = parts[s];
      if (!part.empty() && (part[0] == 'q' || part[0] == 'Q')) {
        kinds[s] = true;
        part = part.substr(1);
      }
      if (!parse_double(part, values[s])) {
        throw Error(ErrorKind::Config, "interval '" + item + "' has a non-numeric endpoint");
      }
    }
    if (kinds[0] != kinds[1]) {
      throw Error(ErrorKind::Config, "interval '" + item + "' mixes quantile and value endpoints");
    }
    spec.quantile = kinds[0];
    spec.lo = values[0];
    spec.hi = values[1];
    if (!(spec.lo < spec.hi)) throw Error(ErrorKind::Config, "interval '" + item + "' needs lo < hi");
    if (spec.quantile && !(spec.lo >= 0.0 && spec.hi <= 1.0)) {
      throw Error(ErrorKind::Config, "interval '" + item + "' has quantiles outside [0, 1]");
    }
    out.push_back(spec);
  }
  if (out.empty()) throw Error(ErrorKind::Config, "no intervals given");
  return out;
}

LoadedDataset load_dataset(const std::string& path, const std::string& outcome, const std::string& treatment,
                           const std::vector<std::string>& covariates) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open data file '" + path + "'");
  std::string header_line;
  if (!std::getline(in, header_line)) throw Error(ErrorKind::Data, "data file '" + path + "' is empty");
  char sep = ',';
  if (header_line.find(',') == std::string::npos) {
    if (header_line.find('\t') != std::string::npos) {
      sep = '\t';
    } else if (header_line.find(';') != std::string::npos) {
      sep = ';';
    }
  }
  auto unquote = [](std::string s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
  };
  std::vector<std::string> header;
  for (const auto& h : split(header_line, sep)) header.push_back(unquote(h));

  auto column_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorKind::Data, "column '" + name + "' not found in the header of '" + path + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t y_col = column_of(outcome);
  const std::size_t d_col = column_of(treatment);
  if (y_col == d_col) throw Error(ErrorKind::Data, "outcome and treatment name the same column");
  std::vector<std::size_t> x_cols;
  std::vector<std::string> x_names;
  if (covariates.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == y_col || c == d_col) continue;
      x_cols.push_back(c);
      x_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : covariates) {
      x_cols.push_back(column_of(name));
      x_names.push_back(name);
    }
  }

  std::vector<double> y, d, x;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split(line, sep);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << "row " << row << ": expected " << header.size() << " fields, got " << fields.size();
      throw Error(ErrorKind::Data, msg.str());
    }
    auto cell = [&](std::size_t c) {
      double v = 0.0;
      if (!parse_double(unquote(fields[c]), v)) {
        std::ostringstream msg;
        msg << "row " << row << ", column " << header[c] << ": non-numeric value '" << trim(fields[c]) << "'";
        throw Error(ErrorKind::Data, msg.str());
      }
      return v;
    };
    y.push_back(cell(y_col));
    d.push_back(cell(d_col));
    for (std::size_t c : x_cols) x.push_back(cell(c));
  }
  if (y.empty()) throw Error(ErrorKind::Data, "data file '" + path + "' has no rows");

  LoadedDataset out;
  const auto n = static_cast<Index>(y.size());
  const auto k = static_cast<Index>(x_cols.size());
  out.data.y = Eigen::Map<Vector>(y.data(), n);
  out.data.d = Eigen::Map<Vector>(d.data(), n);
  out.data.x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x.data(), n, k);
  out.data.covariate_names = x_names;
  if (n < 50) {
    out.warnings.push_back("only " + std::to_string(n) + " rows: estimates will be unreliable (n < 50)");
  }
  std::ostringstream summary;
  summary << "loaded " << n << " rows from '" << path << "': outcome '" << outcome << "', treatment '"
          << treatment << "', " << k << " covariates";
  out.summary = summary.str();
  return out;
}

EstimateReport run_estimate(const Dataset& data, const RunConfig& cfg) {
  cfg.validate();
  data.validate();
  EstimateReport report;
  report.seed = cfg.resolved_seed();
  report.n = data.n();
  report.num_covariates = data.num_covariates();
  report.ell = cfg.ell;
  report.bootstrap = cfg.bootstrap;
  report.alpha = cfg.alpha;
  report.adml = cfg.want_adml();
  report.naive = cfg.want_naive();

  std::vector<double> sorted(data.y.data(), data.y.data() + data.n());
  std::sort(sorted.begin(), sorted.end());
  const auto specs = parse_intervals(cfg.intervals, cfg.interval_units == "quantile");

  std::vector<IntervalU> valid;
  std::vector<int> valid_index(specs.size(), -1);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    EstimateRow row;
    row.label = specs[i].text;
    double lo = specs[i].lo;
    double hi = specs[i].hi;
    if (specs[i].quantile) {
      lo = stats::sample_quantile(sorted, lo);
      hi = stats::sample_quantile(sorted, hi);
    }
    row.u.y1 = lo;
    row.u.y2 = hi;
    if (!(lo < hi)) {
      row.flag = "interval collapses to a point on this sample";
    } else {
      valid_index[i] = static_cast<int>(valid.size());
      valid.push_back(IntervalU::make(lo, hi));
    }
    report.rows.push_back(row);
  }
  if (valid.empty()) throw Error(ErrorKind::Data, "no usable interval");

  const PipelineResult result = run_pipeline(data, valid, cfg.pipeline_options());
  report.basis_dimension = result.dist.basis.dimension();
  report.lambda = result.dist.lambda;
  report.lambda_tilde = result.riesz.lambda_tilde;
  report.riesz_support = result.riesz.support_size();
  report.bandwidth = result.scheme.bandwidth;
  for (const auto& pt : result.dist.points) {
    if (!pt.usable) {
      report.warnings.push_back("grid point y = " + num(pt.y) + " unusable: " + pt.flag);
    } else if (pt.refit_fallback) {
      report.warnings.push_back("grid point y = " + num(pt.y) + ": post-Lasso fell back to Lasso");
    }
  }

  std::vector<std::size_t> usable_rows;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    EstimateRow& row = report.rows[i];
    if (valid_index[i] < 0) continue;
    const IntervalResult& r = result.intervals[static_cast<std::size_t>(valid_index[i])];
    if (!r.usable) {
      row.flag = r.flag;
      continue;
    }
    row.usable = true;
    row.p_hat = r.adml.p_hat;
    row.theta_adml = r.adml.theta;
    row.se_adml = r.adml.se;
    row.theta_naive = r.naive.theta;
    row.se_naive = r.naive.se;
    double support = 0.0;
    int count = 0;
    for (const auto& pt : result.dist.points) {
      if (pt.usable && pt.y >= row.u.y1 && pt.y <= row.u.y2) {
        support += static_cast<double>(pt.support.size());
        ++count;
      }
    }
    row.grid_support = count > 0 ? support / count : 0.0;
    usable_rows.push_back(i);
  }

  if (!usable_rows.empty()) {
    const auto num_u = static_cast<Index>(usable_rows.size());
    Matrix psi_adml(data.n(), num_u), psi_naive(data.n(), num_u);
    Vector theta_adml(num_u), theta_naive(num_u);
    for (Index j = 0; j < num_u; ++j) {
      const std::size_t i = usable_rows[static_cast<std::size_t>(j)];
      const IntervalResult& r = result.intervals[static_cast<std::size_t>(valid_index[i])];
      psi_adml.col(j) = r.adml.psi_values;
      psi_naive.col(j) = r.naive.psi_values;
      theta_adml[j] = r.adml.theta;
      theta_naive[j] = r.naive.theta;
    }
    const std::uint64_t boot_seed = substream_seed(report.seed, 10, 0);
    auto fill = [&](const Matrix& psi, const Vector& theta, bool adml) {
      const BootstrapResult boot =
          bootstrap_inference(psi, theta, cfg.bootstrap, cfg.alpha, boot_seed, cfg.multiplier_law(), cfg.threads);
      for (const auto& w : boot.warnings) report.warnings.push_back((adml ? "adml: " : "naive: ") + w);
      for (Index j = 0; j < num_u; ++j) {
        EstimateRow& row = report.rows[usable_rows[static_cast<std::size_t>(j)]];
        const auto& pw = boot.bands.pointwise[static_cast<std::size_t>(j)];
        const auto& un = boot.bands.uniform[static_cast<std::size_t>(j)];
        if (adml) {
          row.ci_adml_lo = pw.lo, row.ci_adml_hi = pw.hi, row.band_adml_lo = un.lo, row.band_adml_hi = un.hi;
        } else {
          row.ci_naive_lo = pw.lo, row.ci_naive_hi = pw.hi, row.band_naive_lo = un.lo, row.band_naive_hi = un.hi;
        }
      }
      (adml ? report.critical_adml : report.critical_naive) = boot.bands.critical_value;
      if (num_u >= 2) (adml ? report.homogeneity_adml : report.homogeneity_naive) = boot.homogeneity;
    };
    if (report.adml) fill(psi_adml, theta_adml, true);
    if (report.naive) fill(psi_naive, theta_naive, false);
  }
  if (cfg.bootstrap < 100) report.warnings.push_back("fewer than 100 bootstrap draws");
  for (const auto& row : report.rows) {
    if (!row.usable) report.warnings.push_back("interval " + row.label + " skipped: " + row.flag);
  }
  return report;
}

SimulateReport run_simulate(const RunConfig& cfg) {
  cfg.validate();
  SimulateReport report;
  report.seed = cfg.resolved_seed();
  std::vector<std::pair<double, double>> cells;
  if (cfg.all_cells) {
    for (double rd : {0.1, 0.2, 0.3, 0.4}) {
      for (double ry : {0.1, 0.2, 0.3, 0.4}) cells.emplace_back(rd, ry);
    }
  } else {
    cells.emplace_back(cfg.rd2, cfg.ry2);
  }
  for (const auto& [rd, ry] : cells) {
    MainDgpConfig dgp;
    dgp.n = cfg.n;
    dgp.num_covariates = cfg.num_covariates;
    dgp.rd2 = rd;
    dgp.ry2 = ry;
    dgp.seed = report.seed;
    McOptions opts;
    opts.pipeline = cfg.pipeline_options();
    opts.reps = cfg.reps;
    opts.seed = report.seed;
    opts.oracle_n = cfg.oracle_n;
    opts.alpha = cfg.alpha;
    opts.bootstrap_draws = cfg.homogeneity_draws;
    opts.workers = cfg.threads;
    report.cells.push_back(run_main_mc(dgp, decile_bands(), opts));
  }
  return report;
}

DerivativeComparison run_compare_derivative(const RunConfig& cfg) {
  cfg.validate();
  PartialLinearConfig b;
  b.dgp = cfg.dgp;
  b.design = parse_design(cfg.design);
  b.n = cfg.n;
  b.p = cfg.dim;
  b.seed = cfg.resolved_seed();
  DerivativeOptions opts;
  opts.reps = cfg.reps;
  opts.seed = b.seed;
  opts.dist.max_loading_iters = cfg.loading_iters;
  opts.workers = cfg.threads;
  return run_derivative_comparison(b, parse_list("tau", cfg.tau), opts);
}

namespace {

/// Aligned text table; every cell is right-aligned to the widest entry of its column.
std::string render_table(const std::vector<std::string>& head, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) width[c] = head[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << cells[c];
    }
    out << '\n';
  };
  line(head);
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

ordered_json estimate_json_side(const EstimateRow& row, bool adml) {
  ordered_json j;
  j["theta"] = adml ? row.theta_adml : row.theta_naive;
  j["se"] = adml ? row.se_adml : row.se_naive;
  j["ci"] = {adml ? row.ci_adml_lo : row.ci_naive_lo, adml ? row.ci_adml_hi : row.ci_naive_hi};
  j["band"] = {adml ? row.band_adml_lo : row.band_naive_lo, adml ? row.band_adml_hi : row.band_naive_hi};
  return j;
}

}  // namespace

std::string format_estimate_table(const EstimateReport& report) {
  std::vector<std::string> head = {"interval", "y1", "y2", "p_hat", "support"};
  auto add_head = [&](const std::string& e) {
    for (const char* c : {"theta", "se", "ci_lo", "ci_hi", "band_lo", "band_hi"}) head.push_back(std::string(c) + "_" + e);
  };
  if (report.adml) add_head("adml");
  if (report.naive) add_head("naive");
  head.emplace_back("flag");
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.rows) {
    std::vector<std::string> cells = {r.label, num(r.u.y1), num(r.u.y2)};
    if (r.usable) {
      cells.push_back(num(r.p_hat));
      cells.push_back(num(r.grid_support));
      if (report.adml) {
        for (double v : {r.theta_adml, r.se_adml, r.ci_adml_lo, r.ci_adml_hi, r.band_adml_lo, r.band_adml_hi}) cells.push_back(num(v));
      }
      if (report.naive) {
        for (double v : {r.theta_naive, r.se_naive, r.ci_naive_lo, r.ci_naive_hi, r.band_naive_lo, r.band_naive_hi}) cells.push_back(num(v));
      }
      cells.emplace_back("-");
    } else {
      while (cells.size() + 1 < head.size()) cells.emplace_back("-");
      cells.push_back(r.flag);
    }
    rows.push_back(cells);
  }
  std::ostringstream out;
  out << "seed " << report.seed << "  n " << report.n << "  K " << report.num_covariates << "  p "
      << report.basis_dimension << "  lambda " << num(report.lambda) << "  lambda_tilde " << num(report.lambda_tilde)
      << "  riesz_support " << report.riesz_support << "  h " << num(report.bandwidth) << "  B " << report.bootstrap
      << "  alpha " << num(report.alpha) << "\n";
  if (report.adml) out << "sup-t critical value (adml) " << num(report.critical_adml) << "\n";
  if (report.naive) out << "sup-t critical value (naive) " << num(report.critical_naive) << "\n";
  if (report.homogeneity_adml) {
    out << "homogeneity (adml): statistic " << num(report.homogeneity_adml->statistic) << "  p-value "
        << num(report.homogeneity_adml->p_value) << "\n";
  }
  if (report.homogeneity_naive) {
    out << "homogeneity (naive): statistic " << num(report.homogeneity_naive->statistic) << "  p-value "
        << num(report.homogeneity_naive->p_value) << "\n";
  }
  out << render_table(head, rows);
  return out.str();
}

std::string format_estimate_json(const EstimateReport& report) {
  ordered_json j;
  j["command"] = "estimate";
  j["seed"] = report.seed;
  j["n"] = report.n;
  j["num_covariates"] = report.num_covariates;
  j["basis_dimension"] = report.basis_dimension;
  j["lambda"] = report.lambda;
  j["lambda_tilde"] = report.lambda_tilde;
  j["riesz_support"] = report.riesz_support;
  j["bandwidth"] = report.bandwidth;
  j["ell"] = report.ell;
  j["bootstrap"] = report.bootstrap;
  j["alpha"] = report.alpha;
  ordered_json crit = ordered_json::object();
  if (report.adml) crit["adml"] = report.critical_adml;
  if (report.naive) crit["naive"] = report.critical_naive;
  j["critical_value"] = crit;
  ordered_json homog = ordered_json::object();
  if (report.homogeneity_adml) {
    homog["adml"] = {{"statistic", report.homogeneity_adml->statistic}, {"p_value", report.homogeneity_adml->p_value}};
  }
  if (report.homogeneity_naive) {
    homog["naive"] = {{"statistic", report.homogeneity_naive->statistic},
                      {"p_value", report.homogeneity_naive->p_value}};
  }
  j["homogeneity"] = homog;
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json row;
    row["interval"] = r.label;
    row["y1"] = r.u.y1;
    row["y2"] = r.u.y2;
    row["usable"] = r.usable;
    if (r.usable) {
      row["p_hat"] = r.p_hat;
      row["support"] = r.grid_support;
      if (report.adml) row["adml"] = estimate_json_side(r, true);
      if (report.naive) row["naive"] = estimate_json_side(r, false);
    } else {
      row["flag"] = r.flag;
    }
    rows.push_back(row);
  }
  j["intervals"] = rows;
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

std::string format_estimate_csv(const EstimateReport& report) {
  std::ostringstream out;
  out << "interval,y1,y2,usable,p_hat,support";
  for (const char* e : {"adml", "naive"}) {
    if ((std::string(e) == "adml" && !report.adml) || (std::string(e) == "naive" && !report.naive)) continue;
    for (const char* c : {"theta", "se", "ci_lo", "ci_hi", "band_lo", "band_hi"}) out << "," << c << "_" << e;
  }
  out << ",flag\n";
  for (const auto& r : report.rows) {
    out << csv_escape(r.label) << "," << num(r.u.y1) << "," << num(r.u.y2) << "," << (r.usable ? 1 : 0);
    auto put = [&](double v) { out << "," << (r.usable ? num(v) : ""); };
    put(r.p_hat);
    put(r.grid_support);
    if (report.adml) {
      for (double v : {r.theta_adml, r.se_adml, r.ci_adml_lo, r.ci_adml_hi, r.band_adml_lo, r.band_adml_hi}) put(v);
    }
    if (report.naive) {
      for (double v : {r.theta_naive, r.se_naive, r.ci_naive_lo, r.ci_naive_hi, r.band_naive_lo, r.band_naive_hi}) put(v);
    }
    out << "," << csv_escape(r.flag) << "\n";
  }
  return out.str();
}

std::string format_simulate_table(const SimulateReport& report) {
  std::ostringstream out;
  out << "seed " << report.seed << "\n";
  for (const auto& cell : report.cells) {
    out << "\nrd2 " << num(cell.config.rd2) << "  ry2 " << num(cell.config.ry2) << "  n " << cell.config.n << "  K "
        << cell.config.num_covariates << "  reps " << cell.reps_used << "/" << cell.reps_requested << "  failures "
        << cell.failures << "  runtime " << std::fixed << std::setprecision(1) << cell.runtime_seconds << "s\n";
    out.unsetf(std::ios::floatfield);
    if (cell.homogeneity_rejection_rate >= 0.0) {
      out << "homogeneity rejection rate " << num(cell.homogeneity_rejection_rate) << "\n";
    }
    std::vector<std::vector<std::string>> rows;
    for (std::size_t b = 0; b < cell.bands.size(); ++b) {
      const std::string label = cell.bands[b].label();
      const McCell& nv = cell.cell(label, "naive");
      const McCell& ad = cell.cell(label, "adml");
      auto f = [](double v) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(3) << v;
        return s.str();
      };
      rows.push_back({label, f(nv.theta_true), f(nv.bias_ratio), f(ad.bias_ratio), f(nv.std), f(ad.std), f(nv.mse),
                      f(ad.mse), f(nv.coverage), f(ad.coverage)});
    }
    out << render_table({"band", "theta", "bias_naive", "bias_adml", "std_naive", "std_adml", "mse_naive",
                         "mse_adml", "cvg_naive", "cvg_adml"},
                        rows);
    for (const auto& flag : cell.flags) out << "note: " << flag << "\n";
  }
  return out.str();
}

std::string format_simulate_json(const SimulateReport& report) {
  ordered_json j;
  j["command"] = "simulate";
  j["seed"] = report.seed;
  ordered_json cells = ordered_json::array();
  for (const auto& cell : report.cells) {
    ordered_json c;
    c["rd2"] = cell.config.rd2;
    c["ry2"] = cell.config.ry2;
    c["n"] = cell.config.n;
    c["num_covariates"] = cell.config.num_covariates;
    c["reps_requested"] = cell.reps_requested;
    c["reps_used"] = cell.reps_used;
    c["failures"] = cell.failures;
    if (cell.homogeneity_rejection_rate >= 0.0) c["homogeneity_rejection_rate"] = cell.homogeneity_rejection_rate;
    c["max_abs_mean_psi"] = cell.max_abs_mean_psi;
    ordered_json rows = ordered_json::array();
    for (const auto& m : cell.cells) {
      rows.push_back({{"band", m.band},
                      {"estimator", m.estimator},
                      {"theta_true", m.theta_true},
                      {"mean_theta", m.mean_theta},
                      {"bias_ratio", m.bias_ratio},
                      {"std", m.std},
                      {"mse", m.mse},
                      {"coverage", m.coverage},
                      {"reps", m.reps}});
    }
    c["rows"] = rows;
    c["flags"] = cell.flags;
    cells.push_back(c);
  }
  j["cells"] = cells;
  return j.dump(2) + "\n";
}

std::string format_simulate_csv(const SimulateReport& report) {
  std::ostringstream out;
  out << "rd2,ry2,band,estimator,theta_true,mean_theta,bias_ratio,std,mse,coverage,reps\n";
  for (const auto& cell : report.cells) {
    for (const auto& m : cell.cells) {
      out << num(cell.config.rd2) << "," << num(cell.config.ry2) << "," << m.band << "," << m.estimator << ","
          << num(m.theta_true) << "," << num(m.mean_theta) << "," << num(m.bias_ratio) << "," << num(m.std) << ","
          << num(m.mse) << "," << num(m.coverage) << "," << m.reps << "\n";
    }
  }
  return out.str();
}

std::string format_derivative_table(const DerivativeComparison& report) {
  std::ostringstream out;
  out << "dgp " << report.config.dgp << "  design " << design_name(report.config.design) << "  n " << report.config.n
      << "  p " << report.config.p << "  seed " << report.config.seed << "  reps " << report.reps_used << "/"
      << report.reps_requested << "  failures " << report.failures << "  runtime " << std::fixed
      << std::setprecision(1) << report.runtime_seconds << "s\n";
  std::vector<std::vector<std::string>> rows;
  for (std::size_t t = 0; t < report.tau.size(); ++t) {
    auto f = [](double v) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(4) << v;
      return s.str();
    };
    rows.push_back({num(report.tau[t]), f(report.mean_dist_partial[t]), f(report.mean_dist_direct[t])});
  }
  out << render_table({"tau", "partial_difference", "direct"}, rows);
  return out.str();
}

std::string format_derivative_json(const DerivativeComparison& report) {
  ordered_json j;
  j["command"] = "compare-derivative";
  j["seed"] = report.config.seed;
  j["dgp"] = report.config.dgp;
  j["design"] = design_name(report.config.design);
  j["n"] = report.config.n;
  j["p"] = report.config.p;
  j["reps_requested"] = report.reps_requested;
  j["reps_used"] = report.reps_used;
  j["failures"] = report.failures;
  ordered_json rows = ordered_json::array();
  for (std::size_t t = 0; t < report.tau.size(); ++t) {
    rows.push_back({{"tau", report.tau[t]},
                    {"mean_dist_partial", report.mean_dist_partial[t]},
                    {"mean_dist_direct", report.mean_dist_direct[t]}});
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::string format_derivative_csv(const DerivativeComparison& report) {
  std::ostringstream out;
  out << "tau,mean_dist_partial,mean_dist_direct\n";
  for (std::size_t t = 0; t < report.tau.size(); ++t) {
    out << num(report.tau[t]) << "," << num(report.mean_dist_partial[t]) << "," << num(report.mean_dist_direct[t])
        << "\n";
  }
  return out.str();
}

std::vector<std::string> write_outputs(const std::string& prefix, const std::string& format, const std::string& table,
                                       const std::string& json, const std::string& csv) {
  if (prefix.empty()) throw Error(ErrorKind::Config, "output prefix is empty");
  const std::filesystem::path base(prefix);
  if (base.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(base.parent_path(), ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create directory '" + base.parent_path().string() + "'");
  }
  auto write = [](const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
  };
  std::vector<std::string> written;
  write(prefix + ".txt", table);
  written.push_back(prefix + ".txt");
  if (format == "csv") {
    write(prefix + ".csv", csv);
    written.push_back(prefix + ".csv");
  } else {
    write(prefix + ".json", json);
    written.push_back(prefix + ".json");
  }
  return written;
}

}  // namespace oasd
