#include "levybench/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "levybench/container.hpp"
#include "levybench/errors.hpp"
#include "levybench/parallel.hpp"

namespace levybench {

namespace {

constexpr const char* kReportFormat = "levybench-report";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Shortest text that reads back to the same double.
std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct Entry {
  std::string value;
  std::size_t line;
  bool used = false;
};

class KeyValues {
 public:
  void add(const std::string& section, const std::string& key, std::string value, std::size_t line) {
    const auto id = section + "." + key;
    if (entries_.count(id)) {
      throw ConfigError("duplicate key '" + id + "' at line " + std::to_string(line) + " (first at line " +
                        std::to_string(entries_[id].line) + ")");
    }
    entries_[id] = Entry{std::move(value), line};
  }

  Entry* find(const std::string& id) {
    auto it = entries_.find(id);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }
  bool has(const std::string& id) const { return entries_.count(id) > 0; }

  void reject_unused() const {
    for (const auto& [id, e] : entries_) {
      if (!e.used) throw ConfigError("unknown key '" + id + "' at line " + std::to_string(e.line));
    }
  }

 private:
  std::map<std::string, Entry> entries_;
};

const std::set<std::string> kSections = {"experiment", "signal", "measurement", "dataset", "estimators", "chain"};

ConfigError field_error(const std::string& id, const Entry& e, const std::string& why) {
  return ConfigError("invalid value '" + e.value + "' for '" + id + "' at line " + std::to_string(e.line) + ": " + why);
}

double parse_double(const std::string& id, const Entry& e, const std::string& text) {
  double x = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto r = std::from_chars(first, last, x);
  if (r.ec != std::errc() || r.ptr != last || !std::isfinite(x)) throw field_error(id, e, "expected a finite number");
  return x;
}

std::uint64_t parse_unsigned(const std::string& id, const Entry& e) {
  std::uint64_t x = 0;
  const char* first = e.value.data();
  const char* last = first + e.value.size();
  const auto r = std::from_chars(first, last, x);
  if (r.ec != std::errc() || r.ptr != last) throw field_error(id, e, "expected a non-negative integer");
  return x;
}

template <class Check>
double get_double(KeyValues& kv, const std::string& id, double fallback, Check check, const char* requirement) {
  Entry* e = kv.find(id);
  if (!e) return fallback;
  const double x = parse_double(id, *e, e->value);
  if (!check(x)) throw field_error(id, *e, std::string("must be ") + requirement);
  return x;
}

std::uint64_t get_count(KeyValues& kv, const std::string& id, std::uint64_t fallback, std::uint64_t min_value) {
  Entry* e = kv.find(id);
  if (!e) return fallback;
  const auto x = parse_unsigned(id, *e);
  if (x < min_value) throw field_error(id, *e, "must be at least " + std::to_string(min_value));
  return x;
}

bool positive(double x) { return x > 0.0; }

// Range check for one grid value of the given model.
bool grid_value_ok(SignalModel m, double x) {
  if (m == SignalModel::BernoulliLaplace) return x > 0.0 && x < 1.0;
  return x > 0.0;
}

const char* grid_requirement(SignalModel m) {
  return m == SignalModel::BernoulliLaplace ? "in (0, 1)" : "positive";
}

std::vector<double> default_grid(SignalModel m) {
  switch (m) {
    case SignalModel::BernoulliLaplace:
      return {0.6, 0.7, 0.8, 0.9};
    case SignalModel::Student:
      return {1.0, 3.0, 5.0, 39.0};
    default:
      return {1.0};
  }
}

SignalModel model_from_name(const std::string& name, const std::string& id, const Entry& e) {
  if (name == "gaussian") return SignalModel::Gaussian;
  if (name == "laplace") return SignalModel::Laplace;
  if (name == "bernoulli_laplace") return SignalModel::BernoulliLaplace;
  if (name == "student") return SignalModel::Student;
  throw field_error(id, e, "expected gaussian, laplace, bernoulli_laplace or student");
}

template <class F>
auto in_stage(const std::string& stage, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const NumericalError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what(), false);
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

double standard_error(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
}

// Gap statistics of `errors` against the MMSE errors on the same signals.
void fill_gap(EstimatorSummary& s, const std::vector<double>& mmse_errors) {
  s.mse = mean(s.errors);
  s.se = standard_error(s.errors);
  const double mmse = mean(mmse_errors);
  s.gap_db = 10.0 * std::log10(s.mse / mmse);
  std::vector<double> diff(s.errors.size());
  std::vector<double> log_terms(s.errors.size());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = s.errors[i] - mmse_errors[i];
    log_terms[i] = s.errors[i] / s.mse - mmse_errors[i] / mmse;
  }
  s.paired_se = standard_error(diff);
  s.gap_se_db = 10.0 / std::log(10.0) * standard_error(log_terms);
}

// Per-signal errors of the needed estimators on a split, at the requested tau indices.
struct Sweep {
  // errors[estimator][tau index][example]; rows left empty when not requested.
  std::map<Estimator, std::vector<std::vector<double>>> errors;
  std::map<Estimator, std::vector<std::vector<std::uint8_t>>> converged;

  std::vector<double> curve(Estimator e) const {
    const auto& rows = errors.at(e);
    std::vector<double> out(rows.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (!rows[t].empty()) out[t] = mean(rows[t]);
    }
    return out;
  }
};

Sweep sweep(VariationalSolver& solver, const std::vector<Example>& split, const TauGrid& grid,
            const std::set<Estimator>& estimators, const std::set<std::size_t>& indices, const AdmmConfig& admm) {
  Sweep out;
  const std::size_t n = split.size();
  for (Estimator e : estimators) {
    out.errors[e].assign(grid.size(), {});
    out.converged[e].assign(grid.size(), {});
    for (std::size_t t : indices) {
      out.errors[e][t].assign(n, 0.0);
      out.converged[e][t].assign(n, 1);
    }
  }
  const bool l2 = estimators.count(Estimator::L2) > 0;
  const bool l1 = estimators.count(Estimator::L1) > 0;
  const bool log = estimators.count(Estimator::Log) > 0;
  parallel_for(n, [&](std::size_t i) {
    const auto& ex = split[i];
    for (std::size_t t : indices) {
      const double tau = grid.values()[t];
      if (l2) out.errors[Estimator::L2][t][i] = squared_error(ex.signal, solver.estimate_l2(ex.measurements, tau));
      if (!l1 && !log) continue;
      AdmmConfig cfg = admm;
      cfg.warm_start.reset();
      const EstimateResult r1 = solver.estimate_l1(ex.measurements, tau, cfg);
      if (l1) {
        out.errors[Estimator::L1][t][i] = squared_error(ex.signal, r1.estimate);
        out.converged[Estimator::L1][t][i] = r1.converged;
      }
      if (log) {
        // Same warm start estimate_log uses by default.
        cfg.warm_start = r1.estimate;
        const EstimateResult rl = solver.estimate_log(ex.measurements, tau, cfg);
        out.errors[Estimator::Log][t][i] = squared_error(ex.signal, rl.estimate);
        out.converged[Estimator::Log][t][i] = rl.converged;
      }
    }
  });
  return out;
}

std::size_t argmin_first(const std::vector<double>& curve) {
  std::size_t best = 0;
  for (std::size_t t = 1; t < curve.size(); ++t) {
    if (curve[t] < curve[best]) best = t;
  }
  return best;
}

std::string column_name(const std::string& estimator) {
  std::string out = estimator;
  if (!out.empty() && out.back() == '*') out = out.substr(0, out.size() - 1) + "_star";
  return out;
}

}  // namespace

std::string model_name(SignalModel m) {
  switch (m) {
    case SignalModel::Gaussian:
      return "gaussian";
    case SignalModel::Laplace:
      return "laplace";
    case SignalModel::BernoulliLaplace:
      return "bernoulli_laplace";
    case SignalModel::Student:
      return "student";
  }
  return "?";
}

std::string grid_parameter_name(SignalModel m) {
  switch (m) {
    case SignalModel::Gaussian:
      return "variance";
    case SignalModel::Laplace:
      return "b";
    case SignalModel::BernoulliLaplace:
      return "lambda";
    case SignalModel::Student:
      return "alpha";
  }
  return "?";
}

std::string RosterEntry::name() const { return estimator_name(estimator) + (oracle ? "*" : ""); }

RosterEntry roster_entry_from_name(const std::string& name) {
  RosterEntry r;
  std::string base = name;
  if (!base.empty() && base.back() == '*') {
    r.oracle = true;
    base.pop_back();
  }
  r.estimator = estimator_from_name(base);
  return r;
}

IdDistribution ExperimentConfig::distribution(double grid_value) const {
  switch (model) {
    case SignalModel::Gaussian:
      return make_gaussian(grid_value);
    case SignalModel::Laplace:
      return make_laplace(grid_value);
    case SignalModel::BernoulliLaplace:
      return make_bernoulli_laplace(grid_value, b);
    case SignalModel::Student:
      return make_student(grid_value);
  }
  throw ParameterError("unknown signal model");
}

ChainConfig ExperimentConfig::chain_config() const {
  ChainConfig c = default_chain_config(distribution(grid.front()));
  if (chain_samples) c.samples = *chain_samples;
  if (chain_burn_in) c.burn_in = *chain_burn_in;
  c.thinning = chain_thinning;
  c.seed = seed;
  return c;
}

TauGrid ExperimentConfig::tau_grid() const { return TauGrid::log_spaced(tau_min, tau_max, tau_points); }

ProblemInstance ExperimentConfig::instance() const {
  if (op == OperatorChoice::Deconvolution) return build_deconvolution(length, psf_length, psf_variance);
  RngStream rng(seed, example_stream_id(StreamPurpose::Operator, Split::Repository, 0));
  return build_fourier_sampling(length, fourier_rows, rng);
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  for (Estimator e : {Estimator::L2, Estimator::L1, Estimator::Log}) cfg.roster.push_back({e, false});
  for (Estimator e : {Estimator::L2, Estimator::L1, Estimator::Log}) cfg.roster.push_back({e, true});
  return cfg;
}

ExperimentConfig parse_config(const std::string& text, std::optional<std::string> preset_override) {
  KeyValues kv;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = trim(line.substr(1, line.size() - 2));
      if (!kSections.count(section)) {
        throw ConfigError("unknown section '" + section + "' at line " + std::to_string(line_no));
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    if (section.empty()) throw ParseError("key outside of any section", line_no);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    kv.add(section, key, trim(line.substr(eq + 1)), line_no);
  }

  ExperimentConfig cfg = default_config();

  // [experiment]
  if (Entry* e = kv.find("experiment.seed")) {
    cfg.seed = parse_unsigned("experiment.seed", *e);
    cfg.seed_defaulted = false;
  }
  if (Entry* e = kv.find("experiment.preset")) cfg.preset = e->value;
  if (preset_override) cfg.preset = *preset_override;
  if (cfg.preset != "full" && cfg.preset != "desk") {
    throw ConfigError("invalid value '" + cfg.preset + "' for 'experiment.preset': expected full or desk");
  }
  cfg.threads = static_cast<unsigned>(get_count(kv, "experiment.threads", 0, 0));

  // [signal]
  if (Entry* e = kv.find("signal.model")) cfg.model = model_from_name(e->value, "signal.model", *e);
  cfg.grid = default_grid(cfg.model);
  const std::string grid_key = "signal." + grid_parameter_name(cfg.model);
  for (const char* p : {"lambda", "alpha", "variance"}) {
    const std::string id = std::string("signal.") + p;
    if (id != grid_key && kv.has(id)) {
      Entry* e = kv.find(id);
      throw ConfigError("key '" + id + "' at line " + std::to_string(e->line) + " does not apply to model " +
                        model_name(cfg.model));
    }
  }
  if (Entry* e = kv.find(grid_key)) {
    cfg.grid.clear();
    for (const auto& item : split_list(e->value)) {
      const double x = parse_double(grid_key, *e, item);
      if (!grid_value_ok(cfg.model, x)) throw field_error(grid_key, *e, std::string("must be ") + grid_requirement(cfg.model));
      cfg.grid.push_back(x);
    }
    if (cfg.grid.empty()) throw field_error(grid_key, *e, "needs at least one value");
  }
  if (cfg.model == SignalModel::BernoulliLaplace) {
    cfg.b = get_double(kv, "signal.b", 1.0, positive, "positive");
  } else if (cfg.model != SignalModel::Laplace && kv.has("signal.b")) {
    Entry* e = kv.find("signal.b");
    throw ConfigError("key 'signal.b' at line " + std::to_string(e->line) + " does not apply to model " +
                      model_name(cfg.model));
  }

  // [measurement]
  if (Entry* e = kv.find("measurement.operator")) {
    if (e->value == "deconvolution") {
      cfg.op = OperatorChoice::Deconvolution;
    } else if (e->value == "fourier") {
      cfg.op = OperatorChoice::Fourier;
    } else {
      throw field_error("measurement.operator", *e, "expected deconvolution or fourier");
    }
  }
  cfg.length = get_count(kv, "measurement.length", cfg.length, 2);
  cfg.psf_length = get_count(kv, "measurement.psf_length", cfg.psf_length, 1);
  cfg.psf_variance = get_double(kv, "measurement.psf_variance", cfg.psf_variance, positive, "positive");
  cfg.fourier_rows = get_count(kv, "measurement.fourier_rows", cfg.fourier_rows, 1);
  cfg.snr_db = get_double(kv, "measurement.snr_db", cfg.snr_db, [](double) { return true; }, "finite");
  if (cfg.op == OperatorChoice::Deconvolution && (cfg.psf_length % 2 == 0 || cfg.psf_length > cfg.length)) {
    throw ConfigError("'measurement.psf_length' must be odd and at most measurement.length");
  }
  if (cfg.op == OperatorChoice::Fourier && cfg.fourier_rows > cfg.length / 2 + 1) {
    throw ConfigError("'measurement.fourier_rows' exceeds the number of distinct frequencies");
  }

  // [dataset]
  const bool desk = cfg.preset == "desk";
  cfg.sizes.repository = get_count(kv, "dataset.repository", 0, 0);
  cfg.sizes.validation = get_count(kv, "dataset.validation", 1000, 1);
  cfg.sizes.test = get_count(kv, "dataset.test", desk ? 100 : 1000, 1);

  // [estimators]
  if (Entry* e = kv.find("estimators.roster")) {
    cfg.roster.clear();
    std::set<std::string> seen;
    for (const auto& item : split_list(e->value)) {
      try {
        cfg.roster.push_back(roster_entry_from_name(item));
      } catch (const ParameterError&) {
        throw field_error("estimators.roster", *e, "unknown estimator '" + item + "'");
      }
      if (!seen.insert(item).second) throw field_error("estimators.roster", *e, "duplicate estimator '" + item + "'");
    }
  }
  cfg.tau_min = get_double(kv, "estimators.tau_min", cfg.tau_min, positive, "positive");
  cfg.tau_max = get_double(kv, "estimators.tau_max", cfg.tau_max, positive, "positive");
  cfg.tau_points = get_count(kv, "estimators.tau_points", cfg.tau_points, 1);
  if (cfg.tau_max < cfg.tau_min) throw ConfigError("'estimators.tau_max' is below 'estimators.tau_min'");
  if (Entry* e = kv.find("estimators.admm_rho")) {
    if (e->value != "tau") {
      const double rho = parse_double("estimators.admm_rho", *e, e->value);
      if (!(rho > 0.0)) throw field_error("estimators.admm_rho", *e, "must be positive or 'tau'");
      cfg.admm.rho = rho;
    }
  }
  cfg.admm.max_iters = static_cast<int>(get_count(kv, "estimators.admm_max_iters", 2000, 1));
  cfg.admm.abs_tol = get_double(kv, "estimators.admm_abs_tol", cfg.admm.abs_tol, positive, "positive");
  cfg.admm.rel_tol = get_double(kv, "estimators.admm_rel_tol", cfg.admm.rel_tol, positive, "positive");

  // [chain]
  if (kv.has("chain.samples")) cfg.chain_samples = get_count(kv, "chain.samples", 0, 1);
  else if (desk) cfg.chain_samples = 2000;
  if (kv.has("chain.burn_in")) cfg.chain_burn_in = get_count(kv, "chain.burn_in", 0, 0);
  cfg.chain_thinning = get_count(kv, "chain.thinning", 1, 1);
  if (Entry* e = kv.find("chain.student_rate")) {
    if (e->value == "mixture") {
      cfg.student_rate = StudentRate::MixtureConsistent;
    } else if (e->value == "as_printed") {
      cfg.student_rate = StudentRate::AsPrinted;
    } else {
      throw field_error("chain.student_rate", *e, "expected mixture or as_printed");
    }
  }

  kv.reject_unused();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::string> preset_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(preset_override));
}

namespace {

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + fmt(xs[i]);
  return out;
}

// The text that determines results; `threads` and comments are left out.
std::string canonical_text(const ExperimentConfig& cfg, bool for_display) {
  const ChainConfig chain = cfg.chain_config();
  std::ostringstream o;
  o << "[experiment]\n";
  o << "seed = " << cfg.seed;
  if (for_display && cfg.seed_defaulted) o << "  # default seed (no seed given)";
  o << "\npreset = " << cfg.preset << "\n";
  if (for_display) o << "threads = " << cfg.threads << "  # 0 = hardware concurrency\n";
  o << "\n[signal]\nmodel = " << model_name(cfg.model) << "\n";
  o << grid_parameter_name(cfg.model) << " = " << join(cfg.grid) << "\n";
  if (cfg.model == SignalModel::BernoulliLaplace) o << "b = " << fmt(cfg.b) << "\n";
  o << "\n[measurement]\noperator = " << (cfg.op == OperatorChoice::Deconvolution ? "deconvolution" : "fourier") << "\n";
  o << "length = " << cfg.length << "\n";
  if (cfg.op == OperatorChoice::Deconvolution) {
    o << "psf_length = " << cfg.psf_length << "\npsf_variance = " << fmt(cfg.psf_variance) << "\n";
  } else {
    o << "fourier_rows = " << cfg.fourier_rows << "\n";
  }
  o << "snr_db = " << fmt(cfg.snr_db) << "\n";
  o << "\n[dataset]\nrepository = " << cfg.sizes.repository << "\nvalidation = " << cfg.sizes.validation
    << "\ntest = " << cfg.sizes.test << "\n";
  o << "\n[estimators]\nroster = ";
  for (std::size_t i = 0; i < cfg.roster.size(); ++i) o << (i ? ", " : "") << cfg.roster[i].name();
  o << "\ntau_min = " << fmt(cfg.tau_min) << "\ntau_max = " << fmt(cfg.tau_max) << "\ntau_points = " << cfg.tau_points
    << "\n";
  o << "admm_rho = " << (cfg.admm.rho ? fmt(*cfg.admm.rho) : std::string("tau")) << "\n";
  o << "admm_max_iters = " << cfg.admm.max_iters << "\nadmm_abs_tol = " << fmt(cfg.admm.abs_tol)
    << "\nadmm_rel_tol = " << fmt(cfg.admm.rel_tol) << "\n";
  o << "\n[chain]\nsamples = " << chain.samples << "\nburn_in = " << chain.burn_in << "\nthinning = " << chain.thinning
    << "\n";
  if (cfg.model == SignalModel::Student) {
    o << "student_rate = " << (cfg.student_rate == StudentRate::MixtureConsistent ? "mixture" : "as_printed") << "\n";
  }
  return o.str();
}

}  // namespace

std::string normalized_config(const ExperimentConfig& cfg) { return canonical_text(cfg, true); }

std::string config_fingerprint(const ExperimentConfig& cfg) { return hex64(fnv1a64(canonical_text(cfg, false))); }

const EstimatorSummary& PointReport::estimator(const std::string& name) const {
  for (const auto& e : estimators) {
    if (e.name == name) return e;
  }
  throw ParameterError("estimator '" + name + "' not in report");
}

DatasetTriple generate_point_dataset(const ExperimentConfig& cfg, double grid_value) {
  return generate_dataset(cfg.seed, cfg.distribution(grid_value), cfg.instance(), cfg.sizes, cfg.snr_db);
}

std::vector<EstimatorSummary> evaluate_variational(const ExperimentConfig& cfg, const DatasetTriple& ds) {
  std::vector<EstimatorSummary> out;
  if (cfg.roster.empty()) return out;
  const TauGrid grid = cfg.tau_grid();
  VariationalSolver solver(ds.instance.H);

  std::set<Estimator> tuned;
  std::set<Estimator> oracle;
  for (const auto& r : cfg.roster) (r.oracle ? oracle : tuned).insert(r.estimator);
  if (!tuned.empty() && ds.validation.empty()) throw ParameterError("tuned estimators need a non-empty validation split");
  if (ds.test.empty()) throw ParameterError("test split is empty");

  std::set<std::size_t> all;
  for (std::size_t t = 0; t < grid.size(); ++t) all.insert(t);

  std::map<Estimator, std::size_t> tuned_index;
  std::map<Estimator, std::vector<double>> validation_curve;
  if (!tuned.empty()) {
    const Sweep val = sweep(solver, ds.validation, grid, tuned, all, cfg.admm);
    for (Estimator e : tuned) {
      validation_curve[e] = val.curve(e);
      tuned_index[e] = argmin_first(validation_curve[e]);
    }
  }

  // Test errors: the full grid for oracle entries, the selected taus otherwise.
  // Solves are deterministic, so a tuned entry reuses the oracle sweep.
  std::set<Estimator> needed = oracle;
  needed.insert(tuned.begin(), tuned.end());
  std::set<std::size_t> indices;
  if (!oracle.empty()) {
    indices = all;
  } else {
    for (const auto& [e, t] : tuned_index) indices.insert(t);
  }
  const Sweep test = sweep(solver, ds.test, grid, needed, indices, cfg.admm);

  for (const auto& r : cfg.roster) {
    EstimatorSummary s;
    s.name = r.name();
    if (r.oracle) {
      s.curve = test.curve(r.estimator);
      s.tau_index = argmin_first(s.curve);
    } else {
      s.curve = validation_curve.at(r.estimator);
      s.tau_index = tuned_index.at(r.estimator);
    }
    s.tau = grid.values()[s.tau_index];
    s.errors = test.errors.at(r.estimator)[s.tau_index];
    for (auto ok : test.converged.at(r.estimator)[s.tau_index]) s.unconverged += ok ? 0 : 1;
    s.mse = mean(s.errors);
    s.se = standard_error(s.errors);
    out.push_back(std::move(s));
  }
  return out;
}

MmseSummary evaluate_mmse(const ExperimentConfig& cfg, const DatasetTriple& ds) {
  MmseSummary out;
  const std::size_t n = ds.test.size();
  out.estimates.resize(n);
  out.errors.resize(n);
  if (const auto* g = std::get_if<GaussianIncrements>(&ds.distribution)) {
    // Gaussian increments: the posterior mean is the l2 estimate at sigma_n^2 / sigma^2.
    out.method = "closed_form";
    VariationalSolver solver(ds.instance.H);
    const double tau = ds.instance.noise_var / g->variance;
    parallel_for(n, [&](std::size_t i) {
      out.estimates[i] = solver.estimate_l2(ds.test[i].measurements, tau);
      out.errors[i] = squared_error(ds.test[i].signal, out.estimates[i]);
    });
    return out;
  }
  out.method = "gibbs";
  const ChainConfig chain = cfg.chain_config();
  std::vector<double> ess(n);
  std::vector<std::size_t> violations(n);
  parallel_for(n, [&](std::size_t i) {
    RngStream rng(ds.master_seed, example_stream_id(StreamPurpose::Chain, Split::Test, i));
    const MmseResult r = gibbs_mmse(rng, ds.instance, ds.test[i].measurements, ds.distribution, chain, cfg.student_rate);
    out.estimates[i] = r.estimate;
    out.errors[i] = squared_error(ds.test[i].signal, r.estimate);
    ess[i] = r.effective_sample_size.mean();
    violations[i] = r.positivity_violations;
  });
  out.mean_ess = mean(ess);
  for (auto v : violations) out.positivity_violations += v;
  return out;
}

BenchmarkReport run_experiment(const ExperimentConfig& cfg) {
  set_worker_count(cfg.threads);
  BenchmarkReport report;
  report.config = cfg;
  report.config_text = normalized_config(cfg);
  report.fingerprint = config_fingerprint(cfg);
  const std::string param = grid_parameter_name(cfg.model);

  for (double value : cfg.grid) {
    const std::string tag = "[" + param + "=" + fmt(value) + "]";
    PointReport point;
    point.parameter = value;

    auto t0 = std::chrono::steady_clock::now();
    const DatasetTriple ds = in_stage("generate" + tag, [&] { return generate_point_dataset(cfg, value); });
    point.seconds_dataset = seconds_since(t0);
    point.dataset_fingerprint = ds.fingerprint();
    point.noise_var = ds.instance.noise_var;
    point.realized_snr_db = realized_snr_db(ds, {Split::Validation, Split::Test});

    t0 = std::chrono::steady_clock::now();
    point.estimators = in_stage("estimate" + tag, [&] { return evaluate_variational(cfg, ds); });
    point.seconds_variational = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    MmseSummary mmse = in_stage("mmse" + tag, [&] { return evaluate_mmse(cfg, ds); });
    point.seconds_mmse = seconds_since(t0);
    point.mmse_method = mmse.method;
    point.mmse_errors = std::move(mmse.errors);
    point.mmse_mse = mean(point.mmse_errors);
    point.mmse_se = standard_error(point.mmse_errors);
    point.mean_chain_ess = mmse.mean_ess;
    point.positivity_violations = mmse.positivity_violations;

    in_stage("report" + tag, [&] {
      if (!(point.mmse_mse > 0.0)) throw NumericalError("MMSE reference error is zero; gaps are undefined");
      for (auto& s : point.estimators) {
        fill_gap(s, point.mmse_errors);
        if (!std::isfinite(s.gap_db)) throw NumericalError("non-finite optimality gap for " + s.name);
      }
      return 0;
    });
    report.points.push_back(std::move(point));
  }
  return report;
}

nlohmann::json report_to_json(const BenchmarkReport& report) {
  nlohmann::json j;
  j["format"] = kReportFormat;
  j["version"] = kContainerVersion;
  j["config"] = report.config_text;
  j["fingerprint"] = report.fingerprint;
  j["parameter"] = grid_parameter_name(report.config.model);
  j["points"] = nlohmann::json::array();
  for (const auto& p : report.points) {
    nlohmann::json pj;
    pj["parameter"] = p.parameter;
    pj["dataset_fingerprint"] = p.dataset_fingerprint;
    pj["noise_var"] = p.noise_var;
    pj["realized_snr_db"] = p.realized_snr_db;
    pj["mmse"] = {{"method", p.mmse_method},
                  {"mse", p.mmse_mse},
                  {"se", p.mmse_se},
                  {"gap_db", 0.0},
                  {"mean_chain_ess", p.mean_chain_ess},
                  {"positivity_violations", p.positivity_violations},
                  {"errors", p.mmse_errors}};
    nlohmann::json est = nlohmann::json::object();
    for (const auto& s : p.estimators) {
      est[s.name] = {{"tau", s.tau},         {"tau_index", s.tau_index}, {"mse", s.mse},
                     {"se", s.se},           {"gap_db", s.gap_db},       {"gap_se_db", s.gap_se_db},
                     {"paired_se", s.paired_se}, {"unconverged", s.unconverged}, {"curve", s.curve}, {"errors", s.errors}};
    }
    pj["estimators"] = est;
    pj["runtime_seconds"] = {
        {"dataset", p.seconds_dataset}, {"variational", p.seconds_variational}, {"mmse", p.seconds_mmse}};
    j["points"].push_back(pj);
  }
  return j;
}

void write_report(const BenchmarkReport& report, const std::filesystem::path& path) {
  write_file_atomically(path, report_to_json(report).dump(2) + "\n");
}

nlohmann::json read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("report is not valid JSON: ") + e.what(), e.byte);
  }
  if (j.value("format", std::string()) != kReportFormat) throw ParseError("not a benchmark report", 0);
  if (j.value("version", 0) != kContainerVersion) throw UnsupportedVersionError("unsupported report version");
  return j;
}

ExperimentConfig config_from_report(const nlohmann::json& report) {
  const ExperimentConfig cfg = parse_config(report.at("config").get<std::string>());
  if (config_fingerprint(cfg) != report.at("fingerprint").get<std::string>()) {
    throw ConfigError("embedded config does not match the report fingerprint");
  }
  return cfg;
}

PlotTable report_to_table(const BenchmarkReport& report) {
  if (report.config.roster.empty()) throw ParameterError("cannot tabulate a report with an empty estimator roster");
  PlotTable t;
  t.columns.push_back(grid_parameter_name(report.config.model));
  for (const auto& r : report.config.roster) t.columns.push_back(column_name(r.name()));
  t.columns.push_back("mmse");
  for (const auto& r : report.config.roster) t.columns.push_back("mse_" + column_name(r.name()));
  t.columns.push_back("mse_mmse");
  for (const auto& p : report.points) {
    std::vector<double> row{p.parameter};
    for (const auto& r : report.config.roster) row.push_back(p.estimator(r.name()).gap_db);
    row.push_back(0.0);
    for (const auto& r : report.config.roster) row.push_back(p.estimator(r.name()).mse);
    row.push_back(p.mmse_mse);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string format_plot_table(const PlotTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) out += (c ? " " : "") + table.columns[c];
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? " " : "") + fmt17(row[c]);
    out += '\n';
  }
  return out;
}

PlotTable parse_plot_table(const std::string& text) {
  PlotTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (t.columns.empty()) {
      t.columns = tokens;
      continue;
    }
    if (tokens.size() != t.columns.size()) throw ParseError("row has the wrong number of columns", line_no);
    std::vector<double> row;
    for (const auto& tok : tokens) {
      double x = 0.0;
      const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) throw ParseError("bad number '" + tok + "'", line_no);
      row.push_back(x);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw ParseError("missing header row", line_no);
  return t;
}

void report_to_plotdata(const BenchmarkReport& report, const std::filesystem::path& path) {
  write_file_atomically(path, format_plot_table(report_to_table(report)));
}

DatasetTriple training_repository(const ExperimentConfig& cfg, std::size_t count) {
  if (count == 0) throw ParameterError("training repository export needs at least one example");
  if (count > cfg.sizes.repository) {
    throw ParameterError("requested " + std::to_string(count) + " training examples but the repository holds " +
                         std::to_string(cfg.sizes.repository));
  }
  DatasetSizes sizes = cfg.sizes;
  sizes.repository = count;
  return generate_dataset(cfg.seed, cfg.distribution(cfg.grid.front()), cfg.instance(), sizes, cfg.snr_db);
}

void export_training_repository(const ExperimentConfig& cfg, std::size_t count, const std::filesystem::path& path) {
  export_dataset(training_repository(cfg, count), path);
}

}  // namespace levybench
