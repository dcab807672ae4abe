#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levybench/dataset.hpp"
#include "levybench/gibbs.hpp"
#include "levybench/variational.hpp"

namespace levybench {

inline constexpr std::uint64_t kDefaultSeed = 20190601;

enum class SignalModel { Gaussian, Laplace, BernoulliLaplace, Student };
enum class OperatorChoice { Deconvolution, Fourier };

std::string model_name(SignalModel m);
// Name of the parameter swept by the grid: variance, b, lambda or alpha.
std::string grid_parameter_name(SignalModel m);

// One variational estimator in the roster; `oracle` selects tau on the test split (the starred variants).
struct RosterEntry {
  Estimator estimator = Estimator::L2;
  bool oracle = false;
  std::string name() const;  // "l1", "l1*", ...
};

RosterEntry roster_entry_from_name(const std::string& name);

struct ExperimentConfig {
  std::uint64_t seed = kDefaultSeed;
  bool seed_defaulted = true;
  std::string preset = "full";
  unsigned threads = 0;

  SignalModel model = SignalModel::BernoulliLaplace;
  std::vector<double> grid = {0.6, 0.7, 0.8, 0.9};
  double b = 1.0;  // Laplace scale for the Bernoulli-Laplace slab

  OperatorChoice op = OperatorChoice::Deconvolution;
  std::size_t length = 100;
  std::size_t psf_length = 13;
  double psf_variance = 4.0;
  std::size_t fourier_rows = 16;  // distinct frequencies, DC included; M = 2 * rows - 1
  double snr_db = 30.0;

  DatasetSizes sizes;

  std::vector<RosterEntry> roster;  // all six variational estimators by default
  double tau_min = 1e-4;
  double tau_max = 1e2;
  std::size_t tau_points = 40;
  AdmmConfig admm;

  std::optional<std::size_t> chain_samples;  // model default when unset
  std::optional<std::size_t> chain_burn_in;
  std::size_t chain_thinning = 1;
  StudentRate student_rate = StudentRate::MixtureConsistent;

  IdDistribution distribution(double grid_value) const;
  ChainConfig chain_config() const;
  TauGrid tau_grid() const;
  // Operator for a grid point; Fourier frequencies are drawn from the seed.
  ProblemInstance instance() const;
};

ExperimentConfig default_config();

// Strict "key = value" text with [sections]; '#' and ';' start comments.
// Unknown sections or keys and out-of-range values raise ConfigError naming
// the field and line. A `preset = desk` line (or the preset argument, which
// takes precedence) shrinks the test split to 100 and Q to 2000 unless those
// keys are given explicitly.
ExperimentConfig parse_config(const std::string& text, std::optional<std::string> preset_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::string> preset_override = std::nullopt);

// Fully expanded config in the same text format, defaults filled in.
std::string normalized_config(const ExperimentConfig& cfg);
std::string config_fingerprint(const ExperimentConfig& cfg);

// Failure inside one stage of run_experiment.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what, bool numerical)
      : std::runtime_error("stage '" + stage + "': " + what), stage_(stage), numerical_(numerical) {}
  const std::string& stage() const { return stage_; }
  bool numerical() const { return numerical_; }

 private:
  std::string stage_;
  bool numerical_;
};

struct EstimatorSummary {
  std::string name;
  double tau = 0.0;
  std::size_t tau_index = 0;
  double mse = 0.0;
  double se = 0.0;          // standard error of the mean per-signal error
  double gap_db = 0.0;      // 10 log10(mse / mse_mmse)
  double gap_se_db = 0.0;   // delta-method standard error of gap_db from paired errors
  double paired_se = 0.0;   // standard error of mean(err_e - err_mmse)
  std::size_t unconverged = 0;  // test solves that stopped at the ADMM iteration cap
  std::vector<double> curve;    // mean error per tau on the selection split
  std::vector<double> errors;   // per test signal
};

struct PointReport {
  double parameter = 0.0;
  std::string dataset_fingerprint;
  double noise_var = 0.0;
  double realized_snr_db = 0.0;
  double mmse_mse = 0.0;
  double mmse_se = 0.0;
  std::string mmse_method;  // "gibbs" or "closed_form"
  std::vector<double> mmse_errors;
  double mean_chain_ess = 0.0;
  std::size_t positivity_violations = 0;
  std::vector<EstimatorSummary> estimators;
  double seconds_dataset = 0.0;
  double seconds_variational = 0.0;
  double seconds_mmse = 0.0;

  const EstimatorSummary& estimator(const std::string& name) const;
};

struct BenchmarkReport {
  ExperimentConfig config;
  std::string config_text;
  std::string fingerprint;
  std::vector<PointReport> points;
};

// Runs the full protocol for every grid value: dataset generation and noise
// calibration, tau tuning on validation (and on test for starred entries),
// test-split reconstructions, and the MMSE reference.
BenchmarkReport run_experiment(const ExperimentConfig& cfg);

// Stages exposed for the CLI.
DatasetTriple generate_point_dataset(const ExperimentConfig& cfg, double grid_value);
std::vector<EstimatorSummary> evaluate_variational(const ExperimentConfig& cfg, const DatasetTriple& ds);
struct MmseSummary {
  std::string method;
  std::vector<Vector> estimates;
  std::vector<double> errors;
  double mean_ess = 0.0;
  std::size_t positivity_violations = 0;
};
MmseSummary evaluate_mmse(const ExperimentConfig& cfg, const DatasetTriple& ds);

nlohmann::json report_to_json(const BenchmarkReport& report);
void write_report(const BenchmarkReport& report, const std::filesystem::path& path);
nlohmann::json read_report_json(const std::filesystem::path& path);
// Config embedded in a report; the stored fingerprint must match.
ExperimentConfig config_from_report(const nlohmann::json& report);

// Whitespace-delimited table: a header row (parameter, one gap column per
// estimator, then mse columns) and one row per grid point.
struct PlotTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
PlotTable report_to_table(const BenchmarkReport& report);
std::string format_plot_table(const PlotTable& table);
PlotTable parse_plot_table(const std::string& text);
void report_to_plotdata(const BenchmarkReport& report, const std::filesystem::path& path);

// First M_T repository examples for the first grid value. Prefix-stable: the
// examples do not depend on M_T. M_T must be in [1, repository capacity].
DatasetTriple training_repository(const ExperimentConfig& cfg, std::size_t count);
void export_training_repository(const ExperimentConfig& cfg, std::size_t count, const std::filesystem::path& path);

}  // namespace levybench
