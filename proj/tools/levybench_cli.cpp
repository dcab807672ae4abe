// levybench: run the Lévy-process reconstruction benchmark from a config file.
//
//   levybench validate --config exp.ini
//   levybench report --config exp.ini --preset desk --out report.json --plotdata gaps.dat
//   levybench report --from report.json --out rerun.json
//   levybench export-train --config exp.ini --count 5000 --out train.lvb

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "levybench/container.hpp"
#include "levybench/errors.hpp"
#include "levybench/experiment.hpp"
#include "levybench/parallel.hpp"

using namespace levybench;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<unsigned> threads;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the master seed");
  cmd->add_option("--preset", c.preset, "full or desk")->check(CLI::IsMember({"full", "desk"}));
  cmd->add_option("--threads", c.threads, "worker threads (0 = hardware)");
  auto* out = cmd->add_option("--out", c.out, "output path");
  if (out_required) out->required();
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = load_config(c.config, c.preset);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.seed_defaulted = false;
  }
  if (c.threads) cfg.threads = *c.threads;
  set_worker_count(cfg.threads);
  return cfg;
}

std::string tag(const ExperimentConfig& cfg, double value) { return grid_parameter_name(cfg.model) + "=" + std::to_string(value); }

void emit(const nlohmann::json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_file_atomically(out, j.dump(2) + "\n");
    std::cout << "wrote " << out << "\n";
  }
}

int cmd_validate(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  std::cout << normalized_config(cfg) << "\n# fingerprint " << config_fingerprint(cfg) << "\n";
  return 0;
}

int cmd_generate(const Common& c, bool csv) {
  const ExperimentConfig cfg = resolve(c);
  std::filesystem::create_directories(c.out);
  for (std::size_t p = 0; p < cfg.grid.size(); ++p) {
    const DatasetTriple ds = generate_point_dataset(cfg, cfg.grid[p]);
    const auto base = std::filesystem::path(c.out) / ("point" + std::to_string(p));
    export_dataset(ds, base.string() + ".lvb");
    if (csv) export_dataset_csv(ds, base.string() + ".csv");
    std::printf("%s  %s  noise_var=%.6g  snr=%.3f dB  fingerprint=%s\n", base.string().c_str(), tag(cfg, cfg.grid[p]).c_str(),
                ds.instance.noise_var, realized_snr_db(ds, {Split::Validation, Split::Test}), ds.fingerprint().c_str());
  }
  return 0;
}

int cmd_tune(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const TauGrid grid = cfg.tau_grid();
  nlohmann::json j = {{"fingerprint", config_fingerprint(cfg)}, {"tau_grid", grid.values()}, {"points", nlohmann::json::array()}};
  for (double value : cfg.grid) {
    const DatasetTriple ds = generate_point_dataset(cfg, value);
    nlohmann::json pj = {{"parameter", value}};
    for (const auto& r : cfg.roster) {
      const TuningResult t = r.oracle ? tune_tau_oracle(r.estimator, ds.instance, ds.test, grid, cfg.admm)
                                      : tune_tau(r.estimator, ds.instance, ds.validation, grid, cfg.admm);
      pj[r.name()] = {{"tau", t.tau}, {"index", t.index}, {"curve", t.mse}, {"unimodal", is_unimodal(t.mse)}};
      std::printf("%s  %-5s tau=%.6g  mse=%.6g\n", tag(cfg, value).c_str(), r.name().c_str(), t.tau, t.mse[t.index]);
    }
    j["points"].push_back(pj);
  }
  if (!c.out.empty()) emit(j, c.out);
  return 0;
}

int cmd_estimate(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  nlohmann::json j = {{"fingerprint", config_fingerprint(cfg)}, {"points", nlohmann::json::array()}};
  for (double value : cfg.grid) {
    const DatasetTriple ds = generate_point_dataset(cfg, value);
    nlohmann::json pj = {{"parameter", value}};
    for (const auto& s : evaluate_variational(cfg, ds)) {
      pj[s.name] = {{"tau", s.tau}, {"mse", s.mse}, {"se", s.se}, {"unconverged", s.unconverged}, {"errors", s.errors}};
      std::printf("%s  %-5s tau=%.6g  mse=%.6g +- %.2g\n", tag(cfg, value).c_str(), s.name.c_str(), s.tau, s.mse, s.se);
    }
    j["points"].push_back(pj);
  }
  if (!c.out.empty()) emit(j, c.out);
  return 0;
}

int cmd_mmse(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  nlohmann::json j = {{"fingerprint", config_fingerprint(cfg)}, {"points", nlohmann::json::array()}};
  for (double value : cfg.grid) {
    const DatasetTriple ds = generate_point_dataset(cfg, value);
    const MmseSummary m = evaluate_mmse(cfg, ds);
    double mse = 0.0;
    for (double e : m.errors) mse += e / static_cast<double>(m.errors.size());
    j["points"].push_back({{"parameter", value},
                           {"method", m.method},
                           {"mse", mse},
                           {"mean_chain_ess", m.mean_ess},
                           {"positivity_violations", m.positivity_violations},
                           {"errors", m.errors}});
    std::printf("%s  mmse (%s)  mse=%.6g  mean ess=%.1f\n", tag(cfg, value).c_str(), m.method.c_str(), mse, m.mean_ess);
  }
  if (!c.out.empty()) emit(j, c.out);
  return 0;
}

int cmd_report(const Common& c, const std::string& from, const std::string& plotdata) {
  ExperimentConfig cfg;
  if (!from.empty()) {
    cfg = config_from_report(read_report_json(from));
    if (c.threads) cfg.threads = *c.threads;
  } else {
    if (c.config.empty()) throw ConfigError("report needs --config or --from");
    cfg = resolve(c);
  }
  const BenchmarkReport report = run_experiment(cfg);
  for (const auto& p : report.points) {
    std::printf("%s  mmse=%.6g (%s)  snr=%.3f dB\n", tag(cfg, p.parameter).c_str(), p.mmse_mse, p.mmse_method.c_str(),
                p.realized_snr_db);
    for (const auto& s : p.estimators) {
      std::printf("  %-5s tau=%-10.4g mse=%-10.6g gap=%7.3f dB (se %.3f)\n", s.name.c_str(), s.tau, s.mse, s.gap_db,
                  s.gap_se_db);
    }
  }
  write_report(report, c.out);
  std::cout << "wrote " << c.out << " (fingerprint " << report.fingerprint << ")\n";
  if (!plotdata.empty()) {
    report_to_plotdata(report, plotdata);
    std::cout << "wrote " << plotdata << "\n";
  }
  return 0;
}

int cmd_export_train(const Common& c, std::size_t count) {
  const ExperimentConfig cfg = resolve(c);
  export_training_repository(cfg, count, c.out);
  std::cout << "wrote " << count << " training examples to " << c.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lévy-process inverse-problem benchmark"};
  app.require_subcommand(1);

  Common validate_opts, generate_opts, tune_opts, estimate_opts, mmse_opts, report_opts, export_opts;
  bool csv = false;
  std::string from, plotdata;
  std::size_t count = 0;

  auto* validate = app.add_subcommand("validate", "parse a config and print it with defaults filled in");
  add_common(validate, validate_opts, false);
  auto* generate = app.add_subcommand("generate", "write one dataset file per grid point into --out");
  add_common(generate, generate_opts, true);
  generate->add_flag("--csv", csv, "also write CSV");
  auto* tune = app.add_subcommand("tune", "select tau for each roster entry");
  add_common(tune, tune_opts, false);
  auto* estimate = app.add_subcommand("estimate", "variational reconstructions of the test split");
  add_common(estimate, estimate_opts, false);
  auto* mmse = app.add_subcommand("mmse", "MMSE reference on the test split");
  add_common(mmse, mmse_opts, false);

  auto* report = app.add_subcommand("report", "run the full protocol and write a JSON report");
  report->add_option("--config", report_opts.config, "experiment config file")->check(CLI::ExistingFile);
  report->add_option("--seed", report_opts.seed, "override the master seed");
  report->add_option("--preset", report_opts.preset, "full or desk")->check(CLI::IsMember({"full", "desk"}));
  report->add_option("--threads", report_opts.threads, "worker threads (0 = hardware)");
  report->add_option("--out", report_opts.out, "report path")->required();
  report->add_option("--from", from, "re-run the config embedded in an earlier report")->check(CLI::ExistingFile);
  report->add_option("--plotdata", plotdata, "also write the gap table");

  auto* export_train = app.add_subcommand("export-train", "export the first --count repository examples");
  add_common(export_train, export_opts, true);
  export_train->add_option("--count", count, "number of training examples (M_T)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*validate) return cmd_validate(validate_opts);
    if (*generate) return cmd_generate(generate_opts, csv);
    if (*tune) return cmd_tune(tune_opts);
    if (*estimate) return cmd_estimate(estimate_opts);
    if (*mmse) return cmd_mmse(mmse_opts);
    if (*report) return cmd_report(report_opts, from, plotdata);
    if (*export_train) return cmd_export_train(export_opts, count);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.numerical() ? kExitNumerical : 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
