// Command-line front end: scenario simulation, observability reports, and
// calibration runs. See README.md for the file formats.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "arraycal/calibrate.hpp"
#include "arraycal/io.hpp"
#include "arraycal/jacobian.hpp"
#include "arraycal/observability.hpp"
#include "arraycal/rank.hpp"
#include "arraycal/scenario.hpp"
#include "arraycal/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace arraycal;

namespace {

#ifndef ARRAYCAL_DATA_DIR
#define ARRAYCAL_DATA_DIR "data/scenarios"
#endif

struct CommonOptions {
  std::string scenario_path;
  std::string out_dir;
  bool force = false;
  double rank_threshold = -1.0;
  std::optional<std::uint64_t> seed;
};

std::string default_out_dir() {
  if (const char* env = std::getenv("ARRAYCAL_OUT_DIR")) return env;
  return "arraycal_out";
}

RankOptions rank_options(const CommonOptions& opts) {
  RankOptions r;
  r.threshold = opts.rank_threshold;
  return r;
}

// Creates the output directory and refuses to clobber existing files unless
// --force was given.
void prepare_outputs(const CommonOptions& opts,
                     const std::vector<std::string>& names) {
  fs::create_directories(opts.out_dir);
  if (opts.force) return;
  for (const auto& name : names) {
    const fs::path p = fs::path(opts.out_dir) / name;
    if (fs::exists(p)) {
      throw std::runtime_error(p.string() +
                               " already exists (pass --force to overwrite)");
    }
  }
}

void write_manifest(const CommonOptions& opts, const std::string& command,
                    const ScenarioFile& file, const json& flags,
                    const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["seed"] = file.scenario.seed;
  m["inputs"] = {{"scenario",
                  {{"file", fs::path(opts.scenario_path).filename().string()},
                   {"fnv1a64", fnv1a64_hex(read_file(opts.scenario_path))}}}};
  m["flags"] = flags;
  m["outputs"] = outputs;
  write_file(fs::path(opts.out_dir) / "manifest.json", m.dump(2) + "\n");
}

ScenarioFile load(const CommonOptions& opts) {
  ScenarioFile file = load_scenario(opts.scenario_path);
  if (opts.seed) file.scenario.seed = *opts.seed;
  return file;
}

std::vector<std::vector<std::string>> trace_rows(const RankReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& step : report.trace) {
    rows.push_back({std::to_string(step.step), std::to_string(step.rank_J),
                    std::to_string(step.g2), std::to_string(step.deficit),
                    step.full_rank ? "1" : "0"});
  }
  return rows;
}

void write_trace_csv(const fs::path& path, const RankReport& report) {
  write_csv(path, {"step", "rank", "g2", "deficit", "full_rank_flag"},
            trace_rows(report));
}

json findings_to_json(const std::vector<Finding>& findings) {
  json out = json::array();
  for (const auto& f : findings) {
    json item;
    item["clause"] = clause_label(f.clause);
    if (f.array_index >= 0) item["array"] = f.array_index + 1;  // 1-based
    item["detail"] = f.detail;
    out.push_back(item);
  }
  return out;
}

int run_simulate(const CommonOptions& opts, bool noise_free) {
  const ScenarioFile file = load(opts);
  prepare_outputs(opts, {"measurements.json", "manifest.json"});
  const NoiseModel nm = noise_free
                            ? NoiseModel::zero(file.scenario.num_arrays())
                            : file.noise.to_model(file.scenario.num_arrays());
  const MeasurementSet ms = synthesize(file.scenario, nm);
  save_measurements(ms, fs::path(opts.out_dir) / "measurements.json");
  json noise_flags;
  noise_flags["noise_free"] = noise_free;
  if (file.noise.diagonal) {
    noise_flags["noise"] = {{"type", "diagonal"},
                            {"sigma_tdoa", file.noise.sigma_tdoa},
                            {"sigma_doa", file.noise.sigma_doa},
                            {"sigma_odometry", file.noise.sigma_odometry}};
  } else {
    noise_flags["noise"] = {{"type", "full"}};
  }
  write_manifest(opts, "simulate", file, noise_flags, {"measurements.json"});
  std::cout << "wrote " << (fs::path(opts.out_dir) / "measurements.json").string()
            << " (" << ms.num_steps << " steps, " << ms.num_arrays
            << " arrays)\n";
  return 0;
}

int run_rank_trace(const CommonOptions& opts, bool dump_matrices) {
  const ScenarioFile file = load(opts);
  std::vector<std::string> outputs = {"rank_trace.csv"};
  if (dump_matrices) {
    outputs.insert(outputs.end(),
                   {"J.csv", "F.csv", "fim.csv", "singular_values.csv"});
  }
  std::vector<std::string> guarded = outputs;
  guarded.push_back("manifest.json");
  prepare_outputs(opts, guarded);
  const RankReport report = rank_trace(file.scenario, rank_options(opts));
  write_trace_csv(fs::path(opts.out_dir) / "rank_trace.csv", report);
  if (dump_matrices) {
    const JacobianBundle bundle = assemble(file.scenario);
    write_matrix_csv(fs::path(opts.out_dir) / "J.csv", bundle.J);
    write_matrix_csv(fs::path(opts.out_dir) / "F.csv", build_F(file.scenario));
    write_matrix_csv(
        fs::path(opts.out_dir) / "fim.csv",
        fim(bundle, file.noise.to_model(file.scenario.num_arrays())));
    write_matrix_csv(fs::path(opts.out_dir) / "singular_values.csv",
                     singular_values(bundle.J));
  }
  write_manifest(opts, "rank-trace", file,
                 {{"rank_threshold", opts.rank_threshold},
                  {"dump_matrices", dump_matrices}},
                 outputs);
  if (report.full_column_rank) {
    std::cout << "full column rank from step " << report.first_full_rank_step
              << "\n";
  } else {
    std::cout << "never reaches full column rank (final deficit "
              << report.trace.back().deficit << ")\n";
  }
  return 0;
}

int run_check(const CommonOptions& opts) {
  const ScenarioFile file = load(opts);
  prepare_outputs(opts, {"verdict.json", "manifest.json"});
  const Scenario& sc = file.scenario;
  const RankOptions ropts = rank_options(opts);
  const RankReport report = rank_trace(sc, ropts);
  const SufficiencyVerdict sufficiency = check_sufficient(sc, ropts);
  const auto necessary = check_necessary(sc, ropts);
  const auto detected = detect_degenerate(sc);

  json verdict;
  verdict["observable"] = report.full_column_rank;
  verdict["first_full_rank_step"] = report.first_full_rank_step;
  verdict["rank_Tbar"] = report.rank_Tbar;
  verdict["rank_Lbar"] = report.rank_Lbar;
  verdict["necessary_failures"] = findings_to_json(necessary);
  verdict["degenerate_findings"] = findings_to_json(detected);
  verdict["sufficient"] = sufficiency.sufficient;
  verdict["sufficiency_witness"] =
      sufficiency.witness_index >= 0 ? sufficiency.witness_index + 1 : -1;
  write_file(fs::path(opts.out_dir) / "verdict.json", verdict.dump(2) + "\n");
  write_manifest(opts, "check", file,
                 {{"rank_threshold", opts.rank_threshold}}, {"verdict.json"});

  std::cout << "observable: " << (report.full_column_rank ? "yes" : "NO") << "\n";
  std::cout << "rank(Tbar) = " << report.rank_Tbar << ", rank(Lbar) =";
  for (int r : report.rank_Lbar) std::cout << " " << r;
  std::cout << "\n";
  if (sufficiency.sufficient) {
    std::cout << "sufficient condition holds with witness array "
              << sufficiency.witness_index + 1 << "\n";
  }
  for (const auto& f : necessary) {
    std::cout << "necessary condition failed [" << clause_label(f.clause)
              << "] " << f.detail << "\n";
  }
  for (const auto& f : detected) {
    std::cout << "degenerate configuration [" << clause_label(f.clause) << "] "
              << f.detail << "\n";
  }
  return 0;
}

int run_crlb(const CommonOptions& opts) {
  const ScenarioFile file = load(opts);
  const Scenario& sc = file.scenario;
  const NoiseModel nm = file.noise.to_model(sc.num_arrays());
  const FimCovariance cov =
      covariance_from_fim(assemble(sc), nm, rank_options(opts));
  if (cov.singular) {
    prepare_outputs(opts, {"fim_null_space.csv", "crlb_report.json",
                           "manifest.json"});
    write_matrix_csv(fs::path(opts.out_dir) / "fim_null_space.csv",
                     cov.null_basis);
    json report;
    report["singular"] = true;
    report["rank"] = cov.rank;
    report["dimension"] = int(cov.null_basis.rows());
    write_file(fs::path(opts.out_dir) / "crlb_report.json",
               report.dump(2) + "\n");
    write_manifest(opts, "crlb", file,
                   {{"rank_threshold", opts.rank_threshold}},
                   {"fim_null_space.csv", "crlb_report.json"});
    std::cout << "FIM singular (rank " << cov.rank
              << "); wrote the null-space basis\n";
  } else {
    prepare_outputs(opts, {"crlb_covariance_at_truth.csv", "manifest.json"});
    write_matrix_csv(fs::path(opts.out_dir) / "crlb_covariance_at_truth.csv",
                     cov.covariance);
    write_manifest(opts, "crlb", file,
                   {{"rank_threshold", opts.rank_threshold}},
                   {"crlb_covariance_at_truth.csv"});
    std::cout << "wrote CRLB covariance (" << cov.covariance.rows()
              << " parameters)\n";
  }
  return 0;
}

struct CalibrateFlags {
  std::string measurements_path;
  std::string init = "truth-perturbed";
  std::string init_file;
  bool noise_free = false;
  double gtol = 1e-10;
  double xtol = 1e-12;
  double ftol = 1e-12;
  int max_iterations = 200;
  double damping = 1e-3;
};

int run_calibrate(const CommonOptions& opts, const CalibrateFlags& flags) {
  const ScenarioFile file = load(opts);
  const Scenario& sc = file.scenario;

  CalibrationProblem prob;
  prob.dt = sc.dt;
  prob.c = sc.c;
  prob.noise = file.noise.to_model(sc.num_arrays());
  if (!flags.measurements_path.empty()) {
    prob.measurements = load_measurements(flags.measurements_path);
  } else {
    prob.measurements = synthesize(
        sc, flags.noise_free ? NoiseModel::zero(sc.num_arrays())
                             : file.noise.to_model(sc.num_arrays()));
  }

  if (flags.init == "truth-perturbed") {
    prob.initial_guess = initial_guess_perturbed(sc, Perturbation{}, sc.seed);
  } else if (flags.init == "dead-reckoning") {
    prob.initial_guess = initial_guess_dead_reckoning(prob.measurements);
  } else if (flags.init == "file") {
    if (flags.init_file.empty()) {
      throw InvalidConfig("--init file requires --init-file");
    }
    prob.initial_guess = load_state(flags.init_file).to_vector();
  } else {
    throw InvalidConfig("unknown init strategy '" + flags.init + "'");
  }

  SolveOptions sopts;
  sopts.gradient_tol = flags.gtol;
  sopts.step_tol = flags.xtol;
  sopts.cost_tol = flags.ftol;
  sopts.max_iterations = flags.max_iterations;
  sopts.initial_damping = flags.damping;

  std::vector<std::string> outputs = {"estimate.json", "convergence_log.csv",
                                      "calibration_report.json"};
  std::vector<std::string> guarded = outputs;
  guarded.push_back("covariance_at_estimate.csv");
  guarded.push_back("manifest.json");
  prepare_outputs(opts, guarded);
  const CalibrationResult result = solve(prob, sopts);

  save_state(StateFile::from_vector(result.estimate, prob.layout()),
             fs::path(opts.out_dir) / "estimate.json");
  std::vector<std::vector<std::string>> rows;
  for (const auto& rec : result.log) {
    rows.push_back({std::to_string(rec.iteration), format_full(rec.cost),
                    format_full(rec.damping), format_full(rec.gradient_norm)});
  }
  write_csv(fs::path(opts.out_dir) / "convergence_log.csv",
            {"iteration", "cost", "damping", "gradient_norm"}, rows);
  if (result.covariance) {
    write_matrix_csv(fs::path(opts.out_dir) / "covariance_at_estimate.csv",
                     *result.covariance);
    outputs.push_back("covariance_at_estimate.csv");
  }

  json report;
  report["converged"] = result.converged;
  report["status"] = result.status == SolveStatus::Converged ? "converged"
                     : result.status == SolveStatus::NonConvergence
                         ? "non-convergence"
                         : "singular-normal-equations";
  report["iterations"] = result.iterations;
  report["final_cost"] = result.final_cost;
  report["full_column_rank_at_estimate"] = result.rank_report.full_column_rank;
  report["violated_conditions"] =
      findings_to_json(result.rank_report.violated_conditions);
  write_file(fs::path(opts.out_dir) / "calibration_report.json",
             report.dump(2) + "\n");

  write_manifest(opts, "calibrate", file,
                 {{"init", flags.init},
                  {"noise_free", flags.noise_free},
                  {"gtol", flags.gtol},
                  {"xtol", flags.xtol},
                  {"ftol", flags.ftol},
                  {"max_iterations", flags.max_iterations},
                  {"damping", flags.damping},
                  {"measurements",
                   flags.measurements_path.empty()
                       ? ""
                       : fs::path(flags.measurements_path).filename().string()}},
                 outputs);

  std::cout << report["status"].get<std::string>() << " after "
            << result.iterations << " iterations, cost " << result.final_cost
            << "\n";
  return 0;
}

int run_repro_fig(const CommonOptions& opts_in, const std::string& which,
                  const std::string& scenario_dir) {
  static const std::vector<std::pair<std::string, std::vector<std::string>>>
      kBundles = {
          {"fig2", {"fig2_case1.json", "fig2_case2.json"}},
          {"fig3", {"fig3_collinear.json", "fig3_coplanar.json"}},
          {"fig4", {"fig4_collinear_arr2.json", "fig4_gimbal.json"}},
      };
  for (const auto& [name, files] : kBundles) {
    if (name != which) continue;
    std::vector<std::string> outputs;
    for (const auto& f : files) {
      outputs.push_back(fs::path(f).stem().string() + "_rank_trace.csv");
    }
    CommonOptions opts = opts_in;
    fs::create_directories(opts.out_dir);
    if (!opts.force) {
      std::vector<std::string> guarded = outputs;
      guarded.push_back("manifest.json");
      for (const auto& name2 : guarded) {
        if (fs::exists(fs::path(opts.out_dir) / name2)) {
          throw std::runtime_error((fs::path(opts.out_dir) / name2).string() +
                                   " already exists (pass --force to overwrite)");
        }
      }
    }
    json manifest_inputs = json::array();
    for (size_t i = 0; i < files.size(); ++i) {
      const fs::path spath = fs::path(scenario_dir) / files[i];
      const ScenarioFile file = load_scenario(spath);
      const RankReport report = rank_trace(file.scenario, rank_options(opts));
      write_trace_csv(fs::path(opts.out_dir) / outputs[i], report);
      manifest_inputs.push_back(
          {{"file", files[i]}, {"fnv1a64", fnv1a64_hex(read_file(spath))}});
      std::cout << files[i] << ": "
                << (report.full_column_rank
                        ? "full rank from step " +
                              std::to_string(report.first_full_rank_step)
                        : "deficit " +
                              std::to_string(report.trace.back().deficit) +
                              " at the final step")
                << "\n";
    }
    json m;
    m["command"] = "repro-fig";
    m["version"] = kVersion;
    m["flags"] = {{"which", which}, {"rank_threshold", opts.rank_threshold}};
    m["inputs"] = {{"scenarios", manifest_inputs}};
    m["outputs"] = outputs;
    write_file(fs::path(opts.out_dir) / "manifest.json", m.dump(2) + "\n");
    return 0;
  }
  throw InvalidConfig("unknown figure '" + which +
                      "' (expected fig2, fig3 or fig4)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint multi-array calibration and source localization toolkit"};
  app.require_subcommand(1);

  CommonOptions opts;
  opts.out_dir = default_out_dir();
  bool noise_free = false;
  CalibrateFlags cal;
  std::string which = "fig2";
  std::string scenario_dir = ARRAYCAL_DATA_DIR;

  auto add_common = [&](CLI::App* sub, bool needs_scenario = true) {
    if (needs_scenario) {
      sub->add_option("--scenario", opts.scenario_path, "scenario JSON file")
          ->required();
    }
    sub->add_option("--out", opts.out_dir,
                    "output directory (default $ARRAYCAL_OUT_DIR or ./arraycal_out)");
    sub->add_flag("--force", opts.force, "overwrite existing outputs");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "synthesize measurements");
  add_common(simulate);
  simulate->add_option("--seed", [&opts](const CLI::results_t& r) {
    opts.seed = std::stoull(r[0]);
    return true;
  }, "override the scenario seed");
  simulate->add_flag("--noise-free", noise_free, "skip the noise draw");

  bool dump_matrices = false;
  CLI::App* trace = app.add_subcommand("rank-trace", "per-step rank of F");
  add_common(trace);
  trace->add_option("--rank-threshold", opts.rank_threshold,
                    "absolute singular-value cutoff (default: scale-aware)");
  trace->add_flag("--dump-matrices", dump_matrices,
                  "also write J.csv, F.csv, fim.csv and singular_values.csv");

  CLI::App* check = app.add_subcommand("check", "observability verdict");
  add_common(check);
  check->add_option("--rank-threshold", opts.rank_threshold,
                    "absolute singular-value cutoff (default: scale-aware)");

  CLI::App* crlb = app.add_subcommand("crlb", "CRLB covariance at ground truth");
  add_common(crlb);
  crlb->add_option("--rank-threshold", opts.rank_threshold,
                   "absolute singular-value cutoff (default: scale-aware)");

  CLI::App* calibrate = app.add_subcommand("calibrate", "solve the LS problem");
  add_common(calibrate);
  calibrate->add_option("--measurements", cal.measurements_path,
                        "measurement JSON (default: synthesize from the scenario)");
  calibrate->add_option("--init", cal.init,
                        "truth-perturbed | dead-reckoning | file");
  calibrate->add_option("--init-file", cal.init_file, "state JSON for --init file");
  calibrate->add_flag("--noise-free", cal.noise_free,
                      "synthesize without noise");
  calibrate->add_option("--gtol", cal.gtol, "gradient norm tolerance");
  calibrate->add_option("--xtol", cal.xtol, "step norm tolerance");
  calibrate->add_option("--ftol", cal.ftol,
                        "relative cost-improvement tolerance");
  calibrate->add_option("--max-iterations", cal.max_iterations, "iteration cap");
  calibrate->add_option("--damping", cal.damping, "initial damping");
  calibrate->add_option("--seed", [&opts](const CLI::results_t& r) {
    opts.seed = std::stoull(r[0]);
    return true;
  }, "override the scenario seed");

  CLI::App* repro = app.add_subcommand("repro-fig", "bundled rank-trace studies");
  repro->add_option("--which", which, "fig2 | fig3 | fig4")->required();
  repro->add_option("--scenario-dir", scenario_dir, "bundled scenario directory");
  add_common(repro, /*needs_scenario=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) return run_simulate(opts, noise_free);
    if (trace->parsed()) return run_rank_trace(opts, dump_matrices);
    if (check->parsed()) return run_check(opts);
    if (crlb->parsed()) return run_crlb(opts);
    if (calibrate->parsed()) return run_calibrate(opts, cal);
    if (repro->parsed()) return run_repro_fig(opts, which, scenario_dir);
  } catch (const InvalidConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
