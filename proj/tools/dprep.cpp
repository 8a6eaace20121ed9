// Copyright 2026 The dprep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// dprep: command-line runner for the pipeline.
//
//   dprep run          -c cfg.json [-o dir]   all stages, files written at the end
//   dprep spectrum     -c cfg.json [-o dir]   -> spectrum.csv
//   dprep protocol     -c cfg.json [-o dir]   spectrum.csv -> schedules.csv
//   dprep protocol     -c cfg.json --import s.csv
//   dprep evolve       -c cfg.json [-o dir]   schedules.csv -> observables.csv (dense or steady)
//   dprep trajectories -c cfg.json [-o dir]   schedules.csv -> observables.csv
//   dprep optimize     -c cfg.json [-o dir]   schedules.csv -> optimization.csv
//
// Exit codes: 0 ok, 1 unexpected failure, 2 config or usage error,
// 3 numerical failure, 4 missing or unreadable input.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "dprep/pipeline.hpp"

namespace fs = std::filesystem;
using dprep::ExperimentConfig;
using Json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kNumeric = 3, kMissing = 4 };

struct Options {
  std::string config;
  std::string output;
  std::string import_csv;
  long long seed = -1;
  int workers = 0;
  int verbosity = 1;  // 0 quiet, 1 warnings, 2 progress
};

// Output files collected in memory; nothing touches the disk until the
// whole command has succeeded.
using Files = std::map<std::string, std::string>;

class Runner {
 public:
  Runner(ExperimentConfig config, Options opt) : c_(std::move(config)), opt_(std::move(opt)) {}

  void log(const std::string& s) const {
    if (opt_.verbosity >= 2) std::cerr << "dprep: " << s << '\n';
  }
  void warn(const std::string& s) const {
    if (opt_.verbosity >= 1) std::cerr << "dprep: warning: " << s << '\n';
  }

  std::string spectrum_stage() const {
    log("diagonalizing");
    const dprep::EigenDecomposition eig = dprep::compute_spectrum(c_);
    std::ostringstream os;
    dprep::write_spectrum_csv(os, eig);
    return os.str();
  }

  std::string protocol_stage(const std::string& spectrum_csv) const {
    log("building protocol");
    std::istringstream is(spectrum_csv);
    const dprep::SpectrumTable table = dprep::read_spectrum_table(is);
    const dprep::Protocol p = dprep::compute_protocol(c_, table, c_.solver.t_max);
    for (const std::string& w : p.warnings) warn(w);
    std::ostringstream os;
    dprep::write_schedules_csv(os, p.aux);
    return os.str();
  }

  // Observable series (or a sweep over auxiliary settings) plus metadata.
  void dynamics_stage(const std::string& schedules_csv, const std::string& method, Files& out) const {
    const std::vector<dprep::AuxSchedule> schedules = parse_schedules(schedules_csv);
    Json meta = base_metadata(method);
    if (c_.sweep.empty()) {
      log("running " + method);
      const dprep::DynamicsOutput r = dprep::run_dynamics(c_, c_.aux, schedules, workers(), method);
      std::ostringstream os;
      dprep::write_series_csv(os, r.series);
      out["observables.csv"] = os.str();
      meta["result"] = result_metadata(r, method);
    } else {
      std::ostringstream summary;
      summary << "point,J,omega,gamma,Gamma,omega_i,observable,t,mean,std,stderr\n";
      Json points = Json::array();
      for (size_t k = 0; k < c_.sweep.size(); ++k) {
        log("sweep point " + std::to_string(k));
        const dprep::AuxConfig& a = c_.sweep[k];
        const dprep::DynamicsOutput r = dprep::run_dynamics(c_, a, schedules, workers(), method);
        std::ostringstream os;
        dprep::write_series_csv(os, r.series);
        out["point_" + std::to_string(k) + "/observables.csv"] = os.str();
        for (const dprep::ObservableSeries& s : r.series) {
          char buf[512];
          std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%.17g,%.17g,%.17g,%.17g\n", k, a.J,
                        a.omega, opt_or_nan(a.gamma), opt_or_nan(a.Gamma), opt_or_nan(a.omega_i), s.name.c_str(),
                        s.times.back(), s.mean.back(), s.std.back(), s.stderr_.back());
          summary << buf;
        }
        Json pm = result_metadata(r, method);
        pm["auxiliaries"] = aux_json(a);
        points.push_back(pm);
      }
      out["sweep.csv"] = summary.str();
      meta["sweep"] = points;
    }
    out["metadata.json"] = meta.dump(2) + "\n";
  }

  void optimize_stage(const std::string& schedules_csv, Files& out) const {
    if (!c_.optimize.enabled) throw dprep::ConfigError("config has no optimize block");
    const std::vector<dprep::AuxSchedule> schedules = parse_schedules(schedules_csv);
    dprep::OptimizationProblem prob;
    prob.bounds = c_.optimize.parameters;
    prob.budget = c_.optimize.budget;
    prob.initial_design = c_.optimize.initial_design;
    prob.seed = c_.seed;
    prob.batch = c_.optimize.batch;
    // Batched candidates run side by side; each simulation then runs serially.
    prob.workers = c_.optimize.batch > 1 ? workers() : 1;
    const int inner = c_.optimize.batch > 1 ? 1 : workers();
    prob.objective = [&](const std::vector<double>& x) {
      return dprep::fidelity_objective(c_, schedules, x, inner);
    };
    log("optimizing over " + std::to_string(prob.bounds.size()) + " parameters");
    const dprep::OptimizationResult r = dprep::optimize_params(prob);
    std::ostringstream os;
    dprep::write_optimization_log(os, prob.bounds, r);
    out["optimization.csv"] = os.str();
    Json meta = base_metadata(c_.solver.method);
    Json best = Json::object();
    for (size_t k = 0; k < prob.bounds.size(); ++k) best[prob.bounds[k].name] = r.best_x[k];
    meta["optimum"] = {{"parameters", best}, {"objective", r.best_value}, {"evaluations", r.history.size()}};
    out["metadata.json"] = meta.dump(2) + "\n";
  }

  std::string default_method() const { return c_.solver.method; }

 private:
  static double opt_or_nan(const std::optional<double>& v) {
    return v ? *v : std::numeric_limits<double>::quiet_NaN();
  }

  int workers() const {
    if (opt_.workers > 0) return opt_.workers;
    return std::max(1u, std::thread::hardware_concurrency());
  }

  static std::vector<dprep::AuxSchedule> parse_schedules(const std::string& text) {
    std::istringstream is(text);
    return dprep::read_schedules_csv(is);
  }

  static Json aux_json(const dprep::AuxConfig& a) {
    static const char* levels[] = {"full", "reduced", "effective"};
    Json j = {{"levels", levels[static_cast<int>(a.levels)]}, {"J", a.J}, {"omega", a.omega}};
    if (a.gamma) j["gamma"] = *a.gamma;
    if (a.Gamma) j["Gamma"] = *a.Gamma;
    if (a.omega_i) j["omega_i"] = *a.omega_i;
    if (!a.attach.empty()) j["attach"] = a.attach;
    return j;
  }

  Json base_metadata(const std::string& method) const {
    Json model = {{"family", c_.model.family}, {"V", c_.model.V}};
    if (c_.model.family == "hofstadter") model["alpha"] = c_.model.alpha;
    if (c_.model.family == "ising") model["delta"] = c_.model.delta;
    Json solver = {{"method", method}, {"t_max", c_.solver.t_max}, {"grid", c_.solver.grid}};
    if (method == "trajectories") solver["n_traj"] = c_.solver.n_traj;
    if (std::isfinite(c_.solver.secular_cutoff)) solver["secular_cutoff"] = c_.solver.secular_cutoff;
    solver["rtol"] = c_.solver.ode.rtol;
    solver["atol"] = c_.solver.ode.atol;
    return {{"name", c_.name},
            {"config_hash", dprep::config_hash(c_)},
            {"seed", c_.seed},
            {"units", c_.units},
            {"parameters", {{"model", model}, {"auxiliaries", aux_json(c_.aux)}, {"solver", solver}}}};
  }

  Json result_metadata(const dprep::DynamicsOutput& r, const std::string& method) const {
    for (const std::string& w : r.warnings) warn(w);
    Json j = {{"system_dimension", r.system_dim}, {"composite_dimension", r.composite_dim}, {"warnings", r.warnings}};
    if (method == "trajectories") j["total_jumps"] = r.total_jumps;
    if (method == "dense") {
      j["max_trace_error"] = r.dense.max_trace_error;
      j["max_hermiticity_error"] = r.dense.max_hermiticity_error;
      if (c_.solver.check_positivity) j["min_eigenvalue"] = r.dense.min_eigenvalue;
    }
    if (method == "steady") {
      j["kernel_dimension"] = r.kernel_dimension;
      j["residual"] = r.steady_residual;
    }
    return j;
  }

  ExperimentConfig c_;
  Options opt_;
};

std::string read_file(const fs::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw dprep::MissingInputError(std::string("missing ") + what + " '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_files(const fs::path& dir, const Files& files) {
  for (const auto& [name, text] : files) {
    const fs::path p = dir / name;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  }
}

int execute(const std::string& command, const Options& opt) {
  ExperimentConfig config = dprep::load_config(opt.config);
  if (opt.seed >= 0) config.seed = static_cast<std::uint64_t>(opt.seed);
  const fs::path dir = !opt.output.empty() ? fs::path(opt.output) : fs::path(config.output);
  if (dir.empty()) throw dprep::ConfigError("no output directory; pass -o or set 'output'");

  Runner runner(config, opt);
  Files files;
  if (command == "spectrum") {
    files["spectrum.csv"] = runner.spectrum_stage();
  } else if (command == "protocol") {
    if (!opt.import_csv.empty()) {
      std::istringstream is(read_file(opt.import_csv, "schedule table"));
      std::ostringstream os;
      dprep::write_schedules_csv(os, dprep::read_schedules_csv(is));
      files["schedules.csv"] = os.str();
    } else {
      files["schedules.csv"] = runner.protocol_stage(read_file(dir / "spectrum.csv", "spectrum"));
    }
  } else if (command == "evolve" || command == "trajectories") {
    std::string method = command;
    if (command == "evolve") method = config.solver.method == "steady" ? "steady" : "dense";
    runner.dynamics_stage(read_file(dir / "schedules.csv", "schedule table"), method, files);
  } else if (command == "optimize") {
    runner.optimize_stage(read_file(dir / "schedules.csv", "schedule table"), files);
  } else {  // run
    files["spectrum.csv"] = runner.spectrum_stage();
    files["schedules.csv"] = runner.protocol_stage(files["spectrum.csv"]);
    if (config.optimize.enabled) {
      runner.optimize_stage(files["schedules.csv"], files);
    } else {
      runner.dynamics_stage(files["schedules.csv"], runner.default_method(), files);
    }
  }
  write_files(dir, files);
  runner.log("wrote " + std::to_string(files.size()) + " files to " + dir.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dprep: dissipative preparation of many-body eigenstates"};
  app.require_subcommand(1);
  Options opt;
  bool verbose = false;
  bool quiet = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config, "experiment config (JSON)")->required();
    sub->add_option("-o,--output", opt.output, "output directory (overrides the config)");
    sub->add_option("--seed", opt.seed, "master seed override")->check(CLI::NonNegativeNumber);
    sub->add_option("-j,--workers", opt.workers, "worker threads (default: available cores)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("-v,--verbose", verbose, "report progress");
    sub->add_flag("-q,--quiet", quiet, "suppress warnings");
  };
  add_common(app.add_subcommand("run", "all stages in one process"));
  add_common(app.add_subcommand("spectrum", "diagonalize the system Hamiltonian"));
  CLI::App* proto = app.add_subcommand("protocol", "detuning schedules from spectrum.csv");
  add_common(proto);
  proto->add_option("--import", opt.import_csv, "replay a schedule CSV instead of computing one");
  add_common(app.add_subcommand("evolve", "density-matrix evolution (or steady state)"));
  add_common(app.add_subcommand("trajectories", "quantum-trajectory ensemble"));
  add_common(app.add_subcommand("optimize", "Bayesian optimization of auxiliary parameters"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }
  opt.verbosity = quiet ? 0 : verbose ? 2 : 1;
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    return execute(command, opt);
  } catch (const dprep::ConfigError& e) {
    std::cerr << "dprep: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const dprep::NumericError& e) {
    std::cerr << "dprep: numerical failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const dprep::MissingInputError& e) {
    std::cerr << "dprep: " << e.what() << '\n';
    return kMissing;
  } catch (const std::exception& e) {
    std::cerr << "dprep: error: " << e.what() << '\n';
    return kOther;
  }
}
