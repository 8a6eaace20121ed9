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

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "dprep/pipeline.hpp"

using namespace dprep;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = DPREP_TEST_WORK;
const fs::path kConfigs = DPREP_CONFIG_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

/// Runs the CLI; returns its exit status.
int cli(const std::string& args) {
  const std::string cmd = std::string(DPREP_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh(const std::string& name) {
  const fs::path dir = kWork / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int count_lines(const std::string& text) { return static_cast<int>(std::count(text.begin(), text.end(), '\n')); }

const char* kTwoSpin = R"({
  "name": "two spins", "units": "V", "seed": 3,
  "model": {"family": "xy", "geometry": "chain", "n": 2, "V": 1},
  "auxiliaries": {"levels": "reduced", "J": 0.2, "omega": 0.2, "gamma": 0.3},
  "protocol": {"kind": "ground", "omega_c": 0},
  "target": {"kind": "filling", "filling": 1},
  "solver": {"method": "trajectories", "t_max": 20, "grid": 11, "n_traj": 16},
  "observables": ["number", "energy", "fidelity"]
})";

}  // namespace

TEST_CASE("config parsing rejects bad input") {
  const ExperimentConfig ok = parse_config(kTwoSpin);
  CHECK(ok.model.V == 1.0);
  CHECK(ok.solver.n_traj == 16);
  std::string unknown = kTwoSpin;
  unknown.replace(unknown.find("\"seed\""), 6, "\"sead\"");
  CHECK_THROWS_AS(parse_config(unknown), ConfigError);
  std::string negative = kTwoSpin;
  negative.replace(negative.find("\"gamma\": 0.3"), 12, "\"gamma\": -0.3");
  CHECK_THROWS_AS(parse_config(negative), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(load_config((kWork / "does_not_exist.json").string()), MissingInputError);
}

TEST_CASE("shipped configs parse") {
  int count = 0;
  for (const fs::directory_entry& e : fs::directory_iterator(kConfigs)) {
    if (e.path().extension() != ".json") continue;
    INFO(e.path().filename().string());
    CHECK_NOTHROW(load_config(e.path().string()));
    ++count;
  }
  CHECK(count >= 10);
}

TEST_CASE("config hash is the git blob hash of the canonical text") {
  ExperimentConfig c;
  c.canonical = "";
  CHECK(config_hash(c) == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  c.canonical = "hello\n";
  CHECK(config_hash(c) == "ce013625030ba8dba906f756967f9e9ca394464a");

  // formatting and key order do not matter, values do
  const ExperimentConfig a = parse_config(kTwoSpin);
  std::string reordered = kTwoSpin;
  reordered.replace(reordered.find("\"units\": \"V\", \"seed\": 3"), 23, "\"seed\": 3,  \"units\": \"V\"");
  CHECK(config_hash(parse_config(reordered)) == config_hash(a));
  std::string changed = kTwoSpin;
  changed.replace(changed.find("\"seed\": 3"), 9, "\"seed\": 4");
  CHECK(config_hash(parse_config(changed)) != config_hash(a));
}

TEST_CASE("two-spin band and filling interval") {
  const ExperimentConfig c = parse_config(kTwoSpin);
  std::stringstream ss;
  write_spectrum_csv(ss, compute_spectrum(c));
  const SpectrumTable t = read_spectrum_table(ss);
  REQUIRE(t.lambda.size() == 4);
  const Band b = transition_band(t);
  CHECK(b.lo == Approx(-1.0));
  CHECK(b.hi == Approx(1.0));
  // filling 1 wins for omega_c in (-V, V)
  const EigenDecomposition values = spectrum_from_table(t);
  CHECK(auto_omega_c(values, b, 1) == Approx(0.0).scale(1.0));
  const std::vector<double> grid = time_grid(c.solver);
  REQUIRE(grid.size() == 11);
  CHECK(grid.back() == 20.0);
}

TEST_CASE("cli: spectrum of two spins") {
  const fs::path dir = fresh("spectrum");
  spit(dir / "cfg.json", kTwoSpin);
  REQUIRE(cli("spectrum -c " + (dir / "cfg.json").string() + " -o " + (dir / "out").string()) == 0);
  const std::string text = slurp(dir / "out" / "spectrum.csv");
  CHECK(text.rfind("n,index,lambda\n", 0) == 0);
  CHECK(count_lines(text) == 5);
}

TEST_CASE("cli: exit codes") {
  const fs::path dir = fresh("exit_codes");
  std::string negative = kTwoSpin;
  negative.replace(negative.find("\"gamma\": 0.3"), 12, "\"gamma\": -0.3");
  spit(dir / "neg.json", negative);
  CHECK(cli("run -c " + (dir / "neg.json").string() + " -o " + (dir / "neg").string()) == 2);
  CHECK_FALSE(fs::exists(dir / "neg"));

  std::string unknown = kTwoSpin;
  unknown.replace(unknown.find("\"seed\""), 6, "\"sead\"");
  spit(dir / "unknown.json", unknown);
  CHECK(cli("run -c " + (dir / "unknown.json").string() + " -o " + (dir / "unknown").string()) == 2);

  CHECK(cli("run -c " + (dir / "missing.json").string()) == 4);
  spit(dir / "ok.json", kTwoSpin);
  CHECK(cli("trajectories -c " + (dir / "ok.json").string() + " -o " + (dir / "empty").string()) == 4);
  CHECK(cli("frobnicate") == 2);
}

TEST_CASE("cli: staged stages reproduce a single run") {
  const fs::path dir = fresh("staged");
  const std::string cfg = (dir / "cfg.json").string();
  spit(dir / "cfg.json", kTwoSpin);
  REQUIRE(cli("run -c " + cfg + " -o " + (dir / "run").string()) == 0);
  REQUIRE(cli("run -c " + cfg + " -o " + (dir / "again").string()) == 0);
  const std::string staged = (dir / "staged").string();
  REQUIRE(cli("spectrum -c " + cfg + " -o " + staged) == 0);
  REQUIRE(cli("protocol -c " + cfg + " -o " + staged) == 0);
  REQUIRE(cli("trajectories -c " + cfg + " -o " + staged + " -j 2") == 0);
  for (const char* f : {"spectrum.csv", "schedules.csv", "observables.csv"}) {
    INFO(f);
    CHECK(slurp(dir / "run" / f) == slurp(dir / "again" / f));
    CHECK(slurp(dir / "run" / f) == slurp(dir / "staged" / f));
  }
  const std::string obs = slurp(dir / "run" / "observables.csv");
  CHECK(obs.find("fidelity") != std::string::npos);

  // a different seed changes the ensemble
  REQUIRE(cli("run -c " + cfg + " -o " + (dir / "seed").string() + " --seed 9") == 0);
  CHECK(slurp(dir / "seed" / "observables.csv") != obs);
}

TEST_CASE("cli: imported schedules replay exactly") {
  const fs::path dir = fresh("import");
  const std::string cfg = (dir / "cfg.json").string();
  spit(dir / "cfg.json", kTwoSpin);
  REQUIRE(cli("run -c " + cfg + " -o " + (dir / "run").string()) == 0);
  const std::string replay = (dir / "replay").string();
  REQUIRE(cli("spectrum -c " + cfg + " -o " + replay) == 0);
  REQUIRE(cli("protocol -c " + cfg + " -o " + replay + " --import " + (dir / "run" / "schedules.csv").string()) == 0);
  REQUIRE(cli("trajectories -c " + cfg + " -o " + replay) == 0);
  CHECK(slurp(dir / "replay" / "schedules.csv") == slurp(dir / "run" / "schedules.csv"));
  CHECK(slurp(dir / "replay" / "observables.csv") == slurp(dir / "run" / "observables.csv"));
  CHECK(cli("protocol -c " + cfg + " -o " + replay + " --import " + (dir / "nope.csv").string()) == 4);
}

TEST_CASE("optimize on the singlet objective") {
  const fs::path dir = fresh("optimize");
  const std::string cfg = (kConfigs / "singlet_optimize.json").string();
  const std::string out = (dir / "out").string();
  REQUIRE(cli("spectrum -c " + cfg + " -o " + out) == 0);
  REQUIRE(cli("protocol -c " + cfg + " -o " + out) == 0);
  REQUIRE(cli("optimize -c " + cfg + " -o " + out) == 0);
  std::istringstream log(slurp(dir / "out" / "optimization.csv"));
  std::string line;
  std::getline(log, line);
  CHECK(line == "iteration,J,omega,gamma,objective,incumbent,failed");
  int rows = 0;
  double best = -1e300;
  while (std::getline(log, line)) {
    ++rows;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    REQUIRE(cols.size() == 7);
    if (cols[6] == "0") best = std::max(best, std::stod(cols[4]));
  }
  CHECK(rows == 100);

  // grid-search oracle over the same box
  const ExperimentConfig c = load_config(cfg);
  std::ifstream sched(dir / "out" / "schedules.csv");
  const std::vector<AuxSchedule> schedules = read_schedules_csv(sched);
  double grid_best = -1e300;
  for (int i = 1; i <= 5; ++i)
    for (int j = 1; j <= 5; ++j)
      for (int k = 1; k <= 5; ++k) {
        try {
          grid_best = std::max(grid_best, fidelity_objective(c, schedules, {0.02 * i, 0.02 * j, 0.02 * k}, 1));
        } catch (const NumericError&) {
        }
      }
  INFO("optimizer " << best << ", grid " << grid_best);
  CHECK(best <= 1.0 + 1e-9);
  CHECK(best >= grid_best);
}
