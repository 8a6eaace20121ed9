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

#include "dprep/pipeline.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dprep {

namespace {

using Json = nlohmann::json;

// Typed access to one JSON object with the key path kept for messages.
class Node {
 public:
  Node(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "must be an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!ok.count(it.key())) throw ConfigError("unknown key '" + path_ + it.key() + "'");
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  Node child(const char* key) const { return Node(j_.at(key), path_ + key + "."); }
  const Json& raw(const char* key) const { return j_.at(key); }
  std::string name(const char* key) const { return path_ + key; }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    return number(key);
  }
  double number(const char* key) const {
    if (!has(key)) throw ConfigError("missing key '" + name(key) + "'");
    const Json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError("'" + name(key) + "' must be a number");
    return v.get<double>();
  }
  std::optional<double> maybe(const char* key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }
  long integer(const char* key, long fallback) const {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError("'" + name(key) + "' must be an integer");
    return v.get<long>();
  }
  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError("'" + name(key) + "' must be a string");
    return v.get<std::string>();
  }
  bool flag(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError("'" + name(key) + "' must be true or false");
    return v.get<bool>();
  }
  std::vector<double> numbers(const char* key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    const Json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError("'" + name(key) + "' must be a list of numbers");
    for (const Json& x : v) {
      if (!x.is_number()) throw ConfigError("'" + name(key) + "' must be a list of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  std::vector<int> integers(const char* key) const {
    std::vector<int> out;
    if (!has(key)) return out;
    const Json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError("'" + name(key) + "' must be a list of integers");
    for (const Json& x : v) {
      if (!x.is_number_integer()) throw ConfigError("'" + name(key) + "' must be a list of integers");
      out.push_back(x.get<int>());
    }
    return out;
  }

 private:
  std::string where() const { return path_.empty() ? "config " : "'" + path_.substr(0, path_.size() - 1) + "' "; }
  const Json& j_;
  std::string path_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

ModelConfig parse_model(const Node& n) {
  n.allow({"family", "geometry", "n", "lx", "ly", "V", "max_distance", "alpha", "delta"});
  ModelConfig m;
  m.family = n.text("family", "xy");
  require(m.family == "xy" || m.family == "hofstadter" || m.family == "ising",
          "model.family must be xy, hofstadter or ising");
  m.geometry = parse_geometry_kind(n.text("geometry", m.family == "hofstadter" ? "torus" : "chain"));
  m.geometry_params.n = static_cast<int>(n.integer("n", 0));
  m.geometry_params.lx = static_cast<int>(n.integer("lx", 0));
  m.geometry_params.ly = static_cast<int>(n.integer("ly", 0));
  m.V = n.number("V");
  require(std::isfinite(m.V) && m.V != 0.0, "model.V must be finite and nonzero");
  m.max_distance = n.number("max_distance", std::numeric_limits<double>::infinity());
  require(m.max_distance > 0.0, "model.max_distance must be positive");
  m.alpha = n.number("alpha", 0.0);
  m.delta = n.number("delta", 0.0);
  if (m.family == "hofstadter") require(m.geometry == GeometryKind::torus, "hofstadter model needs the torus geometry");
  return m;
}

AuxLevels parse_levels(const std::string& s) {
  if (s == "full") return AuxLevels::full;
  if (s == "reduced") return AuxLevels::reduced;
  if (s == "effective") return AuxLevels::effective;
  throw ConfigError("auxiliaries.levels must be full, reduced or effective");
}

void check_aux(const AuxConfig& a, const std::string& where) {
  require(std::isfinite(a.J) && a.J >= 0.0, where + "J must be >= 0");
  require(std::isfinite(a.omega) && a.omega >= 0.0, where + "omega must be >= 0");
  if (a.gamma) require(std::isfinite(*a.gamma) && *a.gamma > 0.0, where + "gamma must be > 0");
  if (a.Gamma) require(std::isfinite(*a.Gamma) && *a.Gamma > 0.0, where + "Gamma must be > 0");
  if (a.omega_i) require(std::isfinite(*a.omega_i) && *a.omega_i > 0.0, where + "omega_i must be > 0");
  switch (a.levels) {
    case AuxLevels::reduced:
      require(a.gamma || (a.Gamma && a.omega_i), where + "reduced levels need gamma (or Gamma and omega_i)");
      break;
    case AuxLevels::full:
    case AuxLevels::effective:
      require(a.Gamma && a.omega_i, where + "full and effective levels need Gamma and omega_i");
      break;
  }
}

AuxConfig parse_aux(const Node& n, AuxConfig a, bool partial) {
  n.allow({"levels", "frame", "amplitude", "J", "omega", "gamma", "Gamma", "omega_i", "attach"});
  if (n.has("levels")) a.levels = parse_levels(n.text("levels", ""));
  if (n.has("frame")) {
    const std::string f = n.text("frame", "");
    require(f == "lab" || f == "rotating", "auxiliaries.frame must be lab or rotating");
    a.frame = f == "lab" ? Frame::lab : Frame::rotating;
  }
  if (n.has("amplitude")) {
    const std::string f = n.text("amplitude", "");
    require(f == "resolved" || f == "resonant", "auxiliaries.amplitude must be resolved or resonant");
    a.amplitude = f == "resolved" ? EffectiveAmplitude::resolved : EffectiveAmplitude::resonant;
  }
  if (!partial) require(n.has("J") && n.has("omega"), "auxiliaries needs J and omega");
  a.J = n.number("J", a.J);
  a.omega = n.number("omega", a.omega);
  if (n.has("gamma")) a.gamma = n.number("gamma");
  if (n.has("Gamma")) a.Gamma = n.number("Gamma");
  if (n.has("omega_i")) a.omega_i = n.number("omega_i");
  if (n.has("attach")) a.attach = n.numbers("attach");
  return a;
}

ExplicitAux parse_explicit(const Node& n) {
  n.allow({"role", "kind", "value", "lo", "hi", "period", "times", "values", "attach"});
  ExplicitAux e;
  e.schedule.role = parse_role(n.text("role", ""));
  const std::string kind = n.text("kind", "constant");
  if (kind == "constant") {
    e.schedule.schedule = DetuningSchedule::constant(n.number("value"));
  } else if (kind == "sawtooth") {
    e.schedule.schedule = DetuningSchedule::sawtooth(n.number("lo"), n.number("hi"), n.number("period"));
  } else if (kind == "piecewise") {
    e.schedule.schedule = DetuningSchedule::piecewise(n.numbers("times"), n.numbers("values"));
  } else {
    throw ConfigError("schedule kind must be constant, sawtooth or piecewise");
  }
  if (n.has("attach")) e.attach = n.numbers("attach");
  return e;
}

ProtocolConfig parse_protocol(const Node& n) {
  n.allow({"kind", "omega_c", "omega_minus", "omega_plus", "mode", "n_aux", "raster_period", "pad", "band",
           "auxiliaries"});
  ProtocolConfig p;
  p.kind = n.text("kind", "ground");
  require(p.kind == "ground" || p.kind == "highest" || p.kind == "window" || p.kind == "explicit",
          "protocol.kind must be ground, highest, window or explicit");
  p.omega_c = n.maybe("omega_c");
  if (p.kind == "window") {
    p.omega_minus = n.number("omega_minus");
    p.omega_plus = n.number("omega_plus");
    require(p.omega_minus < p.omega_plus, "protocol.omega_minus must be below protocol.omega_plus");
  }
  p.options.mode = parse_protocol_mode(n.text("mode", "raster"));
  p.options.n_aux = static_cast<int>(n.integer("n_aux", 1));
  require(p.options.n_aux >= 1, "protocol.n_aux must be >= 1");
  p.options.raster_period = n.number("raster_period", 0.0);
  require(p.options.raster_period >= 0.0, "protocol.raster_period must be >= 0");
  p.pad = n.number("pad", 0.05);
  require(p.pad >= 0.0, "protocol.pad must be >= 0");
  if (n.has("band")) {
    const std::vector<double> b = n.numbers("band");
    require(b.size() == 2 && b[0] < b[1], "protocol.band must be [lo, hi] with lo < hi");
    p.band = Band{b[0], b[1]};
  }
  if (n.has("auxiliaries")) {
    const Json& list = n.raw("auxiliaries");
    require(list.is_array(), "protocol.auxiliaries must be a list");
    for (size_t k = 0; k < list.size(); ++k) {
      p.explicit_aux.push_back(parse_explicit(Node(list[k], "protocol.auxiliaries[" + std::to_string(k) + "].")));
    }
  }
  if (p.kind == "explicit") require(!p.explicit_aux.empty(), "explicit protocol needs protocol.auxiliaries");
  else require(p.explicit_aux.empty(), "protocol.auxiliaries is only used by the explicit protocol");
  return p;
}

TargetConfig parse_target(const Node& n) {
  n.allow({"kind", "filling", "index", "lo", "hi"});
  TargetConfig t;
  t.kind = n.text("kind", "none");
  if (t.kind == "filling") {
    t.filling = static_cast<int>(n.integer("filling", -1));
    require(t.filling >= 0, "target.filling must be >= 0");
  } else if (t.kind == "eigenstate") {
    t.eigenstate = n.integer("index", -1);
    require(t.eigenstate >= 0, "target.index must be >= 0");
  } else if (t.kind == "window") {
    t.lo = n.number("lo");
    t.hi = n.number("hi");
    require(t.lo < t.hi, "target.lo must be below target.hi");
  } else {
    require(t.kind == "none", "target.kind must be none, filling, eigenstate or window");
  }
  return t;
}

InitialConfig parse_initial(const Node& n) {
  n.allow({"kind", "sites", "index"});
  InitialConfig i;
  i.kind = n.text("kind", "vacuum");
  require(i.kind == "vacuum" || i.kind == "occupied" || i.kind == "eigenstate",
          "initial.kind must be vacuum, occupied or eigenstate");
  i.sites = n.integers("sites");
  i.eigenstate = n.integer("index", 0);
  return i;
}

SolverConfig parse_solver(const Node& n) {
  n.allow({"method", "t_max", "grid", "n_traj", "rtol", "atol", "h_max", "secular_cutoff", "reduce", "max_filling",
           "check_positivity"});
  SolverConfig s;
  s.method = n.text("method", "trajectories");
  require(s.method == "dense" || s.method == "trajectories" || s.method == "steady",
          "solver.method must be dense, trajectories or steady");
  if (s.method != "steady") {
    s.t_max = n.number("t_max");
    require(std::isfinite(s.t_max) && s.t_max > 0.0, "solver.t_max must be positive");
  } else {
    s.t_max = n.number("t_max", 0.0);
  }
  s.grid = static_cast<int>(n.integer("grid", 101));
  require(s.grid >= 2, "solver.grid must be >= 2");
  s.n_traj = static_cast<int>(n.integer("n_traj", 500));
  require(s.n_traj >= 1, "solver.n_traj must be >= 1");
  s.ode.rtol = n.number("rtol", s.ode.rtol);
  s.ode.atol = n.number("atol", s.ode.rtol * 1e-2);
  s.ode.h_max = n.number("h_max", s.ode.h_max);
  require(s.ode.rtol > 0.0 && s.ode.atol > 0.0 && s.ode.h_max > 0.0, "solver tolerances must be positive");
  s.secular_cutoff = n.number("secular_cutoff", s.secular_cutoff);
  require(s.secular_cutoff > 0.0, "solver.secular_cutoff must be positive");
  s.reduce = n.flag("reduce", true);
  s.max_filling = static_cast<int>(n.integer("max_filling", -1));
  s.check_positivity = n.flag("check_positivity", true);
  return s;
}

const char* const kObservables[] = {"number", "energy", "energy_std", "fidelity", "eigenstates", "aux_populations"};

OptimizeConfig parse_optimize(const Node& n) {
  n.allow({"parameters", "budget", "initial_design", "batch", "time_penalty", "threshold"});
  OptimizeConfig o;
  o.enabled = true;
  require(n.has("parameters"), "optimize.parameters is required");
  const Json& list = n.raw("parameters");
  require(list.is_array() && !list.empty(), "optimize.parameters must be a non-empty list");
  for (size_t k = 0; k < list.size(); ++k) {
    Node p(list[k], "optimize.parameters[" + std::to_string(k) + "].");
    p.allow({"name", "lo", "hi"});
    ParameterBound b{p.text("name", ""), p.number("lo", 0.0), p.number("hi", 0.1)};
    require(b.name == "J" || b.name == "omega" || b.name == "gamma" || b.name == "Gamma" || b.name == "omega_i",
            "optimize parameter names are J, omega, gamma, Gamma, omega_i");
    require(std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo >= 0.0 && b.lo < b.hi,
            "optimize bounds must satisfy 0 <= lo < hi");
    o.parameters.push_back(b);
  }
  o.budget = static_cast<int>(n.integer("budget", 100));
  o.initial_design = static_cast<int>(n.integer("initial_design", 10));
  require(o.initial_design >= 1 && o.budget >= o.initial_design, "optimize needs budget >= initial_design >= 1");
  o.batch = static_cast<int>(n.integer("batch", 1));
  require(o.batch >= 1, "optimize.batch must be >= 1");
  o.time_penalty = n.number("time_penalty", 0.0);
  o.threshold = n.number("threshold", 0.9);
  return o;
}

void set_parameter(AuxConfig& a, const std::string& name, double v) {
  if (name == "J") a.J = v;
  else if (name == "omega") a.omega = v;
  else if (name == "gamma") a.gamma = v;
  else if (name == "Gamma") a.Gamma = v;
  else if (name == "omega_i") a.omega_i = v;
  else throw ConfigError("unknown auxiliary parameter '" + name + "'");
}

std::vector<double> split_numbers(const std::string& line, size_t expect, const char* what) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad number '") + cell + "' in " + what);
    }
  }
  if (out.size() != expect) throw ConfigError(std::string("wrong column count in ") + what);
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Node root(j, "");
  root.allow({"name", "units", "seed", "output", "model", "auxiliaries", "protocol", "target", "initial", "solver",
              "observables", "sweep", "optimize"});
  ExperimentConfig c;
  c.name = root.text("name", "experiment");
  c.units = root.text("units", "J");
  require(c.units == "J" || c.units == "V", "units must be J or V");
  const long seed = root.integer("seed", 0);
  require(seed >= 0, "seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.output = root.text("output", "");
  require(root.has("model"), "missing block 'model'");
  c.model = parse_model(root.child("model"));
  require(root.has("auxiliaries"), "missing block 'auxiliaries'");
  c.aux = parse_aux(root.child("auxiliaries"), AuxConfig{}, false);
  check_aux(c.aux, "auxiliaries.");
  if (root.has("protocol")) c.protocol = parse_protocol(root.child("protocol"));
  if (root.has("target")) c.target = parse_target(root.child("target"));
  if (root.has("initial")) c.initial = parse_initial(root.child("initial"));
  require(root.has("solver"), "missing block 'solver'");
  c.solver = parse_solver(root.child("solver"));
  if (root.has("observables")) {
    const Json& list = root.raw("observables");
    require(list.is_array(), "observables must be a list of names");
    for (const Json& o : list) {
      require(o.is_string(), "observables must be a list of names");
      const std::string name = o.get<std::string>();
      require(std::find(std::begin(kObservables), std::end(kObservables), name) != std::end(kObservables),
              "unknown observable '" + name + "'");
      c.observables.push_back(name);
    }
  } else {
    c.observables = {"number", "energy", "energy_std"};
    if (c.target.kind != "none") c.observables.push_back("fidelity");
  }
  const bool wants_fidelity = std::find(c.observables.begin(), c.observables.end(), "fidelity") != c.observables.end();
  require(!wants_fidelity || c.target.kind != "none", "observable 'fidelity' needs a target block");
  if (root.has("sweep")) {
    const Json& list = root.raw("sweep");
    require(list.is_array() && !list.empty(), "sweep must be a non-empty list");
    for (size_t k = 0; k < list.size(); ++k) {
      const std::string where = "sweep[" + std::to_string(k) + "].";
      c.sweep.push_back(parse_aux(Node(list[k], where), c.aux, true));
      check_aux(c.sweep.back(), where);
    }
  }
  if (root.has("optimize")) {
    c.optimize = parse_optimize(root.child("optimize"));
    require(c.target.kind != "none", "optimize needs a target block");
    require(c.sweep.empty(), "optimize and sweep cannot be combined");
  }

  // Every physical quantity is expressed in the declared unit.
  if (c.units == "J") require(c.aux.J == 1.0, "units 'J' require auxiliaries.J = 1");
  if (c.units == "V") require(std::abs(c.model.V) == 1.0, "units 'V' require |model.V| = 1");

  c.canonical = j.dump();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string blob = "blob " + std::to_string(config.canonical.size()) + '\0' + config.canonical;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  char hex[2 * SHA_DIGEST_LENGTH + 1];
  for (int i = 0; i < SHA_DIGEST_LENGTH; ++i) std::snprintf(hex + 2 * i, 3, "%02x", digest[i]);
  return std::string(hex, 2 * SHA_DIGEST_LENGTH);
}

HermitianOperator build_hamiltonian(const ModelConfig& model) {
  if (model.family == "hofstadter") {
    return build_hofstadter_hardcore(model.geometry_params.lx, model.geometry_params.ly, model.alpha, model.V);
  }
  const Geometry geom = build_geometry(model.geometry, model.geometry_params);
  const CouplingMatrix c = dipolar_couplings(geom, model.V, model.max_distance);
  if (model.family == "ising") return build_ising_longitudinal(c, model.delta);
  return build_xy(c);
}

EigenDecomposition compute_spectrum(const ExperimentConfig& config) {
  const HermitianOperator h = build_hamiltonian(config.model);
  const HermitianOperator n = number_operator(h.num_sites);
  return diagonalize(h, &n);
}

SpectrumTable read_spectrum_table(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "n,index,lambda") {
    throw ConfigError("spectrum CSV must start with header 'n,index,lambda'");
  }
  SpectrumTable t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<double> v = split_numbers(line, 3, "spectrum CSV");
    t.n.push_back(static_cast<int>(v[0]));
    t.lambda.push_back(v[2]);
  }
  if (t.n.empty()) throw ConfigError("spectrum CSV has no rows");
  return t;
}

EigenDecomposition spectrum_from_table(const SpectrumTable& table) {
  std::map<int, std::vector<double>> by_n;
  for (size_t k = 0; k < table.n.size(); ++k) by_n[table.n[k]].push_back(table.lambda[k]);
  EigenDecomposition eig;
  eig.dimension = static_cast<Index>(table.n.size());
  eig.eigenvalues.resize(eig.dimension);
  Index offset = 0;
  for (auto& [n, values] : by_n) {
    std::sort(values.begin(), values.end());
    Sector s;
    s.n = n;
    s.offset = offset;
    s.values = Eigen::Map<const RealVector>(values.data(), static_cast<Index>(values.size()));
    for (double v : values) {
      eig.eigenvalues(offset++) = v;
      eig.filling.push_back(n);
      eig.sector_index.push_back(static_cast<Index>(eig.sectors.size()));
    }
    eig.sectors.push_back(std::move(s));
  }
  eig.num_sites = by_n.empty() ? 0 : by_n.rbegin()->first;
  return eig;
}

Band transition_band(const SpectrumTable& table) {
  const EigenDecomposition eig = spectrum_from_table(table);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (size_t k = 0; k + 1 < eig.sectors.size(); ++k) {
    const Sector& a = eig.sectors[k];
    const Sector& b = eig.sectors[k + 1];
    if (b.n != a.n + 1) continue;
    lo = std::min(lo, b.values.minCoeff() - a.values.maxCoeff());
    hi = std::max(hi, b.values.maxCoeff() - a.values.minCoeff());
  }
  if (!(lo < hi)) throw ConfigError("spectrum has no adjacent filling sectors");
  return {lo, hi};
}

double auto_omega_c(const EigenDecomposition& values, const Band& band, int n, bool highest) {
  if (highest) {
    // argmax (lambda - n w) = argmin (-lambda - n (-w))
    SpectrumTable neg;
    for (const Sector& s : values.sectors) {
      for (Index k = 0; k < s.values.size(); ++k) {
        neg.n.push_back(s.n);
        neg.lambda.push_back(-s.values(k));
      }
    }
    return -auto_omega_c(spectrum_from_table(neg), Band{-band.hi, -band.lo}, n, false);
  }
  if (values.sectors.empty()) throw ConfigError("empty spectrum");
  // Filling selected on [edges[k], edges[k+1]); the lowest filling wins as omega_c -> -inf.
  const std::vector<std::pair<double, int>> points = filling_switch_points(values);
  std::vector<int> fill{values.sectors.front().n};
  std::vector<double> edges{band.lo};
  for (const auto& [w, m] : points) {
    fill.push_back(m);
    edges.push_back(w);
  }
  edges.push_back(band.hi);
  const auto at = std::find(fill.begin(), fill.end(), n);
  if (at == fill.end()) throw ConfigError("filling " + std::to_string(n) + " is never selected; set protocol.omega_c");
  const size_t k = static_cast<size_t>(at - fill.begin());
  const double lo = k == 0 ? band.lo : edges[k];
  const double hi = k + 1 == fill.size() ? band.hi : edges[k + 1];
  if (!(lo < hi)) throw ConfigError("filling " + std::to_string(n) + " interval lies outside the band");
  return 0.5 * (lo + hi);
}

Protocol compute_protocol(const ExperimentConfig& config, const SpectrumTable& table, double duration) {
  const ProtocolConfig& pc = config.protocol;
  if (pc.kind == "explicit") {
    Protocol p;
    for (const ExplicitAux& e : pc.explicit_aux) p.aux.push_back(e.schedule);
    return p;
  }
  const Band band = pc.band ? *pc.band : padded(transition_band(table), pc.pad);
  if (pc.kind == "window") {
    return excited_window_protocol(pc.omega_minus, pc.omega_plus, band, duration, pc.options);
  }
  double wc = 0.0;
  if (pc.omega_c) {
    wc = *pc.omega_c;
  } else {
    if (config.target.kind != "filling") throw ConfigError("protocol.omega_c is required unless target is a filling");
    wc = auto_omega_c(spectrum_from_table(table), band, config.target.filling, pc.kind == "highest");
  }
  if (pc.kind == "highest") return highest_state_protocol(band, wc, duration, pc.options);
  return ground_state_protocol(band, wc, duration, pc.options);
}

std::vector<double> time_grid(const SolverConfig& solver) {
  std::vector<double> t(static_cast<size_t>(solver.grid));
  for (int k = 0; k < solver.grid; ++k) t[static_cast<size_t>(k)] = solver.t_max * k / (solver.grid - 1);
  return t;
}

DenseMatrix eigenstate_coordinates(const EigenDecomposition& eig, const SystemModel& system,
                                   const std::vector<Index>& states) {
  DenseMatrix out(system.size(), static_cast<Index>(states.size()));
  if (system.basis.size() == 0) {
    for (size_t c = 0; c < states.size(); ++c) out.col(static_cast<Index>(c)) = eig.state(states[c]);
    return out;
  }
  out.setZero();
  // Eigenvectors have definite filling, so only the sector's own rows contribute.
  for (size_t c = 0; c < states.size(); ++c) {
    const Sector& sec = eig.sectors.at(static_cast<size_t>(eig.sector_index.at(static_cast<size_t>(states[c]))));
    const StateVector v = sec.vectors.col(states[c] - sec.offset);
    for (size_t b = 0; b < sec.basis.size(); ++b) {
      out.col(static_cast<Index>(c)) += v(static_cast<Index>(b)) * system.basis.row(sec.basis[b]).adjoint();
    }
  }
  return out;
}

PreparedProblem prepare_problem(const ExperimentConfig& config, const AuxConfig& aux,
                                const std::vector<AuxSchedule>& schedules) {
  PreparedProblem pp;
  const HermitianOperator h = build_hamiltonian(config.model);
  const int num_sites = h.num_sites;
  const HermitianOperator nop = number_operator(num_sites);
  pp.eig = diagonalize(h, &nop);
  const EigenDecomposition& eig = pp.eig;

  StateVector psi_sys;
  if (config.initial.kind == "eigenstate") {
    if (config.initial.eigenstate >= eig.size()) throw ConfigError("initial.index is out of range");
    psi_sys = eig.state(config.initial.eigenstate);
  } else {
    for (int s : config.initial.sites) {
      if (s < 0 || s >= num_sites) throw ConfigError("initial.sites entry out of range");
    }
    psi_sys = occupation_state(num_sites, config.initial.kind == "occupied" ? config.initial.sites : std::vector<int>{});
  }

  if (schedules.empty()) throw ConfigError("protocol has no auxiliaries");
  const bool explicit_protocol = config.protocol.kind == "explicit";
  if (explicit_protocol && schedules.size() != config.protocol.explicit_aux.size()) {
    throw ConfigError("schedule table does not match protocol.auxiliaries");
  }
  std::vector<AuxiliarySpec> specs;
  for (size_t k = 0; k < schedules.size(); ++k) {
    AuxiliarySpec s;
    s.role = schedules[k].role;
    s.J = aux.J;
    s.omega_drive = aux.omega;
    s.gamma = aux.gamma;
    s.Gamma = aux.Gamma;
    s.omega_i = aux.omega_i;
    if (aux.levels == AuxLevels::reduced && !s.gamma) s.gamma = induced_decay_rate(*aux.omega_i, *aux.Gamma);
    s.detuning = schedules[k].schedule;
    s.attach = aux.attach;
    if (explicit_protocol && config.protocol.explicit_aux[k].attach) s.attach = *config.protocol.explicit_aux[k].attach;
    if (!s.attach.empty() && static_cast<int>(s.attach.size()) != num_sites) {
      throw ConfigError("attach weights need one entry per site");
    }
    specs.push_back(std::move(s));
  }

  if (config.solver.reduce) {
    std::vector<SparseMatrix> ops;
    std::vector<std::vector<double>> seen;
    for (const AuxiliarySpec& s : specs) {
      if (std::find(seen.begin(), seen.end(), s.attach) != seen.end()) continue;
      seen.push_back(s.attach);
      ops.push_back(raising_operator(num_sites, s.attach));
    }
    pp.subspace = invariant_subspace(eig, ops, {psi_sys}, config.solver.max_filling);
    pp.system = eigen_system(num_sites, pp.subspace);
    if (config.solver.max_filling >= 0) pp.warnings.push_back("filling truncation makes the dynamics approximate");
  } else if (aux.levels == AuxLevels::effective) {
    pp.subspace = full_subspace(eig);
    pp.system = eigen_system(num_sites, pp.subspace);
  } else {
    pp.system = computational_system(h);
  }

  switch (aux.levels) {
    case AuxLevels::full:
      pp.problem = build_full_model(pp.system, specs, aux.frame);
      break;
    case AuxLevels::reduced:
      pp.problem = build_reduced_model(pp.system, specs, aux.frame);
      break;
    case AuxLevels::effective: {
      EffectiveOptions eo;
      eo.amplitude = aux.amplitude;
      pp.problem = build_effective_model(pp.system, specs, eo);
      break;
    }
  }
  const StateVector start = pp.system.project(psi_sys);
  if (std::abs(start.norm() - 1.0) > 1e-9) throw NumericError("initial state is not inside the dynamics basis");
  pp.psi0 = product_with_ground(pp.problem, start);

  const auto wants = [&](const char* name) {
    return std::find(config.observables.begin(), config.observables.end(), name) != config.observables.end();
  };
  if (wants("number")) pp.observables.push_back(number_observable(pp.system));
  if (wants("energy") || wants("energy_std")) pp.observables.push_back(energy_observable(pp.system));
  if (wants("energy_std")) pp.observables.push_back(energy_squared_observable(pp.system));
  if (wants("fidelity")) {
    std::vector<Index> target;
    const TargetConfig& t = config.target;
    if (t.kind == "filling") {
      target = eig.sector_ground_states(t.filling);
      if (target.empty()) throw ConfigError("target filling has no states");
    } else if (t.kind == "eigenstate") {
      if (t.eigenstate >= eig.size()) throw ConfigError("target.index is out of range");
      target = {t.eigenstate};
    } else {
      for (Index k = 0; k < eig.size(); ++k) {
        if (eig.eigenvalues(k) >= t.lo && eig.eigenvalues(k) <= t.hi) target.push_back(k);
      }
      if (target.empty()) throw ConfigError("target window contains no eigenstates");
    }
    const DenseMatrix cols = eigenstate_coordinates(eig, pp.system, target);
    const double reach = cols.squaredNorm();
    if (reach < static_cast<double>(target.size()) - 1e-9) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "target lies partly outside the dynamics basis (weight %.6g of %zu)", reach,
                    target.size());
      pp.warnings.push_back(buf);
    }
    if (reach < 1e-20) throw ConfigError("target is unreachable from the initial state");
    pp.observables.push_back(projection_observable("fidelity", cols));
  }
  if (wants("eigenstates")) {
    std::vector<Index> all(static_cast<size_t>(eig.size()));
    for (Index k = 0; k < eig.size(); ++k) all[static_cast<size_t>(k)] = k;
    const DenseMatrix cols = eigenstate_coordinates(eig, pp.system, all);
    for (Index k = 0; k < eig.size(); ++k) {
      if (cols.col(k).squaredNorm() < 1e-12) continue;
      pp.observables.push_back(projection_observable("eig" + std::to_string(k), cols.col(k)));
    }
  }
  if (wants("aux_populations")) {
    const char* names = aux.levels == AuxLevels::full ? "gi01" : aux.levels == AuxLevels::reduced ? "g01" : "gr";
    for (int a = 0; a < static_cast<int>(specs.size()); ++a) {
      for (const char* c = names; *c; ++c) pp.observables.push_back(aux_population_observable(pp.problem, a, *c));
    }
  }
  return pp;
}

DynamicsOutput run_dynamics(const ExperimentConfig& config, const AuxConfig& aux,
                            const std::vector<AuxSchedule>& schedules, int workers, const std::string& method) {
  const std::string how = method.empty() ? config.solver.method : method;
  PreparedProblem pp = prepare_problem(config, aux, schedules);
  DynamicsOutput out;
  out.warnings = pp.warnings;
  out.system_dim = pp.problem.system_dim;
  out.composite_dim = pp.problem.dimension;
  const SolverConfig& sc = config.solver;
  if (how == "dense") {
    EvolveOptions eo;
    eo.ode = sc.ode;
    eo.secular_cutoff = sc.secular_cutoff;
    eo.check_positivity = sc.check_positivity;
    EvolveResult r = lindblad_evolve(pp.problem, density_matrix(pp.psi0), time_grid(sc), pp.observables, eo);
    out.series = std::move(r.series);
    out.dense = r.diagnostics;
    if (out.dense.max_trace_error > 1e-8) out.warnings.push_back("trace drift above 1e-8");
    if (sc.check_positivity && out.dense.min_eigenvalue < -1e-8) {
      out.warnings.push_back("density matrix eigenvalue below -1e-8");
    }
  } else if (how == "trajectories") {
    TrajectoryOptions to;
    to.ode = sc.ode;
    to.secular_cutoff = sc.secular_cutoff;
    to.workers = std::max(1, workers);
    TrajectoryResult r = mcwf_run(pp.problem, pp.psi0, time_grid(sc), sc.n_traj, config.seed, pp.observables, to);
    out.series = std::move(r.series);
    out.total_jumps = r.total_jumps;
  } else if (how == "steady") {
    if (!pp.problem.time_independent()) {
      throw ConfigError("steady method needs constant detunings in the lab frame");
    }
    SteadyStateResult r = steady_state(pp.problem);
    out.kernel_dimension = r.kernel_dimension;
    out.steady_residual = r.residual;
    if (r.kernel_dimension > 1) out.warnings.push_back("steady state is not unique");
    const double inf = std::numeric_limits<double>::infinity();
    for (const Observable& o : pp.observables) {
      out.series.push_back({o.name, {inf}, {expect(o, r.rho, pp.problem.system_dim)}, {0.0}, {0.0}});
    }
  } else {
    throw ConfigError("unknown solver method '" + how + "'");
  }

  // energy2 only feeds energy_std.
  const auto it = std::find_if(out.series.begin(), out.series.end(),
                               [](const ObservableSeries& s) { return s.name == "energy2"; });
  if (it != out.series.end()) {
    ObservableSeries spread = energy_spread(find_series(out.series, "energy"), *it);
    if (how == "steady") spread.std = spread.stderr_ = {0.0};
    *it = std::move(spread);
    const bool keep_energy = std::find(config.observables.begin(), config.observables.end(), "energy") !=
                             config.observables.end();
    if (!keep_energy) {
      out.series.erase(std::find_if(out.series.begin(), out.series.end(),
                                    [](const ObservableSeries& s) { return s.name == "energy"; }));
    }
  }
  return out;
}

double fidelity_objective(const ExperimentConfig& config, const std::vector<AuxSchedule>& schedules,
                          const std::vector<double>& x, int workers) {
  if (x.size() != config.optimize.parameters.size()) throw ConfigError("parameter vector has the wrong size");
  AuxConfig aux = config.aux;
  for (size_t k = 0; k < x.size(); ++k) set_parameter(aux, config.optimize.parameters[k].name, x[k]);
  ExperimentConfig c = config;
  if (std::find(c.observables.begin(), c.observables.end(), "fidelity") == c.observables.end()) {
    c.observables.push_back("fidelity");
  }
  const DynamicsOutput out = run_dynamics(c, aux, schedules, workers);
  // near-zero rates leave a degenerate kernel whose chosen member need not be a state
  if (out.kernel_dimension > 1) throw NumericError("steady state is not unique");
  const ObservableSeries& f = find_series(out.series, "fidelity");
  double value = f.mean.back();
  if (!(value >= -1e-6 && value <= 1.0 + 1e-6)) throw NumericError("fidelity outside [0, 1]");
  if (config.optimize.time_penalty != 0.0 && c.solver.method != "steady") {
    double hit = c.solver.t_max;
    for (size_t k = 0; k < f.times.size(); ++k) {
      if (f.mean[k] >= config.optimize.threshold) {
        hit = f.times[k];
        break;
      }
    }
    value -= config.optimize.time_penalty * hit / c.solver.t_max;
  }
  return value;
}

}  // namespace dprep
