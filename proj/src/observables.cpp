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

#include "dprep/observables.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace dprep {

namespace {

SparseMatrix diagonal_matrix(const RealVector& d) {
  Triplets trips;
  for (Index i = 0; i < d.size(); ++i) {
    if (d(i) != 0.0) trips.emplace_back(i, i, d(i));
  }
  SparseMatrix m(d.size(), d.size());
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

void check_system_dim(Index total, Index m) {
  if (m <= 0 || total % m != 0) throw ConfigError("state dimension is not a multiple of the system dimension");
}

}  // namespace

Observable number_observable(const SystemModel& system) {
  RealVector d(system.size());
  for (Index i = 0; i < system.size(); ++i) d(i) = system.filling[static_cast<size_t>(i)];
  return {"number", Observable::Kind::system_operator, diagonal_matrix(d), {}, {}};
}

Observable energy_observable(const SystemModel& system) {
  return {"energy", Observable::Kind::system_operator, system.h, {}, {}};
}

Observable energy_squared_observable(const SystemModel& system) {
  return {"energy2", Observable::Kind::system_operator, SparseMatrix(system.h * system.h), {}, {}};
}

Observable fidelity_observable(const std::string& name, const DenseMatrix& targets) {
  if (targets.cols() == 0) throw ConfigError("fidelity target is empty");
  // orthonormal basis of the column span
  Eigen::ColPivHouseholderQR<DenseMatrix> piv(targets);
  const Index rank = piv.rank();
  if (rank == 0) throw ConfigError("fidelity target has zero norm");
  DenseMatrix q = piv.householderQ() * DenseMatrix::Identity(targets.rows(), rank);
  return {name, Observable::Kind::fidelity, {}, q, {}};
}

Observable projection_observable(const std::string& name, const DenseMatrix& columns) {
  if (columns.cols() == 0) throw ConfigError("projection target is empty");
  return {name, Observable::Kind::fidelity, {}, columns, {}};
}

Observable aux_population_observable(const LindbladProblem& problem, int aux, char level) {
  const int idx = problem.level_index(aux, level);
  if (idx < 0) throw ConfigError(std::string("auxiliary has no level '") + level + "'");
  return {"aux" + std::to_string(aux) + "_" + level, Observable::Kind::composite_diagonal, {}, {},
          problem.aux_population(aux, idx)};
}

Observable operator_observable(const std::string& name, const SparseMatrix& system_op) {
  if (hermiticity_residual(system_op) > 1e-12 * std::max(1.0, max_abs_entry(system_op))) {
    throw ConfigError("observable '" + name + "' is not Hermitian");
  }
  return {name, Observable::Kind::system_operator, system_op, {}, {}};
}

DenseMatrix reduced_system_state(const StateVector& psi, Index m) {
  check_system_dim(psi.size(), m);
  Eigen::Map<const DenseMatrix> blocks(psi.data(), m, psi.size() / m);
  return blocks * blocks.adjoint();
}

DenseMatrix reduced_system_state(const DenseMatrix& rho, Index m) {
  check_system_dim(rho.rows(), m);
  DenseMatrix out = DenseMatrix::Zero(m, m);
  for (Index a = 0; a < rho.rows() / m; ++a) out += rho.block(a * m, a * m, m, m);
  return out;
}

double expect(const Observable& obs, const StateVector& psi, Index m) {
  check_system_dim(psi.size(), m);
  Eigen::Map<const DenseMatrix> blocks(psi.data(), m, psi.size() / m);
  switch (obs.kind) {
    case Observable::Kind::composite_diagonal:
      return psi.cwiseAbs2().dot(obs.diagonal);
    case Observable::Kind::fidelity:
      return (obs.targets.adjoint() * blocks).squaredNorm();
    case Observable::Kind::system_operator:
      return (blocks.adjoint() * (obs.op * blocks)).trace().real();
  }
  return 0.0;
}

double expect(const Observable& obs, const DenseMatrix& rho, Index m) {
  if (obs.kind == Observable::Kind::composite_diagonal) return (rho.diagonal().real().dot(obs.diagonal));
  return expect_system(obs, reduced_system_state(rho, m));
}

double expect_system(const Observable& obs, const DenseMatrix& rho_sys) {
  switch (obs.kind) {
    case Observable::Kind::composite_diagonal:
      throw ConfigError("auxiliary observable needs the composite state");
    case Observable::Kind::fidelity:
      return (obs.targets.adjoint() * rho_sys * obs.targets).trace().real();
    case Observable::Kind::system_operator:
      return (obs.op * rho_sys).trace().real();
  }
  return 0.0;
}

void write_series_csv(std::ostream& os, const std::vector<ObservableSeries>& series) {
  os << "t,observable,mean,std,stderr\n";
  char buf[256];
  for (const ObservableSeries& s : series) {
    for (size_t k = 0; k < s.times.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%.17g,%.17g\n", s.times[k], s.name.c_str(), s.mean[k], s.std[k],
                    s.stderr_[k]);
      os << buf;
    }
  }
}

std::vector<ObservableSeries> read_series_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "t,observable,mean,std,stderr") {
    throw ConfigError("observable CSV must start with header 't,observable,mean,std,stderr'");
  }
  std::vector<ObservableSeries> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[5];
    for (auto& x : f) {
      if (!std::getline(ss, x, ',')) throw ConfigError("short observable CSV line");
    }
    if (out.empty() || out.back().name != f[1]) out.push_back({f[1], {}, {}, {}, {}});
    ObservableSeries& s = out.back();
    s.times.push_back(std::stod(f[0]));
    s.mean.push_back(std::stod(f[2]));
    s.std.push_back(std::stod(f[3]));
    s.stderr_.push_back(std::stod(f[4]));
  }
  return out;
}

ObservableSeries energy_spread(const ObservableSeries& energy, const ObservableSeries& energy_sq) {
  if (energy.times != energy_sq.times) throw ConfigError("energy series use different grids");
  ObservableSeries s;
  s.name = "energy_std";
  s.times = energy.times;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (size_t k = 0; k < s.times.size(); ++k) {
    s.mean.push_back(std::sqrt(std::max(0.0, energy_sq.mean[k] - energy.mean[k] * energy.mean[k])));
    s.std.push_back(nan);
    s.stderr_.push_back(nan);
  }
  return s;
}

const ObservableSeries& find_series(const std::vector<ObservableSeries>& series, const std::string& name) {
  for (const ObservableSeries& s : series) {
    if (s.name == name) return s;
  }
  throw ConfigError("no observable series named '" + name + "'");
}

}  // namespace dprep
