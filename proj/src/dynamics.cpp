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

#include "dprep/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SparseLU>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "dprep/interaction_picture.hpp"

namespace dprep {

namespace {

void check_grid(const std::vector<double>& times) {
  if (times.empty()) throw ConfigError("time grid is empty");
  for (size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw ConfigError("time grid must be strictly increasing");
  }
}

std::vector<ObservableSeries> empty_series(const std::vector<Observable>& observables,
                                           const std::vector<double>& times) {
  std::vector<ObservableSeries> out;
  for (const Observable& o : observables) {
    out.push_back({o.name, times, std::vector<double>(times.size(), 0.0), std::vector<double>(times.size(), 0.0),
                   std::vector<double>(times.size(), 0.0)});
  }
  return out;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

SparseMatrix sparse_kron(const SparseMatrix& a, const SparseMatrix& b) {
  Triplets trips;
  trips.reserve(static_cast<size_t>(a.nonZeros() * b.nonZeros()));
  for (Index i = 0; i < a.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator ia(a, i); ia; ++ia) {
      for (Index j = 0; j < b.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator ib(b, j); ib; ++ib) {
          trips.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(), ia.value() * ib.value());
        }
      }
    }
  }
  SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

DenseMatrix density_matrix(const StateVector& psi) { return psi * psi.adjoint(); }

StateVector product_with_ground(const LindbladProblem& problem, const StateVector& psi_sys) {
  if (psi_sys.size() != problem.system_dim) throw ConfigError("initial state has the wrong system dimension");
  StateVector psi = StateVector::Zero(problem.dimension);
  psi.head(problem.system_dim) = psi_sys;  // every auxiliary in level g = 0
  return psi;
}

EvolveResult lindblad_evolve(const LindbladProblem& problem, const DenseMatrix& rho0, const std::vector<double>& times,
                             const std::vector<Observable>& observables, const EvolveOptions& options) {
  check_grid(times);
  const Index dim = problem.dimension;
  if (rho0.rows() != dim || rho0.cols() != dim) throw ConfigError("initial density matrix has the wrong dimension");
  if (std::abs(rho0.trace() - 1.0) > 1e-8) throw ConfigError("initial density matrix must have unit trace");

  InteractionPicture ip(problem, options.secular_cutoff);
  DenseMatrix product(dim, dim);
  auto rhs = [&](double t, const DenseMatrix& s, DenseMatrix& ds) {
    product.noalias() = ip.generator(t) * s;
    ds = Complex(0.0, -1.0) * product + Complex(0.0, 1.0) * product.adjoint();
    for (size_t k = 0; k < ip.num_jumps(); ++k) {
      const SparseMatrix& l = ip.jump(k, t);
      product.noalias() = l * s;
      ds.noalias() += product * l.adjoint();
    }
  };

  EvolveResult result;
  result.times = times;
  result.series = empty_series(observables, times);
  EvolveDiagnostics& diag = result.diagnostics;
  diag.min_eigenvalue = std::numeric_limits<double>::infinity();

  DenseMatrix sigma, rho(dim, dim), sample(dim, dim);
  ip.from_lab(times.front(), DenseMatrix(0.5 * (rho0 + rho0.adjoint())), sigma);

  auto record = [&](size_t k, const DenseMatrix& s) {
    sample = 0.5 * (s + s.adjoint());
    diag.max_trace_error = std::max(diag.max_trace_error, std::abs(sample.trace() - 1.0));
    diag.max_hermiticity_error = std::max(diag.max_hermiticity_error, (s - s.adjoint()).cwiseAbs().maxCoeff());
    if (options.check_positivity) {
      Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sample, Eigen::EigenvaluesOnly);
      diag.min_eigenvalue = std::min(diag.min_eigenvalue, es.eigenvalues()(0));
    }
    ip.to_lab(times[k], sample, rho);
    for (size_t o = 0; o < observables.size(); ++o) {
      result.series[o].mean[k] = expect(observables[o], rho, problem.system_dim);
    }
  };

  record(0, sigma);
  if (times.size() > 1) {
    Dopri5<DenseMatrix, decltype(rhs)> ode(rhs, options.ode);
    ode.reset(times.front(), sigma);
    size_t k = 1;
    DenseMatrix dense(dim, dim);
    while (k < times.size()) {
      ode.step(times.back());
      while (k < times.size() && times[k] <= ode.time()) {
        ode.dense(times[k], dense);
        record(k, dense);
        ++k;
      }
    }
    diag.steps = ode.steps();
    diag.rejected = ode.rejected();
    sigma = ode.state();
  }
  if (!options.check_positivity) diag.min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
  ip.to_lab(times.back(), DenseMatrix(0.5 * (sigma + sigma.adjoint())), result.final_state);
  return result;
}

namespace {

struct TrajectoryOutput {
  std::vector<double> values;  // [k * n_obs + o]
  std::vector<JumpRecord> jumps;
  long steps = 0;
};

class TrajectoryRunner {
 public:
  TrajectoryRunner(const InteractionPicture& ip, const LindbladProblem& problem, const StateVector& psi0,
                   const std::vector<double>& times, const std::vector<Observable>& observables,
                   const TrajectoryOptions& options)
      : ip_(ip), problem_(problem), psi0_(psi0), times_(times), observables_(observables), options_(options) {}

  TrajectoryOutput run(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    TrajectoryOutput out;
    out.values.assign(times_.size() * observables_.size(), 0.0);
    const Index dim = ip_.dimension();
    auto rhs = [this](double t, const StateVector& y, StateVector& dy) {
      dy.noalias() = ip_.generator(t) * y;
      dy *= Complex(0.0, -1.0);
    };
    StateVector phi, dense(dim), jumped(dim);
    ip_.from_lab(times_.front(), psi0_, phi);
    record(out, 0, phi);
    double r = uniform01(rng);
    Dopri5<StateVector, decltype(rhs)> ode(rhs, options_.ode);
    ode.reset(times_.front(), phi);
    size_t k = 1;
    const double t_end = times_.back();
    while (k < times_.size()) {
      ode.step(t_end);
      const double t1 = ode.time();
      if (ode.state().squaredNorm() > r) {
        for (; k < times_.size() && times_[k] <= t1; ++k) {
          ode.dense(times_[k], dense);
          record(out, k, dense);
        }
        continue;
      }
      // bisection for the time where the squared norm crosses r
      double lo = ode.previous_time(), hi = t1;
      while (hi - lo > options_.jump_time_tol) {
        const double mid = 0.5 * (lo + hi);
        ode.dense(mid, dense);
        if (dense.squaredNorm() > r) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      const double tj = hi;
      for (; k < times_.size() && times_[k] <= tj; ++k) {
        ode.dense(times_[k], dense);
        record(out, k, dense);
      }
      ode.dense(tj, dense);
      // channel weights ||L_k phi||^2
      double total = 0.0;
      std::vector<double> weights(ip_.num_jumps());
      for (size_t c = 0; c < weights.size(); ++c) {
        weights[c] = (ip_.jump(c, tj) * dense).squaredNorm();
        total += weights[c];
      }
      if (!(total > 0.0)) throw NumericError("quantum jump with vanishing rate");
      double u = uniform01(rng) * total;
      size_t chosen = weights.size() - 1;
      for (size_t c = 0; c < weights.size(); ++c) {
        if (u < weights[c]) {
          chosen = c;
          break;
        }
        u -= weights[c];
      }
      jumped.noalias() = ip_.jump(chosen, tj) * dense;
      const double norm = jumped.norm();
      if (!(norm > 0.0)) throw NumericError("zero-norm state after jump");
      jumped /= norm;
      out.jumps.push_back({tj, static_cast<int>(chosen)});
      r = uniform01(rng);
      ode.reset(tj, jumped);
    }
    out.steps = ode.steps();
    return out;
  }

 private:
  void record(TrajectoryOutput& out, size_t k, const StateVector& phi) {
    const double n2 = phi.squaredNorm();
    if (!(n2 > 0.0)) throw NumericError("zero-norm trajectory state");
    ip_.to_lab(times_[k], phi, lab_);
    lab_ /= std::sqrt(n2);
    for (size_t o = 0; o < observables_.size(); ++o) {
      out.values[k * observables_.size() + o] = expect(observables_[o], lab_, problem_.system_dim);
    }
  }

  InteractionPicture ip_;
  const LindbladProblem& problem_;
  const StateVector& psi0_;
  const std::vector<double>& times_;
  const std::vector<Observable>& observables_;
  const TrajectoryOptions& options_;
  StateVector lab_;
};

}  // namespace

TrajectoryResult mcwf_run(const LindbladProblem& problem, const StateVector& psi0, const std::vector<double>& times,
                          int num_trajectories, std::uint64_t seed, const std::vector<Observable>& observables,
                          const TrajectoryOptions& options) {
  check_grid(times);
  if (num_trajectories < 1) throw ConfigError("need at least one trajectory");
  if (psi0.size() != problem.dimension) throw ConfigError("initial state has the wrong dimension");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ConfigError("initial state must be normalized");

  const InteractionPicture ip(problem, options.secular_cutoff);
  const size_t n_traj = static_cast<size_t>(num_trajectories);
  std::vector<TrajectoryOutput> outputs(n_traj);
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    TrajectoryRunner runner(ip, problem, psi0, times, observables, options);
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= n_traj) return;
      try {
        outputs[i] = runner.run(stream_seed(seed, i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_traj;
        return;
      }
    }
  };
  const int workers = std::max(1, std::min(options.workers, num_trajectories));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  // reduce in trajectory order so the result is independent of scheduling
  TrajectoryResult result;
  result.num_trajectories = num_trajectories;
  result.seed = seed;
  result.times = times;
  result.series = empty_series(observables, times);
  const size_t n_obs = observables.size();
  result.samples.assign(n_obs, std::vector<std::vector<double>>(times.size(), std::vector<double>(n_traj)));
  for (size_t i = 0; i < n_traj; ++i) {
    for (size_t k = 0; k < times.size(); ++k) {
      for (size_t o = 0; o < n_obs; ++o) result.samples[o][k][i] = outputs[i].values[k * n_obs + o];
    }
    result.total_jumps += static_cast<long>(outputs[i].jumps.size());
    result.steps += outputs[i].steps;
  }
  if (options.record_jumps) {
    for (size_t i = 0; i < n_traj; ++i) result.jumps.push_back(std::move(outputs[i].jumps));
  }
  const double n = static_cast<double>(n_traj);
  for (size_t o = 0; o < n_obs; ++o) {
    for (size_t k = 0; k < times.size(); ++k) {
      const std::vector<double>& x = result.samples[o][k];
      double sum = 0.0;
      for (double v : x) sum += v;
      const double mean = sum / n;
      double ss = 0.0;
      for (double v : x) ss += (v - mean) * (v - mean);
      const double sd = n_traj > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      result.series[o].mean[k] = mean;
      result.series[o].std[k] = sd;
      result.series[o].stderr_[k] = sd / std::sqrt(n);
    }
  }
  return result;
}

SparseMatrix liouvillian(const LindbladProblem& problem) {
  if (!problem.time_independent()) throw ConfigError("the Liouvillian needs time-independent coefficients");
  const Index dim = problem.dimension;
  const SparseMatrix id = sparse_identity(dim);
  const SparseMatrix h = problem.hamiltonian(0.0);
  SparseMatrix decay(dim, dim);
  SparseMatrix sandwich(dim * dim, dim * dim);
  for (size_t k = 0; k < problem.jumps.size(); ++k) {
    const SparseMatrix l = problem.jump(k, 0.0);
    decay += SparseMatrix(l.adjoint() * l);
    sandwich += sparse_kron(SparseMatrix(l.conjugate()), l);
  }
  // vec(A X B) = (B^T (x) A) vec(X)
  const SparseMatrix heff = h - Complex(0.0, 0.5) * decay;
  SparseMatrix out = Complex(0.0, -1.0) * sparse_kron(id, heff);
  out += Complex(0.0, 1.0) * sparse_kron(SparseMatrix(heff.conjugate()), id);
  out += sandwich;
  out.prune(Complex(0.0, 0.0));
  return out;
}

namespace {

DenseMatrix unvec(const StateVector& v, Index dim) {
  DenseMatrix rho = Eigen::Map<const DenseMatrix>(v.data(), dim, dim);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const Complex tr = rho.trace();
  if (std::abs(tr) < 1e-300) throw NumericError("steady state has zero trace");
  return rho / tr;
}

}  // namespace

SteadyStateResult steady_state(const LindbladProblem& problem) {
  const Index dim = problem.dimension;
  const SparseMatrix lv = liouvillian(problem);
  const Index n = lv.rows();
  SteadyStateResult result;
  const double scale = std::max(1.0, max_abs_entry(lv));

  if (n <= 1024) {
    Eigen::FullPivLU<DenseMatrix> lu{DenseMatrix(lv)};
    lu.setThreshold(1e-10);
    const DenseMatrix kernel = lu.kernel();
    result.kernel_dimension = static_cast<int>(kernel.cols());
    if (result.kernel_dimension == 0) throw NumericError("Liouvillian has no null space");
    // prefer the kernel member with the largest trace
    Index best = 0;
    double best_tr = -1.0;
    for (Index c = 0; c < kernel.cols(); ++c) {
      const double tr = std::abs(Eigen::Map<const DenseMatrix>(kernel.col(c).data(), dim, dim).trace());
      if (tr > best_tr) {
        best_tr = tr;
        best = c;
      }
    }
    result.rho = unvec(kernel.col(best), dim);
  } else {
    // trace condition replaces the first row
    Triplets trips;
    for (Index i = 1; i < n; ++i) {
      for (SparseMatrix::InnerIterator it(lv, i); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
    }
    for (Index d = 0; d < dim; ++d) trips.emplace_back(0, d * dim + d, Complex(1.0, 0.0));
    Eigen::SparseMatrix<Complex, Eigen::ColMajor> a(n, n);
    a.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<Complex, Eigen::ColMajor>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw NumericError("steady state is not unique (singular Liouvillian)");
    StateVector b = StateVector::Zero(n);
    b(0) = 1.0;
    const StateVector x = lu.solve(b);
    result.rho = unvec(x, dim);
    // A second kernel direction leaves the bordered matrix near singular;
    // estimate ||A^-1|| from a few random right-hand sides.
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> normal;
    double growth = 0.0;
    for (int k = 0; k < 3; ++k) {
      StateVector r(n);
      for (Index i = 0; i < n; ++i) r(i) = Complex(normal(rng), normal(rng));
      const StateVector y = lu.solve(r);
      growth = std::max(growth, y.cwiseAbs().maxCoeff() / r.cwiseAbs().maxCoeff());
    }
    result.kernel_dimension = !std::isfinite(growth) || growth * scale > 1e10 ? 2 : 1;
  }
  const StateVector vec = Eigen::Map<const StateVector>(result.rho.data(), n);
  result.residual = (lv * vec).cwiseAbs().maxCoeff();
  return result;
}

}  // namespace dprep
