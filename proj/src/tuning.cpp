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

#include "dprep/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <ostream>
#include <thread>

#include "dprep/types.hpp"

namespace dprep {

double uniform_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<Eigen::VectorXd> latin_hypercube(int n, int dim, std::mt19937_64& rng) {
  std::vector<Eigen::VectorXd> pts(static_cast<size_t>(n), Eigen::VectorXd(dim));
  std::vector<int> perm(static_cast<size_t>(n));
  for (int d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    // Fisher-Yates with our own uniform draws, so the design is portable
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(uniform_double(rng) * (i + 1));
      std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    }
    for (int i = 0; i < n; ++i) {
      const double u = 1.0 - uniform_double(rng);  // (0, 1]
      pts[static_cast<size_t>(i)](d) = (perm[static_cast<size_t>(i)] + u) / n;
    }
  }
  return pts;
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                             double step, int max_iterations, double tol) {
  const Index n = x0.size();
  std::vector<Eigen::VectorXd> s(static_cast<size_t>(n + 1), x0);
  std::vector<double> fs(static_cast<size_t>(n + 1));
  for (Index i = 0; i < n; ++i) s[static_cast<size_t>(i + 1)](i) += step;
  for (size_t i = 0; i < s.size(); ++i) fs[i] = f(s[i]);
  std::vector<size_t> order(s.size());
  int it = 0;
  for (; it < max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return fs[a] < fs[b]; });
    const size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    if (std::abs(fs[worst] - fs[best]) <= tol * (std::abs(fs[best]) + tol)) {
      double size = 0.0;
      for (const auto& p : s) size = std::max(size, (p - s[best]).cwiseAbs().maxCoeff());
      if (size <= 1e-8 * std::max(1.0, s[best].cwiseAbs().maxCoeff())) break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (size_t i = 0; i < s.size(); ++i) {
      if (i != worst) centroid += s[i];
    }
    centroid /= static_cast<double>(n);
    const Eigen::VectorXd xr = centroid + (centroid - s[worst]);
    const double fr = f(xr);
    if (fr < fs[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - s[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        s[worst] = xe;
        fs[worst] = fe;
      } else {
        s[worst] = xr;
        fs[worst] = fr;
      }
      continue;
    }
    if (fr < fs[second]) {
      s[worst] = xr;
      fs[worst] = fr;
      continue;
    }
    const bool outside = fr < fs[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (s[worst] - centroid));
    const double fc = f(xc);
    if (fc < (outside ? fr : fs[worst])) {
      s[worst] = xc;
      fs[worst] = fc;
      continue;
    }
    for (size_t i = 0; i < s.size(); ++i) {
      if (i == best) continue;
      s[i] = s[best] + 0.5 * (s[i] - s[best]);
      fs[i] = f(s[i]);
    }
  }
  size_t best = 0;
  for (size_t i = 1; i < s.size(); ++i) {
    if (fs[i] < fs[best]) best = i;
  }
  return {s[best], fs[best], it};
}

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& lengths, double variance) {
  const double r = ((a - b).array() / lengths.array()).matrix().norm();
  const double s5r = std::sqrt(5.0) * r;
  return variance * (1.0 + s5r + 5.0 * r * r / 3.0) * std::exp(-s5r);
}

double GaussianProcess::factorize() {
  const Index n = static_cast<Index>(x_.size());
  Eigen::MatrixXd k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = matern52(x_[static_cast<size_t>(i)], x_[static_cast<size_t>(j)], lengths_, variance_);
    }
  }
  k.diagonal().array() += noise_ + 1e-10;
  llt_.compute(k);
  if (llt_.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  alpha_ = llt_.solve(y_);
  const double logdet = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
  return -0.5 * y_.dot(alpha_) - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

void GaussianProcess::condition(const std::vector<Eigen::VectorXd>& x, const std::vector<double>& y) {
  if (x.empty() || x.size() != y.size()) throw ConfigError("GP needs matching, non-empty data");
  x_ = x;
  const Index n = static_cast<Index>(y.size());
  Eigen::VectorXd raw = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  y_mean_ = raw.mean();
  const double var = n > 1 ? (raw.array() - y_mean_).square().sum() / static_cast<double>(n - 1) : 0.0;
  y_scale_ = var > 1e-300 ? std::sqrt(var) : 1.0;
  y_ = (raw.array() - y_mean_) / y_scale_;
  if (lengths_.size() != x.front().size()) lengths_ = Eigen::VectorXd::Constant(x.front().size(), 0.3);
  lml_ = factorize();
  if (!std::isfinite(lml_)) throw NumericError("GP covariance is not positive definite");
}

void GaussianProcess::fit(const std::vector<Eigen::VectorXd>& x, const std::vector<double>& y) {
  condition(x, y);
  const Index d = x.front().size();
  // theta = (log lengths, log variance, log noise), clamped to a box
  const double lo_l = std::log(0.01), hi_l = std::log(20.0);
  const double lo_v = std::log(0.01), hi_v = std::log(100.0);
  const double lo_n = std::log(1e-8), hi_n = std::log(1.0);
  auto unpack = [&](const Eigen::VectorXd& th, double& penalty) {
    penalty = 0.0;
    auto clamp = [&](double v, double lo, double hi) {
      if (v < lo) penalty += (lo - v) * (lo - v);
      if (v > hi) penalty += (v - hi) * (v - hi);
      return std::clamp(v, lo, hi);
    };
    for (Index i = 0; i < d; ++i) lengths_(i) = std::exp(clamp(th(i), lo_l, hi_l));
    variance_ = std::exp(clamp(th(d), lo_v, hi_v));
    noise_ = std::exp(clamp(th(d + 1), lo_n, hi_n));
  };
  auto neg_lml = [&](const Eigen::VectorXd& th) {
    double penalty = 0.0;
    unpack(th, penalty);
    const double l = factorize();
    return std::isfinite(l) ? -l + 1e3 * penalty : 1e300;
  };
  Eigen::VectorXd best;
  double best_val = std::numeric_limits<double>::infinity();
  for (double l0 : {0.1, 0.3, 1.0}) {
    Eigen::VectorXd th0(d + 2);
    th0.head(d).setConstant(std::log(l0));
    th0(d) = 0.0;
    th0(d + 1) = std::log(1e-3);
    const NelderMeadResult r = nelder_mead(neg_lml, th0, 0.5, 400 * static_cast<int>(d + 2), 1e-8);
    if (r.value < best_val) {
      best_val = r.value;
      best = r.x;
    }
  }
  double penalty = 0.0;
  unpack(best, penalty);
  lml_ = factorize();
  if (!std::isfinite(lml_)) throw NumericError("GP hyperparameter fit failed");
}

void GaussianProcess::predict(const Eigen::VectorXd& x, double& mean, double& sd) const {
  const Index n = static_cast<Index>(x_.size());
  Eigen::VectorXd ks(n);
  for (Index i = 0; i < n; ++i) ks(i) = matern52(x, x_[static_cast<size_t>(i)], lengths_, variance_);
  const double mu = ks.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(ks);
  const double var = std::max(0.0, variance_ - v.squaredNorm());
  mean = mu * y_scale_ + y_mean_;
  sd = std::sqrt(var) * y_scale_;
}

double expected_improvement(double mean, double sd, double best) {
  const double gain = mean - best;
  if (sd <= 1e-12) return std::max(0.0, gain);
  const double z = gain / sd;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return gain * cdf + sd * pdf;
}

namespace {

std::vector<double> to_params(const Eigen::VectorXd& u, const std::vector<ParameterBound>& b) {
  std::vector<double> x(b.size());
  for (size_t i = 0; i < b.size(); ++i) {
    const double ui = std::clamp(u(static_cast<Index>(i)), 1e-9, 1.0);
    x[i] = b[i].lo + ui * (b[i].hi - b[i].lo);
  }
  return x;
}

Eigen::VectorXd propose(const GaussianProcess& gp, double best, const std::vector<Eigen::VectorXd>& seen, int dim,
                        std::mt19937_64& rng) {
  auto ei = [&](const Eigen::VectorXd& u) {
    double m = 0.0, s = 0.0;
    gp.predict(u, m, s);
    return expected_improvement(m, s, best);
  };
  const int n_candidates = 500 * dim;
  std::vector<std::pair<double, Eigen::VectorXd>> cands;
  cands.reserve(static_cast<size_t>(n_candidates));
  for (int c = 0; c < n_candidates; ++c) {
    Eigen::VectorXd u(dim);
    for (int d = 0; d < dim; ++d) u(d) = 1.0 - uniform_double(rng);
    cands.emplace_back(ei(u), u);
  }
  std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  Eigen::VectorXd best_u = cands.front().second;
  double best_ei = cands.front().first;
  auto neg_ei = [&](const Eigen::VectorXd& u) {
    double outside = 0.0;
    for (int d = 0; d < dim; ++d) {
      if (u(d) <= 0.0) outside += 1.0 - u(d);
      if (u(d) > 1.0) outside += u(d);
    }
    if (outside > 0.0) return outside;
    return -ei(u);
  };
  for (size_t c = 0; c < std::min<size_t>(3, cands.size()); ++c) {
    const NelderMeadResult r = nelder_mead(neg_ei, cands[c].second, 0.05, 200 * dim, 1e-12);
    if (-r.value > best_ei) {
      best_ei = -r.value;
      best_u = r.x;
    }
  }
  for (int d = 0; d < dim; ++d) best_u(d) = std::clamp(best_u(d), 1e-9, 1.0);
  for (const Eigen::VectorXd& s : seen) {
    if ((s - best_u).cwiseAbs().maxCoeff() < 1e-9) {
      // no new information there; explore instead
      for (int d = 0; d < dim; ++d) best_u(d) = 1.0 - uniform_double(rng);
      break;
    }
  }
  return best_u;
}

}  // namespace

OptimizationResult optimize_params(const OptimizationProblem& prob) {
  const int dim = static_cast<int>(prob.bounds.size());
  if (dim == 0) throw ConfigError("optimization needs at least one parameter");
  for (const ParameterBound& b : prob.bounds) {
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.hi > b.lo)) {
      throw ConfigError("parameter '" + b.name + "' needs finite bounds lo < hi");
    }
  }
  if (!prob.objective) throw ConfigError("optimization needs an objective");
  if (prob.initial_design < 1) throw ConfigError("initial design needs at least one point");
  if (prob.budget < prob.initial_design) throw ConfigError("budget must be at least the initial design size");
  if (prob.batch < 1) throw ConfigError("batch size must be positive");

  std::mt19937_64 rng(prob.seed);
  OptimizationResult result;
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> ys;

  auto evaluate = [&](const std::vector<Eigen::VectorXd>& batch) {
    std::vector<double> values(batch.size());
    std::vector<char> failed(batch.size(), 0);
    auto run_one = [&](size_t i) {
      try {
        values[i] = prob.objective(to_params(batch[i], prob.bounds));
        if (!std::isfinite(values[i])) failed[i] = 1;
      } catch (const std::exception&) {
        failed[i] = 1;
      }
    };
    const size_t workers = static_cast<size_t>(std::max(1, prob.workers));
    for (size_t start = 0; start < batch.size(); start += workers) {
      const size_t end = std::min(batch.size(), start + workers);
      if (end - start == 1) {
        run_one(start);
        continue;
      }
      std::vector<std::thread> pool;
      for (size_t i = start; i < end; ++i) pool.emplace_back(run_one, i);
      for (std::thread& t : pool) t.join();
    }
    for (size_t i = 0; i < batch.size(); ++i) {
      double v = values[i];
      if (failed[i]) {
        if (std::isfinite(prob.failure_value)) {
          v = prob.failure_value;
        } else {
          v = ys.empty() ? 0.0 : *std::min_element(ys.begin(), ys.end());
        }
      }
      xs.push_back(batch[i]);
      ys.push_back(v);
      Evaluation e;
      e.iteration = static_cast<int>(result.history.size()) + 1;
      e.x = to_params(batch[i], prob.bounds);
      e.value = v;
      e.failed = failed[i] != 0;
      if (result.history.empty() || v > result.best_value) {
        result.best_value = v;
        result.best_x = e.x;
      }
      e.incumbent = result.best_value;
      result.history.push_back(std::move(e));
    }
  };

  evaluate(latin_hypercube(prob.initial_design, dim, rng));
  GaussianProcess gp;
  while (static_cast<int>(xs.size()) < prob.budget) {
    gp.fit(xs, ys);
    const int n_batch = std::min(prob.batch, prob.budget - static_cast<int>(xs.size()));
    std::vector<Eigen::VectorXd> batch;
    std::vector<Eigen::VectorXd> lx = xs;
    std::vector<double> ly = ys;
    for (int b = 0; b < n_batch; ++b) {
      const Eigen::VectorXd u = propose(gp, result.best_value, lx, dim, rng);
      batch.push_back(u);
      if (b + 1 < n_batch) {
        // constant liar: pretend the point returned the incumbent value
        lx.push_back(u);
        ly.push_back(result.best_value);
        gp.condition(lx, ly);
      }
    }
    evaluate(batch);
  }
  return result;
}

void write_optimization_log(std::ostream& os, const std::vector<ParameterBound>& bounds,
                            const OptimizationResult& result) {
  os << "iteration";
  for (const ParameterBound& b : bounds) os << ',' << b.name;
  os << ",objective,incumbent,failed\n";
  char buf[64];
  for (const Evaluation& e : result.history) {
    os << e.iteration;
    for (double v : e.x) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%d\n", e.value, e.incumbent, e.failed ? 1 : 0);
    os << buf;
  }
}

}  // namespace dprep
