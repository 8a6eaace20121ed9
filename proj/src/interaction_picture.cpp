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

#include "dprep/interaction_picture.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace dprep {

namespace {

struct Raw {
  Index row, col;
  Complex value;
  double nu;
  std::vector<double> kappa;
  int envelope;
  double rate;
  std::vector<double> law;
};

class Compiler {
 public:
  Compiler(const LindbladProblem& p) : p_(p), n_sched_(p.schedules.size()) {}

  // entries of env(t) e^{i(rate t + law . I)} op in the interaction picture
  void add(const SparseMatrix& op, double rate, const std::vector<double>& law, Complex scale, int envelope,
           std::vector<Raw>& out) const {
    for (Index r = 0; r < op.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(op, r); it; ++it) {
        if (it.value() == Complex(0.0, 0.0)) continue;
        Raw raw{it.row(), it.col(), scale * it.value(), rate, law, envelope, rate, law};
        raw.nu += p_.static_diagonal(it.row()) - p_.static_diagonal(it.col());
        for (const DetuningTerm& d : p_.detunings) {
          raw.kappa[static_cast<size_t>(d.schedule)] += d.pattern(it.row()) - d.pattern(it.col());
        }
        out.push_back(std::move(raw));
      }
    }
  }

  std::vector<double> law(const PhaseLaw& ph, double sign) const {
    std::vector<double> k(n_sched_, 0.0);
    if (ph.schedule >= 0) k.at(static_cast<size_t>(ph.schedule)) = sign * ph.coeff;
    return k;
  }

 private:
  const LindbladProblem& p_;
  size_t n_sched_;
};

SparseMatrix pattern_of(const std::vector<Raw>& raws, Index dim) {
  Triplets trips;
  trips.reserve(raws.size());
  for (const Raw& r : raws) trips.emplace_back(r.row, r.col, 1.0);
  SparseMatrix m(dim, dim);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

Index slot_of(const SparseMatrix& m, Index row, Index col) {
  const auto* outer = m.outerIndexPtr();
  const auto* inner = m.innerIndexPtr();
  const auto* begin = inner + outer[row];
  const auto* end = inner + outer[row + 1];
  const auto* it = std::lower_bound(begin, end, static_cast<typename SparseMatrix::StorageIndex>(col));
  return static_cast<Index>(it - inner);
}

double taper(double f, double cutoff) {
  if (f <= cutoff) return 1.0;
  if (f >= 1.5 * cutoff) return 0.0;
  const double c = std::cos(0.5 * std::numbers::pi * (f - cutoff) / (0.5 * cutoff));
  return c * c;
}

}  // namespace

InteractionPicture::InteractionPicture(const LindbladProblem& problem, double secular_cutoff) {
  if (!(secular_cutoff > 0.0)) throw ConfigError("secular cutoff must be positive");
  auto c = std::make_shared<Compiled>();
  c->dim = problem.dimension;
  c->cutoff = secular_cutoff;
  c->diag = problem.static_diagonal;
  c->schedules = problem.schedules;
  for (const DetuningTerm& d : problem.detunings) {
    c->patterns.push_back(d.pattern);
    c->pattern_schedule.push_back(d.schedule);
  }
  const Compiler comp(problem);
  const std::vector<double> zero(problem.schedules.size(), 0.0);

  std::vector<Raw> hamiltonian, dissipative;
  for (const ModulatedTerm& t : problem.couplings) {
    int env = -1, env_conj = -1;
    if (t.envelope) {
      env = static_cast<int>(c->envelopes.size());
      c->envelopes.push_back(t.envelope);
      env_conj = static_cast<int>(c->envelopes.size());
      Envelope f = t.envelope;
      c->envelopes.push_back([f](double s) { return std::conj(f(s)); });
    }
    comp.add(t.op, t.phase.rate, comp.law(t.phase, 1.0), 1.0, env, hamiltonian);
    comp.add(SparseMatrix(t.op.adjoint()), -t.phase.rate, comp.law(t.phase, -1.0), 1.0, env_conj, hamiltonian);
  }
  for (const ModulatedTerm& t : problem.hermitian_terms) comp.add(t.op, 0.0, zero, 1.0, -1, hamiltonian);

  // -i/2 L^dagger L, expanded over pairs of parts
  for (const JumpChannel& ch : problem.jumps) {
    for (size_t q = 0; q < ch.parts.size(); ++q) {
      for (size_t r = 0; r < ch.parts.size(); ++r) {
        const ModulatedTerm& a = ch.parts[q];
        const ModulatedTerm& b = ch.parts[r];
        const SparseMatrix prod = SparseMatrix(a.op.adjoint()) * b.op;
        if (prod.nonZeros() == 0) continue;
        std::vector<double> law = comp.law(b.phase, 1.0);
        const std::vector<double> la = comp.law(a.phase, 1.0);
        for (size_t s = 0; s < law.size(); ++s) law[s] -= la[s];
        int env = -1;
        if (a.envelope || b.envelope) {
          Envelope fa = a.envelope, fb = b.envelope;
          env = static_cast<int>(c->envelopes.size());
          c->envelopes.push_back([fa, fb](double s) {
            const Complex va = fa ? std::conj(fa(s)) : Complex(1.0, 0.0);
            const Complex vb = fb ? fb(s) : Complex(1.0, 0.0);
            return va * vb;
          });
        }
        comp.add(prod, b.phase.rate - a.phase.rate, law, Complex(0.0, -0.5), env, dissipative);
      }
    }
  }

  std::map<std::vector<double>, int> group_ids;
  auto group_of = [&](const std::vector<double>& k) {
    auto [it, inserted] = group_ids.emplace(k, static_cast<int>(c->groups.size()));
    if (inserted) c->groups.push_back(k);
    return it->second;
  };
  std::map<std::pair<double, std::vector<double>>, int> phase_ids;
  auto phase_of = [&](const Raw& r) {
    auto [it, inserted] = phase_ids.emplace(std::make_pair(r.rate, r.law), static_cast<int>(c->phase_rates.size()));
    if (inserted) {
      c->phase_rates.push_back(r.rate);
      c->phase_laws.push_back(r.law);
    }
    return it->second;
  };

  std::vector<Raw> all = hamiltonian;
  all.insert(all.end(), dissipative.begin(), dissipative.end());
  c->k_pattern = pattern_of(all, c->dim);
  const bool secular = std::isfinite(secular_cutoff);
  auto contribution = [&](const Raw& r) {
    return Contribution{slot_of(c->k_pattern, r.row, r.col), r.row, r.col, r.value, r.nu, group_of(r.kappa),
                        phase_of(r), r.envelope};
  };
  for (const Raw& r : dissipative) c->k_fixed.push_back(contribution(r));
  for (const Raw& r : hamiltonian) {
    // envelope terms and exact runs keep every entry
    if (secular && r.envelope < 0) {
      c->k_secular.push_back(contribution(r));
    } else {
      c->k_fixed.push_back(contribution(r));
    }
  }
  std::stable_sort(c->k_secular.begin(), c->k_secular.end(), [](const Contribution& a, const Contribution& b) {
    return a.group != b.group ? a.group < b.group : a.nu < b.nu;
  });
  c->secular_range.assign(c->groups.size(), {0, 0});
  for (size_t i = 0; i < c->k_secular.size();) {
    size_t j = i;
    while (j < c->k_secular.size() && c->k_secular[j].group == c->k_secular[i].group) ++j;
    c->secular_range[static_cast<size_t>(c->k_secular[i].group)] = {i, j};
    i = j;
  }

  for (const JumpChannel& ch : problem.jumps) {
    std::vector<Raw> raws;
    for (const ModulatedTerm& part : ch.parts) {
      int env = -1;
      if (part.envelope) {
        env = static_cast<int>(c->envelopes.size());
        c->envelopes.push_back(part.envelope);
      }
      comp.add(part.op, part.phase.rate, comp.law(part.phase, 1.0), 1.0, env, raws);
    }
    c->jump_pattern.push_back(pattern_of(raws, c->dim));
    std::vector<Contribution> list;
    for (const Raw& r : raws) {
      list.push_back({slot_of(c->jump_pattern.back(), r.row, r.col), r.row, r.col, r.value, r.nu, group_of(r.kappa),
                      phase_of(r), r.envelope});
    }
    c->jumps.push_back(std::move(list));
  }

  shared_ = c;
  k_work_ = c->k_pattern;
  jump_work_ = c->jump_pattern;
  group_freq_.assign(c->groups.size(), 0.0);
  phase_values_.assign(c->phase_rates.size(), Complex(1.0, 0.0));
  env_values_.assign(c->envelopes.size(), Complex(1.0, 0.0));
}

size_t InteractionPicture::generator_terms() const { return shared_->k_fixed.size() + shared_->k_secular.size(); }

void InteractionPicture::evaluate_context(double t) {
  const Compiled& c = *shared_;
  const size_t ns = c.schedules.size();
  double integral[16];
  double value[16];
  std::vector<double> big_i, big_v;
  double* ip = integral;
  double* vp = value;
  if (ns > 16) {
    big_i.resize(ns);
    big_v.resize(ns);
    ip = big_i.data();
    vp = big_v.data();
  }
  for (size_t s = 0; s < ns; ++s) {
    ip[s] = c.schedules[s].integral(t);
    vp[s] = c.schedules[s](t);
  }
  for (size_t g = 0; g < c.groups.size(); ++g) {
    double fr = 0.0;
    for (size_t s = 0; s < ns; ++s) fr += c.groups[g][s] * vp[s];
    group_freq_[g] = fr;
  }
  // e^{i(nu t + kappa . I)} = e^{i(rate t + law . I)} u_row conj(u_col), u = e^{i theta}
  for (size_t q = 0; q < c.phase_rates.size(); ++q) {
    double ph = c.phase_rates[q] * t;
    for (size_t s = 0; s < ns; ++s) ph += c.phase_laws[q][s] * ip[s];
    phase_values_[q] = std::polar(1.0, ph);
  }
  theta(t, theta_);
  row_phase_.resize(theta_.size());
  for (Index i = 0; i < theta_.size(); ++i) row_phase_(i) = std::polar(1.0, theta_(i));
  for (size_t e = 0; e < c.envelopes.size(); ++e) env_values_[e] = c.envelopes[e](t);
}

Complex InteractionPicture::term_value(const Contribution& c) const {
  Complex v = c.value * phase_values_[static_cast<size_t>(c.phase)] * row_phase_(c.row) * std::conj(row_phase_(c.col));
  if (c.envelope >= 0) v *= env_values_[static_cast<size_t>(c.envelope)];
  return v;
}

const SparseMatrix& InteractionPicture::generator(double t) {
  const Compiled& c = *shared_;
  evaluate_context(t);
  Complex* values = k_work_.valuePtr();
  std::fill(values, values + k_work_.nonZeros(), Complex(0.0, 0.0));
  for (const Contribution& k : c.k_fixed) values[k.slot] += term_value(k);
  if (!c.k_secular.empty()) {
    const double cut = c.cutoff;
    for (size_t g = 0; g < c.groups.size(); ++g) {
      const auto [b, e] = c.secular_range[g];
      if (b == e) continue;
      const double shift = group_freq_[g];
      // instantaneous frequency nu + shift must stay below 1.5 cutoff
      auto first = std::lower_bound(c.k_secular.begin() + static_cast<long>(b), c.k_secular.begin() + static_cast<long>(e),
                                    -shift - 1.5 * cut,
                                    [](const Contribution& x, double v) { return x.nu < v; });
      for (auto it = first; it != c.k_secular.begin() + static_cast<long>(e); ++it) {
        const double f = std::abs(it->nu + shift);
        if (it->nu + shift > 1.5 * cut) break;
        const double w = taper(f, cut);
        if (w == 0.0) continue;
        values[it->slot] += w * term_value(*it);
      }
    }
  }
  return k_work_;
}

const SparseMatrix& InteractionPicture::jump(size_t k, double t) {
  const Compiled& c = *shared_;
  evaluate_context(t);
  SparseMatrix& m = jump_work_.at(k);
  Complex* values = m.valuePtr();
  std::fill(values, values + m.nonZeros(), Complex(0.0, 0.0));
  for (const Contribution& q : c.jumps[k]) values[q.slot] += term_value(q);
  return m;
}

void InteractionPicture::theta(double t, RealVector& out) const {
  const Compiled& c = *shared_;
  out = c.diag * t;
  for (size_t k = 0; k < c.patterns.size(); ++k) {
    out += c.schedules[static_cast<size_t>(c.pattern_schedule[k])].integral(t) * c.patterns[k];
  }
}

void InteractionPicture::to_lab(double t, const StateVector& phi, StateVector& psi) const {
  RealVector th;
  theta(t, th);
  psi.resize(phi.size());
  for (Index i = 0; i < phi.size(); ++i) psi(i) = phi(i) * std::polar(1.0, -th(i));
}

void InteractionPicture::from_lab(double t, const StateVector& psi, StateVector& phi) const {
  RealVector th;
  theta(t, th);
  phi.resize(psi.size());
  for (Index i = 0; i < psi.size(); ++i) phi(i) = psi(i) * std::polar(1.0, th(i));
}

void InteractionPicture::to_lab(double t, const DenseMatrix& sigma, DenseMatrix& rho) const {
  RealVector th;
  theta(t, th);
  StateVector p(th.size());
  for (Index i = 0; i < th.size(); ++i) p(i) = std::polar(1.0, -th(i));
  rho = p.asDiagonal() * sigma * p.conjugate().asDiagonal();
}

void InteractionPicture::from_lab(double t, const DenseMatrix& rho, DenseMatrix& sigma) const {
  RealVector th;
  theta(t, th);
  StateVector p(th.size());
  for (Index i = 0; i < th.size(); ++i) p(i) = std::polar(1.0, th(i));
  sigma = p.asDiagonal() * rho * p.conjugate().asDiagonal();
}

}  // namespace dprep
