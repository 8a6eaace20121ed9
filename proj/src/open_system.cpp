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

#include "dprep/open_system.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace dprep {

namespace {

struct AuxEntry {
  int to, from;
  Complex value;
};

// Level positions for each representation.
int level_of(AuxLevels kind, AuxRole role, char name) {
  switch (kind) {
    case AuxLevels::full:
      return name == 'g' ? 0 : name == 'i' ? 1 : name == '0' ? 2 : name == '1' ? 3 : -1;
    case AuxLevels::reduced:
      return name == 'g' ? 0 : name == '0' ? 1 : name == '1' ? 2 : -1;
    case AuxLevels::effective:
      if (name == 'g') return 0;
      if (name == 'r') return 1;
      if (role == AuxRole::source && name == '1') return 1;
      if (role == AuxRole::sink && name == '0') return 1;
      return -1;
  }
  return -1;
}

int levels_of(AuxLevels kind) { return kind == AuxLevels::full ? 4 : kind == AuxLevels::reduced ? 3 : 2; }

class Layout {
 public:
  Layout(Index m, std::vector<int> levels) : m_(m), levels_(std::move(levels)) {
    stride_.resize(levels_.size());
    Index s = 1;
    for (size_t k = 0; k < levels_.size(); ++k) {
      stride_[k] = s;
      s *= levels_[k];
    }
    aux_dim_ = s;
  }
  Index dimension() const { return m_ * aux_dim_; }
  Index aux_dim() const { return aux_dim_; }
  int digit(Index alpha, size_t k) const { return static_cast<int>((alpha / stride_[k]) % levels_[k]); }

  // sys_op (x) aux_op on auxiliary k (identity elsewhere); sys_op empty = identity.
  SparseMatrix kron(const SparseMatrix* sys_op, size_t k, const std::vector<AuxEntry>& aux_op) const {
    Triplets trips;
    for (Index alpha = 0; alpha < aux_dim_; ++alpha) {
      const int a = digit(alpha, k);
      for (const AuxEntry& e : aux_op) {
        if (e.from != a) continue;
        const Index alpha2 = alpha + static_cast<Index>(e.to - e.from) * stride_[k];
        if (sys_op == nullptr) {
          for (Index s = 0; s < m_; ++s) trips.emplace_back(s + m_ * alpha2, s + m_ * alpha, e.value);
        } else {
          for (Index r = 0; r < sys_op->outerSize(); ++r) {
            for (SparseMatrix::InnerIterator it(*sys_op, r); it; ++it) {
              trips.emplace_back(it.row() + m_ * alpha2, it.col() + m_ * alpha, e.value * it.value());
            }
          }
        }
      }
    }
    SparseMatrix out(dimension(), dimension());
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
  }

  SparseMatrix lift(const SparseMatrix& sys_op) const {
    Triplets trips;
    for (Index alpha = 0; alpha < aux_dim_; ++alpha) {
      for (Index r = 0; r < sys_op.outerSize(); ++r) {
        for (SparseMatrix::InnerIterator it(sys_op, r); it; ++it) {
          trips.emplace_back(it.row() + m_ * alpha, it.col() + m_ * alpha, it.value());
        }
      }
    }
    SparseMatrix out(dimension(), dimension());
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
  }

  RealVector aux_diagonal(size_t k, const std::vector<double>& per_level) const {
    RealVector d(dimension());
    for (Index alpha = 0; alpha < aux_dim_; ++alpha) {
      d.segment(m_ * alpha, m_).setConstant(per_level[static_cast<size_t>(digit(alpha, k))]);
    }
    return d;
  }

 private:
  Index m_;
  std::vector<int> levels_;
  std::vector<Index> stride_;
  Index aux_dim_ = 1;
};

void validate(const AuxiliarySpec& a) {
  auto nonneg = [](double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite and >= 0");
  };
  nonneg(a.J, "J");
  nonneg(a.omega_drive, "drive Omega");
  if (a.gamma) nonneg(*a.gamma, "gamma");
  if (a.Gamma) nonneg(*a.Gamma, "Gamma");
  if (a.omega_i) nonneg(*a.omega_i, "Omega_i");
}

// Entries of the system raising operator grouped by Bohr frequency.
std::vector<std::pair<double, SparseMatrix>> frequency_blocks(const SystemModel& sys, const SparseMatrix& s_plus,
                                                              double eps) {
  struct E {
    Index r, c;
    Complex v;
    double w;
  };
  std::vector<E> all;
  const RealVector energies = sys.h.diagonal().real();
  for (Index r = 0; r < s_plus.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(s_plus, r); it; ++it) {
      all.push_back({it.row(), it.col(), it.value(), energies(it.row()) - energies(it.col())});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const E& a, const E& b) { return a.w < b.w; });
  std::vector<std::pair<double, SparseMatrix>> out;
  size_t k = 0;
  while (k < all.size()) {
    size_t e = k + 1;
    while (e < all.size() && all[e].w - all[e - 1].w <= eps) ++e;
    Triplets trips;
    double mean = 0.0;
    for (size_t q = k; q < e; ++q) {
      trips.emplace_back(all[q].r, all[q].c, all[q].v);
      mean += all[q].w;
    }
    SparseMatrix block(sys.size(), sys.size());
    block.setFromTriplets(trips.begin(), trips.end());
    out.emplace_back(mean / static_cast<double>(e - k), std::move(block));
    k = e;
  }
  return out;
}

Complex phase_factor(const PhaseLaw& p, const std::vector<DetuningSchedule>& schedules, double t) {
  double arg = p.rate * t;
  if (p.schedule >= 0 && p.coeff != 0.0) arg += p.coeff * schedules[static_cast<size_t>(p.schedule)].integral(t);
  return std::polar(1.0, arg);
}

Complex coefficient(const ModulatedTerm& term, const std::vector<DetuningSchedule>& schedules, double t) {
  Complex c = phase_factor(term.phase, schedules, t);
  if (term.envelope) c *= term.envelope(t);
  return c;
}

std::string aux_name(const AuxiliarySpec& a, size_t k) { return role_name(a.role) + std::to_string(k); }

LindbladProblem assemble(const SystemModel& system, const std::vector<AuxiliarySpec>& aux, AuxLevels kind,
                         Frame frame, double eps_omega) {
  if (aux.empty()) throw ConfigError("at least one auxiliary is required");
  if (frame == Frame::rotating && !system.eigenbasis) {
    throw ConfigError("the rotating-frame construction needs the system in its eigenbasis");
  }
  for (const AuxiliarySpec& a : aux) {
    validate(a);
    if (kind == AuxLevels::full && (!a.Gamma || !a.omega_i)) {
      throw ConfigError("full model auxiliaries need Gamma and Omega_i");
    }
    if (kind == AuxLevels::full && *a.Gamma <= 0.0) throw ConfigError("Gamma must be positive");
    if (kind == AuxLevels::reduced && !a.gamma) throw ConfigError("reduced model auxiliaries need gamma");
  }
  LindbladProblem p;
  p.system_dim = system.size();
  p.level_kind = kind;
  p.frame = frame;
  p.aux_levels.assign(aux.size(), levels_of(kind));
  const Layout layout(p.system_dim, p.aux_levels);
  p.dimension = layout.dimension();

  p.static_diagonal = RealVector::Zero(p.dimension);
  if (frame == Frame::lab) {
    // diagonal part of H_S in the static term, the rest as a Hermitian term
    const SparseMatrix lifted = layout.lift(system.h);
    SparseMatrix off = lifted;
    for (Index r = 0; r < off.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(off, r); it; ++it) {
        if (it.row() == it.col()) {
          p.static_diagonal(it.row()) += it.value().real();
          it.valueRef() = 0.0;
        }
      }
    }
    off.prune(Complex(0.0, 0.0), 0.0);
    if (off.nonZeros() > 0) p.hermitian_terms.push_back({off, {}, {}, "H_S offdiag"});
  }

  for (size_t k = 0; k < aux.size(); ++k) {
    const AuxiliarySpec& a = aux[k];
    const AuxRole role = a.role;
    p.roles.push_back(role);
    p.schedules.push_back(a.detuning);
    const int g = level_of(kind, role, 'g');
    const int l0 = level_of(kind, role, '0');
    const int l1 = level_of(kind, role, '1');
    const int lossy = role == AuxRole::source ? l0 : l1;
    const int driven = role == AuxRole::source ? l1 : l0;
    const std::string name = aux_name(a, k);

    if (a.omega_drive != 0.0) {
      p.couplings.push_back({layout.kron(nullptr, k, {{g, driven, a.omega_drive}}), {}, {}, name + " drive"});
    }
    if (frame == Frame::lab) {
      std::vector<double> pattern(static_cast<size_t>(levels_of(kind)), 0.0);
      const double sign = role == AuxRole::source ? 1.0 : -1.0;
      pattern[static_cast<size_t>(g)] = sign;
      pattern[static_cast<size_t>(driven)] = sign;
      p.detunings.push_back({layout.aux_diagonal(k, pattern), static_cast<int>(k)});
    }

    const SparseMatrix s_plus = system.raising(a.attach);
    if (a.J != 0.0) {
      if (frame == Frame::lab) {
        p.couplings.push_back({layout.kron(&s_plus, k, {{l0, l1, a.J}}), {}, {}, name + " exchange"});
      } else {
        for (const auto& [w, block] : frequency_blocks(system, s_plus, eps_omega)) {
          if (role == AuxRole::source) {
            p.couplings.push_back({layout.kron(&block, k, {{l0, l1, a.J}}),
                                   {w, static_cast<int>(k), -1.0},
                                   {},
                                   name + " exchange w=" + std::to_string(w)});
          } else {
            const SparseMatrix s_minus = block.adjoint();
            p.couplings.push_back({layout.kron(&s_minus, k, {{l1, l0, a.J}}),
                                   {-w, static_cast<int>(k), 1.0},
                                   {},
                                   name + " exchange w=" + std::to_string(w)});
          }
        }
      }
    }

    JumpChannel ch;
    ch.label = name + " decay";
    if (kind == AuxLevels::full) {
      const int li = level_of(kind, role, 'i');
      if (*a.omega_i != 0.0) {
        p.couplings.push_back({layout.kron(nullptr, k, {{li, lossy, *a.omega_i}}), {}, {}, name + " Omega_i"});
      }
      ch.parts.push_back({layout.kron(nullptr, k, {{g, li, std::sqrt(*a.Gamma)}}), {}, {}, ch.label});
    } else {
      ch.parts.push_back({layout.kron(nullptr, k, {{g, lossy, std::sqrt(*a.gamma)}}), {}, {}, ch.label});
    }
    p.jumps.push_back(std::move(ch));
  }
  return p;
}

}  // namespace

SparseMatrix SystemModel::raising(const std::vector<double>& weights) const {
  const SparseMatrix full = raising_operator(num_sites, weights);
  if (basis.size() == 0) return full;
  const DenseMatrix r = basis.adjoint() * (full * basis);
  Triplets trips;
  for (Index i = 0; i < r.rows(); ++i) {
    for (Index j = 0; j < r.cols(); ++j) {
      if (std::abs(r(i, j)) >= 1e-12) trips.emplace_back(i, j, r(i, j));
    }
  }
  SparseMatrix out(r.rows(), r.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

StateVector SystemModel::project(const StateVector& v) const {
  if (basis.size() == 0) return v;
  return basis.adjoint() * v;
}

SystemModel computational_system(const HermitianOperator& h) {
  SystemModel s;
  s.num_sites = h.num_sites;
  s.h = h.matrix;
  s.filling.resize(static_cast<size_t>(h.dimension()));
  for (Index i = 0; i < h.dimension(); ++i) s.filling[static_cast<size_t>(i)] = popcount(i);
  bool diagonal = true;
  for (Index r = 0; r < h.matrix.outerSize() && diagonal; ++r) {
    for (SparseMatrix::InnerIterator it(h.matrix, r); it; ++it) {
      if (it.row() != it.col() && it.value() != Complex(0.0, 0.0)) {
        diagonal = false;
        break;
      }
    }
  }
  s.eigenbasis = diagonal;
  return s;
}

SystemModel eigen_system(int num_sites, const InvariantSubspace& subspace) {
  SystemModel s;
  s.num_sites = num_sites;
  const Index m = subspace.size();
  s.h.resize(m, m);
  Triplets trips;
  for (Index i = 0; i < m; ++i) trips.emplace_back(i, i, subspace.energies(i));
  s.h.setFromTriplets(trips.begin(), trips.end());
  s.filling = subspace.filling;
  s.eigenbasis = true;
  s.basis = subspace.basis;
  return s;
}

SparseMatrix LindbladProblem::hamiltonian(double t) const {
  RealVector diag = static_diagonal;
  for (const DetuningTerm& d : detunings) diag += schedules[static_cast<size_t>(d.schedule)](t) * d.pattern;
  SparseMatrix h(dimension, dimension);
  Triplets trips;
  for (Index i = 0; i < dimension; ++i) {
    if (diag(i) != 0.0) trips.emplace_back(i, i, diag(i));
  }
  h.setFromTriplets(trips.begin(), trips.end());
  for (const ModulatedTerm& term : couplings) {
    const SparseMatrix m = coefficient(term, schedules, t) * term.op;
    h += m;
    h += SparseMatrix(m.adjoint());
  }
  for (const ModulatedTerm& term : hermitian_terms) h += term.op;
  h.makeCompressed();
  return h;
}

SparseMatrix LindbladProblem::jump(size_t k, double t) const {
  SparseMatrix l(dimension, dimension);
  for (const ModulatedTerm& part : jumps.at(k).parts) l += coefficient(part, schedules, t) * part.op;
  l.makeCompressed();
  return l;
}

bool LindbladProblem::time_independent() const {
  auto constant_schedule = [&](int s) {
    return s < 0 || schedules[static_cast<size_t>(s)].kind() == ScheduleKind::constant;
  };
  for (const DetuningTerm& d : detunings) {
    if (!constant_schedule(d.schedule)) return false;
  }
  auto term_constant = [&](const ModulatedTerm& t) {
    if (t.envelope) return false;
    if (t.phase.rate != 0.0) return false;
    return t.phase.coeff == 0.0 || t.phase.schedule < 0;
  };
  for (const ModulatedTerm& t : couplings) {
    if (!term_constant(t)) return false;
  }
  for (const JumpChannel& ch : jumps) {
    // one part: its phase drops out of the dissipator
    if (ch.parts.size() == 1 && !ch.parts[0].envelope) continue;
    for (const ModulatedTerm& t : ch.parts) {
      if (!term_constant(t)) return false;
    }
  }
  return true;
}

RealVector LindbladProblem::aux_population(int aux, int level) const {
  const Layout layout(system_dim, aux_levels);
  std::vector<double> per(static_cast<size_t>(aux_levels.at(static_cast<size_t>(aux))), 0.0);
  per.at(static_cast<size_t>(level)) = 1.0;
  return layout.aux_diagonal(static_cast<size_t>(aux), per);
}

SparseMatrix LindbladProblem::lift_system(const SparseMatrix& op) const {
  if (op.rows() != system_dim) throw ConfigError("system operator dimension mismatch");
  return Layout(system_dim, aux_levels).lift(op);
}

int LindbladProblem::level_index(int aux, char name) const {
  return level_of(level_kind, roles.at(static_cast<size_t>(aux)), name);
}

LindbladProblem build_full_model(const SystemModel& system, const std::vector<AuxiliarySpec>& aux, Frame frame,
                                 double eps_omega) {
  return assemble(system, aux, AuxLevels::full, frame, eps_omega);
}

LindbladProblem build_reduced_model(const SystemModel& system, const std::vector<AuxiliarySpec>& aux,
                                    Frame frame, double eps_omega) {
  return assemble(system, aux, AuxLevels::reduced, frame, eps_omega);
}

double induced_decay_rate(double omega0, double Gamma) {
  if (!(Gamma > 0.0)) throw ConfigError("induced decay rate needs Gamma > 0");
  return 4.0 * omega0 * omega0 / Gamma;
}

Complex effective_amplitude(double J, double Gamma, double omega_i, double detuning, EffectiveAmplitude mode) {
  if (!(Gamma > 0.0) || !(omega_i > 0.0)) throw ConfigError("effective amplitude needs Gamma, Omega_i > 0");
  if (mode == EffectiveAmplitude::resonant) return J * std::sqrt(Gamma) / omega_i;
  const double d = detuning;
  return J * std::sqrt(Gamma) * omega_i / Complex(omega_i * omega_i - d * d, 0.5 * Gamma * d);
}

LindbladProblem build_effective_model(const SystemModel& system, const std::vector<AuxiliarySpec>& aux,
                                      const EffectiveOptions& options) {
  if (!system.eigenbasis) throw ConfigError("the effective model needs the system eigendecomposition");
  if (aux.empty()) throw ConfigError("at least one auxiliary is required");
  LindbladProblem p;
  p.system_dim = system.size();
  p.level_kind = AuxLevels::effective;
  p.frame = Frame::rotating;
  p.aux_levels.assign(aux.size(), 2);
  const Layout layout(p.system_dim, p.aux_levels);
  p.dimension = layout.dimension();
  p.static_diagonal = RealVector::Zero(p.dimension);

  for (size_t k = 0; k < aux.size(); ++k) {
    const AuxiliarySpec& a = aux[k];
    validate(a);
    // amplitude in terms of (Gamma, Omega_i), or its large-Gamma limit at fixed gamma
    double Gamma = 0.0, omega_i = 0.0;
    if (a.Gamma && a.omega_i) {
      Gamma = *a.Gamma;
      omega_i = *a.omega_i;
    } else if (a.gamma) {
      if (!(*a.gamma > 0.0)) throw ConfigError("effective model needs gamma > 0");
    } else {
      throw ConfigError("effective model auxiliaries need (Gamma, Omega_i) or gamma");
    }
    const double J = a.J;
    const std::optional<double> gamma = a.gamma;
    const EffectiveAmplitude mode = options.amplitude;
    auto amp = [=](double d) -> Complex {
      if (Gamma > 0.0) return effective_amplitude(J, Gamma, omega_i, d, mode);
      const double g = *gamma;
      if (mode == EffectiveAmplitude::resonant) return 2.0 * J / std::sqrt(g);
      return 2.0 * J * std::sqrt(g) / Complex(g, 2.0 * d);
    };

    p.roles.push_back(a.role);
    p.schedules.push_back(a.detuning);
    const std::string name = aux_name(a, k);
    if (a.omega_drive != 0.0) {
      p.couplings.push_back({layout.kron(nullptr, k, {{0, 1, a.omega_drive}}), {}, {}, name + " drive"});
    }
    JumpChannel ch;
    ch.label = name + " effective";
    const SparseMatrix s_plus = system.raising(a.attach);
    const DetuningSchedule sched = a.detuning;
    const bool constant = sched.kind() == ScheduleKind::constant;
    const int ks = static_cast<int>(k);
    for (const auto& [w, block] : frequency_blocks(system, s_plus, options.eps_omega)) {
      if (a.J == 0.0) break;
      const double sign = a.role == AuxRole::source ? 1.0 : -1.0;
      // detuning of this Bohr frequency from the auxiliary: w - Delta (source), Delta - w (sink)
      auto detuning_of = [=](double t) { return sign * (w - sched(t)); };
      SparseMatrix sys_op = a.role == AuxRole::source ? block : SparseMatrix(block.adjoint());
      ModulatedTerm part;
      part.phase = {sign * w, ks, -sign};
      part.label = name + " w=" + std::to_string(w);
      if (constant || mode == EffectiveAmplitude::resonant) {
        part.op = layout.kron(&sys_op, k, {{0, 1, amp(detuning_of(0.0))}});
      } else {
        part.op = layout.kron(&sys_op, k, {{0, 1, 1.0}});
        part.envelope = [=](double t) { return amp(detuning_of(t)); };
      }
      ch.parts.push_back(std::move(part));
    }
    if (!ch.parts.empty()) p.jumps.push_back(std::move(ch));
  }
  return p;
}

void write_problem_summary(std::ostream& os, const LindbladProblem& p) {
  const char* kind = p.level_kind == AuxLevels::full ? "full" : p.level_kind == AuxLevels::reduced ? "reduced" : "effective";
  os << "model: " << kind << '\n';
  os << "frame: " << (p.frame == Frame::lab ? "lab" : "rotating") << '\n';
  os << "system_dim: " << p.system_dim << '\n';
  os << "aux_levels:";
  for (int l : p.aux_levels) os << ' ' << l;
  os << '\n';
  os << "dimension: " << p.dimension << '\n';
  os << "time_independent: " << (p.time_independent() ? "yes" : "no") << '\n';
  os << "terms:\n";
  os << "  static diagonal, max |entry| " << (p.static_diagonal.size() ? p.static_diagonal.cwiseAbs().maxCoeff() : 0.0)
     << '\n';
  for (const DetuningTerm& d : p.detunings) os << "  detuning pattern, schedule " << d.schedule << '\n';
  for (const ModulatedTerm& t : p.couplings) {
    os << "  " << t.label << " (+h.c.), nnz " << t.op.nonZeros() << ", phase rate " << t.phase.rate;
    if (t.phase.schedule >= 0) os << ", schedule " << t.phase.schedule << " coeff " << t.phase.coeff;
    if (t.envelope) os << ", time-dependent envelope";
    os << '\n';
  }
  for (const ModulatedTerm& t : p.hermitian_terms) os << "  " << t.label << ", nnz " << t.op.nonZeros() << '\n';
  os << "jumps:\n";
  for (const JumpChannel& ch : p.jumps) {
    Index nnz = 0;
    for (const ModulatedTerm& part : ch.parts) nnz += part.op.nonZeros();
    os << "  " << ch.label << ", parts " << ch.parts.size() << ", nnz " << nnz << '\n';
  }
}

}  // namespace dprep
