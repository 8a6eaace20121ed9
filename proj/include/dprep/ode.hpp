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

// Dormand-Prince 5(4) with the 4th-order continuous extension.
// State is any Eigen dense type; the right-hand side is rhs(t, y, dy).

#ifndef DPREP_ODE_HPP
#define DPREP_ODE_HPP

#include <algorithm>
#include <cmath>
#include <limits>

#include "dprep/types.hpp"

namespace dprep {

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double h_init = 0.0;  // 0 -> automatic
  double h_min = 1e-12;
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 100000000;
};

template <typename State, typename Rhs>
class Dopri5 {
 public:
  Dopri5(Rhs rhs, OdeOptions options) : rhs_(std::move(rhs)), opt_(options) {}

  /// Start (or restart) from y at time t; discards the previous step.
  void reset(double t, const State& y) {
    t_ = t;
    y_ = y;
    rhs_(t_, y_, k1_);
    have_step_ = false;
    // a restart keeps the last accepted step size
    if (h_ <= 0.0) h_ = opt_.h_init > 0.0 ? opt_.h_init : initial_step();
  }

  double time() const { return t_; }
  const State& state() const { return y_; }
  double previous_time() const { return t_old_; }
  long steps() const { return accepted_; }
  long rejected() const { return rejected_; }

  /// One accepted step that does not pass t_limit. Throws NumericError on
  /// step-size underflow or when the step budget is exhausted.
  void step(double t_limit) {
    const double span = t_limit - t_;
    if (span <= 0.0) throw NumericError("integrator asked to step backwards");
    for (;;) {
      if (accepted_ + rejected_ >= opt_.max_steps) throw NumericError("integrator step budget exhausted");
      double h = std::min({h_, opt_.h_max, span});
      const bool last = h >= span * (1.0 - 1e-12);
      if (last) h = span;
      attempt(h);
      const double err = error_norm();
      if (!std::isfinite(err)) {
        ++rejected_;
        h_ = 0.2 * h;
        if (h_ < opt_.h_min) throw NumericError("integrator produced non-finite values");
        continue;
      }
      if (err <= 1.0) {
        ++accepted_;
        const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        if (!last || fac < 1.0) h_ = h * fac;
        prepare_dense(h);
        t_old_ = t_;
        y_old_ = y_;
        t_ = last ? t_limit : t_ + h;
        y_.swap(y_new_);
        k1_.swap(k7_);  // first-same-as-last
        have_step_ = true;
        return;
      }
      ++rejected_;
      h_ = h * std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h_ < opt_.h_min) throw NumericError("integrator step size underflow");
    }
  }

  /// Solution at t inside the last accepted step.
  void dense(double t, State& out) const {
    if (!have_step_) {
      out = y_;
      return;
    }
    const double h = t_ - t_old_;
    const double th = (t - t_old_) / h;
    const double th1 = 1.0 - th;
    out = r1_ + th * (r2_ + th1 * (r3_ + th * (r4_ + th1 * r5_)));
  }

 private:
  void attempt(double h) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    tmp_ = y_ + (h * a21) * k1_;
    rhs_(t_ + c2 * h, tmp_, k2_);
    tmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
    rhs_(t_ + c3 * h, tmp_, k3_);
    tmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    rhs_(t_ + c4 * h, tmp_, k4_);
    tmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(t_ + c5 * h, tmp_, k5_);
    tmp_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(t_ + h, tmp_, k6_);
    y_new_ = y_ + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    rhs_(t_ + h, y_new_, k7_);
    err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
  }

  double error_norm() const {
    const auto scale = (opt_.atol + opt_.rtol * y_.cwiseAbs().cwiseMax(y_new_.cwiseAbs()).array()).eval();
    const double n = static_cast<double>(y_.size());
    if (n == 0) return 0.0;
    return std::sqrt((err_.cwiseAbs().array() / scale).square().sum() / n);
  }

  void prepare_dense(double h) {
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
    r1_ = y_;
    r2_ = y_new_ - y_;
    r3_ = h * k1_ - r2_;
    r4_ = r2_ - h * k7_ - r3_;
    r5_ = h * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
  }

  double initial_step() {
    // Hairer's starting-step heuristic, one explicit Euler probe
    const auto sc = (opt_.atol + opt_.rtol * y_.cwiseAbs().array()).eval();
    const double n = std::max<double>(1.0, static_cast<double>(y_.size()));
    const double d0 = std::sqrt((y_.cwiseAbs().array() / sc).square().sum() / n);
    const double d1 = std::sqrt((k1_.cwiseAbs().array() / sc).square().sum() / n);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    tmp_ = y_ + h0 * k1_;
    rhs_(t_ + h0, tmp_, k2_);
    const double d2 = std::sqrt(((k2_ - k1_).cwiseAbs().array() / sc).square().sum() / n) / h0;
    const double m = std::max(d1, d2);
    const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
    return std::min({100.0 * h0, h1, opt_.h_max});
  }

  Rhs rhs_;
  OdeOptions opt_;
  double t_ = 0.0, t_old_ = 0.0, h_ = 0.0;
  bool have_step_ = false;
  long accepted_ = 0, rejected_ = 0;
  State y_, y_old_, y_new_, tmp_, err_;
  State k1_, k2_, k3_, k4_, k5_, k6_, k7_;
  State r1_, r2_, r3_, r4_, r5_;
};

}  // namespace dprep

#endif  // DPREP_ODE_HPP
