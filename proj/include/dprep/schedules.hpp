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

// Detuning schedules and the protocols built from them.

#ifndef DPREP_SCHEDULES_HPP
#define DPREP_SCHEDULES_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace dprep {

enum class ScheduleKind { constant, sawtooth, piecewise };

/// Delta(t). Times are in units of inverse energy.
///
/// constant:  value.
/// sawtooth:  lo + (hi - lo) * frac(t / period), restarting at lo.
/// piecewise: linear between (t, value) breakpoints, held constant outside.
///            A repeated time is a jump; evaluation there takes the later
///            value (right-continuous).
class DetuningSchedule {
 public:
  static DetuningSchedule constant(double value);
  static DetuningSchedule sawtooth(double lo, double hi, double period);
  static DetuningSchedule piecewise(std::vector<double> times, std::vector<double> values);

  ScheduleKind kind() const { return kind_; }
  double operator()(double t) const;
  /// Integral of Delta from 0 to t, closed form.
  double integral(double t) const;
  /// [min, max] of the schedule over all t >= 0.
  std::pair<double, double> range() const;
  bool operator==(const DetuningSchedule& other) const = default;

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  double period() const { return period_; }

 private:
  ScheduleKind kind_ = ScheduleKind::constant;
  std::vector<double> times_;
  std::vector<double> values_;
  double period_ = 0.0;
  std::vector<double> cumulative_;  // integral up to each breakpoint
};

enum class AuxRole { source, sink };
std::string role_name(AuxRole role);
AuxRole parse_role(const std::string& name);

struct AuxSchedule {
  AuxRole role = AuxRole::source;
  DetuningSchedule schedule;
  bool operator==(const AuxSchedule& other) const = default;
};

struct Band {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

enum class ProtocolMode { raster, static_multi };
ProtocolMode parse_protocol_mode(const std::string& name);

struct Protocol {
  std::vector<AuxSchedule> aux;
  std::vector<Band> source_bands;
  std::vector<Band> sink_bands;
  std::vector<std::string> warnings;  // e.g. empty bands that were dropped
};

struct ProtocolOptions {
  ProtocolMode mode = ProtocolMode::raster;
  int n_aux = 1;               // auxiliaries per band in static-multi mode
  double raster_period = 0.0;  // 0 -> duration / 10
};

/// Sources cover [lo, omega_c], sinks cover [omega_c, hi].
Protocol ground_state_protocol(const Band& spectrum, double omega_c, double duration,
                               const ProtocolOptions& options = {});

/// Sources cover [omega_c, hi], sinks cover [lo, omega_c].
Protocol highest_state_protocol(const Band& spectrum, double omega_c, double duration,
                                const ProtocolOptions& options = {});

/// One source on [omega_minus, omega_plus], sinks on the two outer bands.
/// Empty outer bands are dropped and reported in `warnings`.
Protocol excited_window_protocol(double omega_minus, double omega_plus, const Band& spectrum,
                                 double duration, const ProtocolOptions& options = {});

/// [lo, hi] widened by `pad` times its width on each side.
Band padded(const Band& band, double pad);

// CSV with header "aux,role,kind,t,delta". Constant schedules take one row,
// sawtooth two rows (t=0 -> lo, t=period -> hi), piecewise one row per
// breakpoint. Numbers use 17 significant digits, so a round trip is exact.
void write_schedules_csv(std::ostream& os, const std::vector<AuxSchedule>& schedules);
std::vector<AuxSchedule> read_schedules_csv(std::istream& is);

}  // namespace dprep

#endif  // DPREP_SCHEDULES_HPP
