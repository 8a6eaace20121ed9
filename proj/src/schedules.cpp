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

#include "dprep/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "dprep/types.hpp"

namespace dprep {

DetuningSchedule DetuningSchedule::constant(double value) {
  if (!std::isfinite(value)) throw ConfigError("detuning must be finite");
  DetuningSchedule s;
  s.kind_ = ScheduleKind::constant;
  s.values_ = {value};
  s.times_ = {0.0};
  return s;
}

DetuningSchedule DetuningSchedule::sawtooth(double lo, double hi, double period) {
  if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("raster period must be positive");
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("raster band must be finite");
  DetuningSchedule s;
  s.kind_ = ScheduleKind::sawtooth;
  s.times_ = {0.0, period};
  s.values_ = {lo, hi};
  s.period_ = period;
  return s;
}

DetuningSchedule DetuningSchedule::piecewise(std::vector<double> times, std::vector<double> values) {
  if (times.empty() || times.size() != values.size()) {
    throw ConfigError("piecewise schedule needs matching, non-empty time and value lists");
  }
  for (size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k]) || !std::isfinite(values[k])) throw ConfigError("schedule entries must be finite");
    if (k > 0 && times[k] < times[k - 1]) throw ConfigError("schedule times must be non-decreasing");
  }
  if (times.front() < 0.0) throw ConfigError("schedule times must be non-negative");
  DetuningSchedule s;
  s.kind_ = ScheduleKind::piecewise;
  s.times_ = std::move(times);
  s.values_ = std::move(values);
  s.cumulative_.assign(s.times_.size(), 0.0);
  // held at the first value on [0, t0]
  s.cumulative_[0] = s.values_[0] * s.times_[0];
  for (size_t k = 1; k < s.times_.size(); ++k) {
    s.cumulative_[k] =
        s.cumulative_[k - 1] + 0.5 * (s.values_[k] + s.values_[k - 1]) * (s.times_[k] - s.times_[k - 1]);
  }
  return s;
}

double DetuningSchedule::operator()(double t) const {
  switch (kind_) {
    case ScheduleKind::constant:
      return values_[0];
    case ScheduleKind::sawtooth: {
      const double x = t / period_;
      const double frac = x - std::floor(x);
      return values_[0] + (values_[1] - values_[0]) * frac;
    }
    case ScheduleKind::piecewise: {
      if (t < times_.front()) return values_.front();
      // last breakpoint with time <= t; for repeated times this is the later one
      const auto it = std::upper_bound(times_.begin(), times_.end(), t);
      const size_t k = static_cast<size_t>(it - times_.begin()) - 1;
      if (k + 1 >= times_.size()) return values_.back();
      const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
      return values_[k] + (values_[k + 1] - values_[k]) * w;
    }
  }
  return 0.0;
}

double DetuningSchedule::integral(double t) const {
  switch (kind_) {
    case ScheduleKind::constant:
      return values_[0] * t;
    case ScheduleKind::sawtooth: {
      const double lo = values_[0];
      const double slope = (values_[1] - values_[0]) / period_;
      const double cycles = std::floor(t / period_);
      const double tau = t - cycles * period_;
      return cycles * period_ * 0.5 * (values_[0] + values_[1]) + lo * tau + 0.5 * slope * tau * tau;
    }
    case ScheduleKind::piecewise: {
      if (t <= times_.front()) return values_.front() * t;
      const auto it = std::upper_bound(times_.begin(), times_.end(), t);
      const size_t k = static_cast<size_t>(it - times_.begin()) - 1;
      if (k + 1 >= times_.size()) return cumulative_.back() + values_.back() * (t - times_.back());
      const double dt = t - times_[k];
      const double slope = (values_[k + 1] - values_[k]) / (times_[k + 1] - times_[k]);
      return cumulative_[k] + values_[k] * dt + 0.5 * slope * dt * dt;
    }
  }
  return 0.0;
}

std::pair<double, double> DetuningSchedule::range() const {
  const auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
  return {*lo, *hi};
}

std::string role_name(AuxRole role) { return role == AuxRole::source ? "source" : "sink"; }

AuxRole parse_role(const std::string& name) {
  if (name == "source") return AuxRole::source;
  if (name == "sink") return AuxRole::sink;
  throw ConfigError("unknown auxiliary role '" + name + "'");
}

ProtocolMode parse_protocol_mode(const std::string& name) {
  if (name == "raster") return ProtocolMode::raster;
  if (name == "static-multi") return ProtocolMode::static_multi;
  throw ConfigError("unknown protocol mode '" + name + "'");
}

Band padded(const Band& band, double pad) {
  const double w = band.width();
  return {band.lo - pad * w, band.hi + pad * w};
}

namespace {

void check_options(const ProtocolOptions& options, double duration) {
  if (!(duration > 0.0)) throw ConfigError("protocol duration must be positive");
  if (options.n_aux < 1) throw ConfigError("need at least one auxiliary per band");
  if (options.raster_period < 0.0) throw ConfigError("raster period must be positive");
}

// Schedules covering one band: a single sawtooth, or n constants at the
// interior points lo + k (hi - lo) / (n + 1).
void cover(Protocol& p, AuxRole role, const Band& band, double duration, const ProtocolOptions& options) {
  if (options.mode == ProtocolMode::raster) {
    const double period = options.raster_period > 0.0 ? options.raster_period : duration / 10.0;
    p.aux.push_back({role, DetuningSchedule::sawtooth(band.lo, band.hi, period)});
  } else {
    for (int k = 1; k <= options.n_aux; ++k) {
      const double d = band.lo + band.width() * k / (options.n_aux + 1);
      p.aux.push_back({role, DetuningSchedule::constant(d)});
    }
  }
  (role == AuxRole::source ? p.source_bands : p.sink_bands).push_back(band);
}

Protocol two_band(const Band& spectrum, double omega_c, double duration, const ProtocolOptions& options,
                  AuxRole lower_role) {
  check_options(options, duration);
  if (!(spectrum.lo < spectrum.hi)) throw ConfigError("spectrum range must satisfy lo < hi");
  if (!(omega_c > spectrum.lo && omega_c < spectrum.hi)) {
    throw ConfigError("omega_c must lie strictly inside the spectrum range");
  }
  const AuxRole upper_role = lower_role == AuxRole::source ? AuxRole::sink : AuxRole::source;
  Protocol p;
  // sources first, then sinks
  const Band lower{spectrum.lo, omega_c};
  const Band upper{omega_c, spectrum.hi};
  if (lower_role == AuxRole::source) {
    cover(p, lower_role, lower, duration, options);
    cover(p, upper_role, upper, duration, options);
  } else {
    cover(p, upper_role, upper, duration, options);
    cover(p, lower_role, lower, duration, options);
  }
  return p;
}

}  // namespace

Protocol ground_state_protocol(const Band& spectrum, double omega_c, double duration,
                               const ProtocolOptions& options) {
  return two_band(spectrum, omega_c, duration, options, AuxRole::source);
}

Protocol highest_state_protocol(const Band& spectrum, double omega_c, double duration,
                                const ProtocolOptions& options) {
  return two_band(spectrum, omega_c, duration, options, AuxRole::sink);
}

Protocol excited_window_protocol(double omega_minus, double omega_plus, const Band& spectrum, double duration,
                                 const ProtocolOptions& options) {
  check_options(options, duration);
  if (!(omega_minus < omega_plus)) throw ConfigError("window requires omega_minus < omega_plus");
  if (!(spectrum.lo < spectrum.hi)) throw ConfigError("spectrum range must satisfy lo < hi");
  if (omega_minus < spectrum.lo || omega_plus > spectrum.hi) {
    throw ConfigError("window must lie inside the spectrum range");
  }
  Protocol p;
  cover(p, AuxRole::source, {omega_minus, omega_plus}, duration, options);
  if (omega_minus > spectrum.lo) {
    cover(p, AuxRole::sink, {spectrum.lo, omega_minus}, duration, options);
  } else {
    p.warnings.push_back("lower sink band is empty");
  }
  if (omega_plus < spectrum.hi) {
    cover(p, AuxRole::sink, {omega_plus, spectrum.hi}, duration, options);
  } else {
    p.warnings.push_back("upper sink band is empty");
  }
  return p;
}

void write_schedules_csv(std::ostream& os, const std::vector<AuxSchedule>& schedules) {
  os << "aux,role,kind,t,delta\n";
  char buf[128];
  for (size_t a = 0; a < schedules.size(); ++a) {
    const DetuningSchedule& s = schedules[a].schedule;
    const char* kind = s.kind() == ScheduleKind::constant   ? "constant"
                       : s.kind() == ScheduleKind::sawtooth ? "sawtooth"
                                                            : "piecewise";
    for (size_t k = 0; k < s.times().size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%s,%s,%.17g,%.17g\n", a, role_name(schedules[a].role).c_str(), kind,
                    s.times()[k], s.values()[k]);
      os << buf;
    }
  }
}

std::vector<AuxSchedule> read_schedules_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "aux,role,kind,t,delta") {
    throw ConfigError("schedule CSV must start with header 'aux,role,kind,t,delta'");
  }
  struct Rows {
    std::string role, kind;
    std::vector<double> t, d;
  };
  std::vector<Rows> rows;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string fields[5];
    for (auto& f : fields) {
      if (!std::getline(ss, f, ',')) throw ConfigError("schedule CSV line " + std::to_string(line_no) + " is short");
    }
    size_t aux = 0;
    double t = 0.0, d = 0.0;
    try {
      aux = std::stoul(fields[0]);
      t = std::stod(fields[3]);
      d = std::stod(fields[4]);
    } catch (const std::exception&) {
      throw ConfigError("schedule CSV line " + std::to_string(line_no) + " has a bad number");
    }
    if (aux != rows.size() && aux + 1 != rows.size()) {
      throw ConfigError("schedule CSV auxiliaries must be numbered consecutively");
    }
    if (aux == rows.size()) rows.push_back({fields[1], fields[2], {}, {}});
    Rows& r = rows.back();
    if (r.role != fields[1] || r.kind != fields[2]) {
      throw ConfigError("schedule CSV line " + std::to_string(line_no) + " changes role or kind mid-schedule");
    }
    r.t.push_back(t);
    r.d.push_back(d);
  }
  std::vector<AuxSchedule> out;
  for (Rows& r : rows) {
    AuxSchedule a;
    a.role = parse_role(r.role);
    if (r.kind == "constant") {
      if (r.t.size() != 1) throw ConfigError("constant schedule takes exactly one row");
      a.schedule = DetuningSchedule::constant(r.d[0]);
    } else if (r.kind == "sawtooth") {
      if (r.t.size() != 2 || r.t[0] != 0.0) throw ConfigError("sawtooth schedule takes rows at t=0 and t=period");
      a.schedule = DetuningSchedule::sawtooth(r.d[0], r.d[1], r.t[1]);
    } else if (r.kind == "piecewise") {
      a.schedule = DetuningSchedule::piecewise(r.t, r.d);
    } else {
      throw ConfigError("unknown schedule kind '" + r.kind + "'");
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace dprep
