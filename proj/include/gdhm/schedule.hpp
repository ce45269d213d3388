#pragma once

#include <cstdint>

#include "gdhm/common.hpp"

namespace gdhm {

// Three-phase learning-rate schedule: linear warmup from start to peak over
// [0, warmup_frac*total], constant peak through stable_frac*total, then
// exponential decay to end at total. Phases are fractions so desk-scale
// totals keep the shape; with total=100K and the 0.2/0.8 defaults the
// boundaries land on the 20K/80K milestones.
struct ScheduleSpec {
  double start = 1e-10;
  double peak = 1e-5;
  double end = 1e-7;  // default peak/100
  double warmup_frac = 0.2;
  double stable_frac = 0.8;
  int64_t total = 100000;

  static ScheduleSpec make(double start, double peak, double end, double warmup_frac,
                           double stable_frac, int64_t total);
  static ScheduleSpec flat(double rate, int64_t total);  // constant with default decay
  void validate() const;
};

double schedule_rate(const ScheduleSpec& spec, int64_t iteration);

}  // namespace gdhm
