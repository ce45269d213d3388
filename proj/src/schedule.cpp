#include "gdhm/schedule.hpp"

namespace gdhm {

ScheduleSpec ScheduleSpec::make(double start, double peak, double end, double warmup_frac,
                                double stable_frac, int64_t total) {
  ScheduleSpec s;
  s.start = start;
  s.peak = peak;
  s.end = end > 0 ? end : peak / 100.0;
  s.warmup_frac = warmup_frac;
  s.stable_frac = stable_frac;
  s.total = total;
  s.validate();
  return s;
}

ScheduleSpec ScheduleSpec::flat(double rate, int64_t total) {
  return make(rate, rate, rate / 100.0, 0.0, 0.8, total);
}

void ScheduleSpec::validate() const {
  if (start > peak) throw data_error("schedule: start rate must not exceed peak");
  if (!(warmup_frac >= 0 && warmup_frac <= stable_frac && stable_frac <= 1.0))
    throw data_error("schedule: need 0 <= warmup_frac <= stable_frac <= 1");
  if (end <= 0 || peak <= 0) throw data_error("schedule: rates must be positive");
  if (total < 1) throw data_error("schedule: total iterations must be >= 1");
}

double schedule_rate(const ScheduleSpec& s, int64_t iteration) {
  if (iteration < 0 || iteration > s.total)
    throw data_error("schedule_rate: iteration out of range");
  const double it = static_cast<double>(iteration);
  const double w_end = s.warmup_frac * static_cast<double>(s.total);
  const double st_end = s.stable_frac * static_cast<double>(s.total);
  if (it < w_end) return s.start + (s.peak - s.start) * (it / w_end);
  if (it <= st_end) return s.peak;
  if (iteration >= s.total) return s.end;
  return s.peak * std::pow(s.end / s.peak, (it - st_end) / (static_cast<double>(s.total) - st_end));
}

}  // namespace gdhm
