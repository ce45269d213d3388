#include <doctest.h>

#include "gdhm/adam.hpp"
#include "gdhm/schedule.hpp"

using namespace gdhm;

TEST_CASE("schedule reproduces the 100K milestones exactly") {
  // pose/shape group: 1e-10 -> 1e-5 peak; expression group: -> 1e-4 peak
  const ScheduleSpec pose = ScheduleSpec::make(1e-10, 1e-5, -1, 0.2, 0.8, 100000);
  const ScheduleSpec expr = ScheduleSpec::make(1e-10, 1e-4, -1, 0.2, 0.8, 100000);
  CHECK(schedule_rate(pose, 0) == 1e-10);
  CHECK(schedule_rate(expr, 0) == 1e-10);
  CHECK(schedule_rate(pose, 20000) == 1e-5);
  CHECK(schedule_rate(pose, 50000) == 1e-5);
  CHECK(schedule_rate(pose, 80000) == 1e-5);
  CHECK(schedule_rate(expr, 20000) == 1e-4);
  CHECK(schedule_rate(expr, 50000) == 1e-4);
  CHECK(schedule_rate(expr, 80000) == 1e-4);
  CHECK(schedule_rate(pose, 100000) == 1e-5 / 100.0);
  CHECK(schedule_rate(expr, 100000) == 1e-4 / 100.0);
}

TEST_CASE("schedule is continuous at phase boundaries") {
  const ScheduleSpec s = ScheduleSpec::make(1e-10, 3e-4, -1, 0.2, 0.8, 50000);
  const int64_t w = 10000, st = 40000;
  CHECK(std::abs(schedule_rate(s, w - 1) - schedule_rate(s, w)) / s.peak < 1e-4);
  CHECK(std::abs(schedule_rate(s, w) - s.peak) / s.peak < 1e-12);
  CHECK(std::abs(schedule_rate(s, st) - s.peak) / s.peak < 1e-12);
  CHECK(std::abs(schedule_rate(s, st + 1) - s.peak) / s.peak < 1e-3);
  // monotone decay to the floor
  double prev = schedule_rate(s, st);
  for (int64_t it = st + 1; it <= 50000; it += 500) {
    const double r = schedule_rate(s, it);
    CHECK(r <= prev);
    prev = r;
  }
  CHECK(schedule_rate(s, 50000) == s.end);
}

TEST_CASE("schedule input validation") {
  CHECK_THROWS_AS(ScheduleSpec::make(1e-3, 1e-5, -1, 0.2, 0.8, 100), data_error);
  CHECK_THROWS_AS(ScheduleSpec::make(1e-10, 1e-5, -1, 0.9, 0.8, 100), data_error);
  const ScheduleSpec s = ScheduleSpec::make(1e-10, 1e-5, -1, 0.2, 0.8, 100);
  CHECK_THROWS_AS(schedule_rate(s, -1), data_error);
  CHECK_THROWS_AS(schedule_rate(s, 101), data_error);
  CHECK(schedule_rate(ScheduleSpec::flat(5e-3, 100), 0) == 5e-3);
  CHECK(schedule_rate(ScheduleSpec::flat(5e-3, 100), 60) == 5e-3);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient at zero state leaves parameters untouched") {
    AdamState a;
    a.init(4);
    VectorXd p(4);
    p << 1, -2, 3, -4;
    const VectorXd p0 = p;
    const VectorXd g = VectorXd::Zero(4);
    a.step(p.data(), g.data(), 1e-2);
    CHECK(p == p0);
  }
  SUBCASE("two steps match a hand-rolled scalar recomputation") {
    AdamState a;
    a.init(2);
    a.eps = 1e-15;
    VectorXd p(2);
    p << 0.5, -1.0;
    VectorXd g1(2), g2(2);
    g1 << 0.3, -0.2;
    g2 << -0.1, 0.4;
    const double lr = 1e-2;
    a.step(p.data(), g1.data(), lr);
    a.step(p.data(), g2.data(), lr);

    double m[2] = {0, 0}, v[2] = {0, 0}, q[2] = {0.5, -1.0};
    const double b1 = 0.9, b2 = 0.999;
    const double gs[2][2] = {{0.3, -0.2}, {-0.1, 0.4}};
    for (int t = 1; t <= 2; ++t)
      for (int i = 0; i < 2; ++i) {
        m[i] = b1 * m[i] + (1 - b1) * gs[t - 1][i];
        v[i] = b2 * v[i] + (1 - b2) * gs[t - 1][i] * gs[t - 1][i];
        const double mh = m[i] / (1 - std::pow(b1, t));
        const double vh = v[i] / (1 - std::pow(b2, t));
        q[i] -= lr * mh / (std::sqrt(vh) + 1e-15);
      }
    CHECK(p[0] == doctest::Approx(q[0]).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(q[1]).epsilon(1e-14));
  }
  SUBCASE("row removal keeps surviving state aligned") {
    AdamState a;
    a.init(9);  // 3 rows of width 3
    for (int i = 0; i < 9; ++i) {
      a.m[i] = i;
      a.v[i] = 10 + i;
    }
    a.remove_rows({1}, 3);
    CHECK(a.size() == 6);
    CHECK(a.m[0] == 0);
    CHECK(a.m[3] == 6);
    CHECK(a.v[5] == 18);
  }
}
