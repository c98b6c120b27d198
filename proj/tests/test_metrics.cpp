#include "doctest.h"
#include "gsched/errors.hpp"
#include "gsched/metrics.hpp"

using namespace gsched;

namespace {

JobOutcome outcome(std::int64_t submit, std::int64_t start, std::int64_t run) {
  JobOutcome o;
  o.job_id = "j";
  o.submit = submit;
  o.start = start;
  o.end = start + run;
  return o;
}

}  // namespace

TEST_CASE("wait, jct, and bounded slowdown match hand-computed values") {
  JobOutcome o = outcome(10, 100, 10);
  CHECK(wait_time(o) == doctest::Approx(90.0));
  CHECK(jct(o) == doctest::Approx(100.0));
  // (90 + 10) / max(10, 10) = 10
  CHECK(bsld(o) == doctest::Approx(10.0));

  // short jobs are shielded by tau: run 2, wait 0 -> max(2/10, 1) = 1
  CHECK(bsld(outcome(0, 0, 2)) == doctest::Approx(1.0));

  // tau only floors the denominator
  CHECK(bsld(outcome(0, 30, 20), 10.0) == doctest::Approx(2.5));
  CHECK(bsld(outcome(0, 30, 20), 40.0) == doctest::Approx(1.25));
}

TEST_CASE("slowdown never drops below one") {
  CHECK(bsld(outcome(0, 0, 3600)) == doctest::Approx(1.0));
}

TEST_CASE("inconsistent outcomes are rejected") {
  JobOutcome bad = outcome(10, 5, 10);  // started before submit
  CHECK_THROWS_AS(wait_time(bad), EngineError);
  JobOutcome tangled = outcome(0, 10, 10);
  tangled.end = 5;  // ends before it starts
  CHECK_THROWS_AS(jct(tangled), EngineError);
}

TEST_CASE("aggregate scores are sums") {
  std::vector<JobOutcome> v = {outcome(0, 500, 100), outcome(10, 260, 100)};
  CHECK(aggregate_score(v, Metric::wait) == doctest::Approx(750.0));
  CHECK(aggregate_score(v, Metric::jct) == doctest::Approx(950.0));
  // bsld: (500+100)/100 + (250+100)/100 = 6 + 3.5
  CHECK(aggregate_score(v, Metric::bsld) == doctest::Approx(9.5));
  CHECK_THROWS_AS(aggregate_score(v, Metric::utilization), ConfigError);
}

TEST_CASE("frozen pair: one instant start plus one waiting job") {
  std::vector<JobOutcome> v = {outcome(0, 0, 50), outcome(0, 90, 10)};
  CHECK(aggregate_score(v, Metric::wait) == doctest::Approx(90.0));
  // 1.0 + (90+10)/10 = 11.0
  CHECK(aggregate_score(v, Metric::bsld) == doctest::Approx(11.0));
}

TEST_CASE("utilization integrates a step function over the horizon") {
  UtilizationTimeline tl;
  tl.total_gpus = 10;
  tl.record(0, 5);
  tl.record(10, 10);
  CHECK(utilization(tl, 0, 20) == doctest::Approx(0.75));
  // clamped to a sub-window: only the first segment
  CHECK(utilization(tl, 0, 10) == doctest::Approx(0.5));
  // zero before the first sample
  CHECK(utilization(tl, -10, 10) == doctest::Approx(0.25));
}

TEST_CASE("same-timestamp records coalesce to the last value") {
  UtilizationTimeline tl;
  tl.total_gpus = 10;
  tl.record(0, 2);
  tl.record(0, 8);
  CHECK(utilization(tl, 0, 10) == doctest::Approx(0.8));
  CHECK(tl.points.size() == 1);
}

TEST_CASE("timeline validates inputs") {
  UtilizationTimeline tl;
  tl.total_gpus = 10;
  tl.record(5, 5);
  CHECK_THROWS_AS(tl.record(4, 5), EngineError);   // time went backwards
  CHECK_THROWS_AS(tl.record(6, -1), EngineError);  // out of range
  CHECK_THROWS_AS(tl.record(6, 15), EngineError);
  CHECK_THROWS_AS(utilization(tl, 10, 10), ConfigError);  // empty horizon
}

TEST_CASE("metric names parse both ways") {
  CHECK(parse_metric("wait") == Metric::wait);
  CHECK(parse_metric("BSLD") == Metric::bsld);
  CHECK(parse_metric("util") == Metric::utilization);
  CHECK(metric_name(Metric::utilization) == "utilization");
  CHECK_THROWS_AS(parse_metric("latency"), ConfigError);
}
