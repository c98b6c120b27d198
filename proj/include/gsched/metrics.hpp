#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gsched {

struct JobOutcome {
  std::string job_id;
  std::int64_t submit = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;
  int gpus = 1;
};

// Step function of allocated GPUs over time; timestamps strictly increasing.
struct UtilizationTimeline {
  struct Point {
    std::int64_t t = 0;
    int allocated = 0;
  };
  std::vector<Point> points;
  int total_gpus = 0;

  // coalesces same-timestamp updates into the last value
  void record(std::int64_t t, int allocated);
};

inline constexpr double kDefaultBsldTau = 10.0;

enum class Metric { wait, jct, bsld, utilization };
Metric parse_metric(const std::string& name);
std::string metric_name(Metric m);

double wait_time(const JobOutcome& o);
double jct(const JobOutcome& o);
// bounded slowdown: max((wait + run) / max(run, tau), 1)
double bsld(const JobOutcome& o, double tau = kDefaultBsldTau);

// time-weighted mean of allocated/total over [h_start, h_end)
double utilization(const UtilizationTimeline& tl, std::int64_t h_start,
                   std::int64_t h_end);

// sum over outcomes; utilization is timeline-based and rejected here
double aggregate_score(const std::vector<JobOutcome>& outcomes, Metric m,
                       double tau = kDefaultBsldTau);

}  // namespace gsched
