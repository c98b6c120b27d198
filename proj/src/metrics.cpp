#include "gsched/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "gsched/errors.hpp"

namespace gsched {

void UtilizationTimeline::record(std::int64_t t, int allocated) {
  if (allocated < 0 || (total_gpus > 0 && allocated > total_gpus))
    throw EngineError("allocated gpus out of range in timeline");
  if (!points.empty()) {
    if (t < points.back().t)
      throw EngineError("timeline timestamps must not decrease");
    if (t == points.back().t) {
      points.back().allocated = allocated;
      return;
    }
    if (points.back().allocated == allocated) return;  // no change, skip
  }
  points.push_back({t, allocated});
}

Metric parse_metric(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (n == "wait") return Metric::wait;
  if (n == "jct") return Metric::jct;
  if (n == "bsld") return Metric::bsld;
  if (n == "utilization" || n == "util") return Metric::utilization;
  throw ConfigError("unknown metric: " + name);
}

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::wait: return "wait";
    case Metric::jct: return "jct";
    case Metric::bsld: return "bsld";
    case Metric::utilization: return "utilization";
  }
  return "wait";
}

namespace {
void check_outcome(const JobOutcome& o) {
  if (o.start < o.submit || o.end < o.start)
    throw EngineError("inconsistent outcome for job " + o.job_id);
}
}  // namespace

double wait_time(const JobOutcome& o) {
  check_outcome(o);
  return static_cast<double>(o.start - o.submit);
}

double jct(const JobOutcome& o) {
  check_outcome(o);
  return static_cast<double>(o.end - o.submit);
}

double bsld(const JobOutcome& o, double tau) {
  check_outcome(o);
  if (tau <= 0) throw ConfigError("bsld tau must be positive");
  double wait = static_cast<double>(o.start - o.submit);
  double run = static_cast<double>(o.end - o.start);
  return std::max((wait + run) / std::max(run, tau), 1.0);
}

double utilization(const UtilizationTimeline& tl, std::int64_t h_start,
                   std::int64_t h_end) {
  if (h_end <= h_start) throw ConfigError("empty utilization horizon");
  if (tl.total_gpus <= 0) throw ConfigError("timeline without gpu capacity");
  if (tl.points.empty()) return 0.0;
  double area = 0.0;
  // allocation is 0 before the first point, then piecewise constant
  for (std::size_t i = 0; i < tl.points.size(); ++i) {
    std::int64_t seg_start = std::max(tl.points[i].t, h_start);
    std::int64_t seg_end =
        (i + 1 < tl.points.size()) ? std::min(tl.points[i + 1].t, h_end) : h_end;
    if (seg_end > seg_start)
      area += static_cast<double>(seg_end - seg_start) * tl.points[i].allocated;
  }
  return area / (static_cast<double>(h_end - h_start) * tl.total_gpus);
}

double aggregate_score(const std::vector<JobOutcome>& outcomes, Metric m,
                       double tau) {
  if (m == Metric::utilization)
    throw ConfigError("utilization aggregates over a timeline, not outcomes");
  double total = 0.0;
  for (const auto& o : outcomes) {
    switch (m) {
      case Metric::wait: total += wait_time(o); break;
      case Metric::jct: total += jct(o); break;
      case Metric::bsld: total += bsld(o, tau); break;
      default: break;
    }
  }
  return total;
}

}  // namespace gsched
