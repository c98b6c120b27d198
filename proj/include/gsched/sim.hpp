#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gsched/allocator.hpp"
#include "gsched/cluster.hpp"
#include "gsched/metrics.hpp"
#include "gsched/policies.hpp"
#include "gsched/trace.hpp"

namespace gsched {

enum class SchedulerMode { base, rl };

struct SimConfig {
  SchedulerMode mode = SchedulerMode::base;
  PolicyKind policy = PolicyKind::fifo;
  // What queue policies, features, and backfill reservations observe; the
  // event clock always advances on actual runtimes.
  RuntimeSource runtime_source = RuntimeSource::requested;
  bool backfill = true;
  int lookahead = kDefaultLookahead;
  // rl mode only: place the ranked head on its first canonical plan instead
  // of routing the top-k through the solver (the raw-fallback ablation)
  bool direct_placement = false;
  bool collect_log = false;
  double bsld_tau = kDefaultBsldTau;
};

// Supplies the queue ordering for rl-mode episodes (the learned actor lives
// behind this; the engine stays independent of the agent).
class RankProvider {
 public:
  virtual ~RankProvider() = default;
  virtual std::vector<std::size_t> rank(
      const std::vector<const JobRecord*>& queue, const ClusterState& state,
      std::int64_t now) = 0;
};

struct LogEvent {
  std::int64_t t = 0;
  std::string kind;  // arrive|complete|start|backfill_start|reserve
  std::string job_id;
  PlacementPlan plan;            // start kinds only
  std::int64_t reservation = -1; // reserve only
  std::size_t queue_size = 0;
  std::string digest;            // occupancy digest after the event applied
};

struct EpisodeResult {
  std::vector<JobOutcome> outcomes;  // input batch order
  UtilizationTimeline util;
  double score_wait = 0;
  double score_jct = 0;
  double score_bsld = 0;
  double util_fraction = 0;
  std::int64_t makespan = 0;
  int decision_count = 0;
  std::vector<LogEvent> log;
};

// Event-driven episode over one batch. Completions processed before arrivals
// at equal timestamps, then by job id. Base mode starts the ranked head on
// its first feasible canonical plan until the head no longer fits; rl mode
// routes the top-k ranked jobs through the placement solver. When the head
// cannot start and backfill is enabled, lower-ranked jobs that fit now and
// finish before the head's reservation start immediately.
EpisodeResult run_episode(const std::vector<JobRecord>& batch,
                          const ClusterSpec& spec, const SimConfig& cfg,
                          RankProvider* ranker = nullptr);

// Lower-is-better scalar per metric; utilization enters negated.
double episode_score(const EpisodeResult& result, Metric metric);

struct LatencyRow {
  int queue_size = 0;
  int reps = 0;
  double mean_ms = 0;
  double min_ms = 0;
};

// Times one full decision pass (state build + ranking + placement probe) at
// each queue size, holding cluster state fixed. The trace must hold at least
// max(queue_sizes) jobs.
std::vector<LatencyRow> measure_overhead(
    const std::vector<int>& queue_sizes,
    const std::function<void(const std::vector<const JobRecord*>&,
                             const ClusterState&, std::int64_t)>& decision_pass,
    const TraceSet& trace, const ClusterSpec& spec, int reps);

}  // namespace gsched
