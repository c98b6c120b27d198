#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gsched/cluster.hpp"
#include "gsched/policies.hpp"
#include "gsched/trace.hpp"

namespace gsched {

inline constexpr int kMaxQueueRows = 256;
inline constexpr int kObsWidth = 8;
inline constexpr int kCtxWidth = 5;
inline constexpr double kFragThreshold = 0.5;
inline constexpr int kNumWaysCap = 8;

// Stamped into checkpoints; loading rejects a mismatch so a network is never
// fed columns it was not trained on.
inline constexpr const char* kLayoutVersionPro = "ov8.cv5.pro.v1";
inline constexpr const char* kLayoutVersionNaive = "ov8.cv5.naive.v1";

// demand-supply ratio: requested_gpus / max(matching free gpus, 1),
// clamped to [0, requested_gpus]
double dsr(const ClusterState& state, const JobRecord& job);

// free gpus summed over types, minus this job's request, minus the demand of
// queued jobs ahead of it whose type the cluster can serve; may be negative
double future_avail(const ClusterState& state,
                    const std::vector<const JobRecord*>& queue,
                    std::size_t idx);

// cluster fragmentation factor: 1 - sum(free_i^2) / (sum(free_i))^2 over
// nodes; 0 when nothing is free
double cff(const ClusterState& state);

// min-max of requested_gpus * observed_time over the queue; constant -> 0
double job_size(const std::vector<const JobRecord*>& queue, std::size_t idx,
                RuntimeSource source);

// wait / (wait + observed_time), in [0,1)
double urgency(const JobRecord& job, std::int64_t now, RuntimeSource source);

// The 17-feature superset for one queued job; raw values, not normalized.
struct FeatureRow {
  std::string job_id;
  double user_index = 0;
  double vc_index = 0;
  double requested_gpus = 0;
  double observed_time = 0;  // actual or requested per RuntimeSource
  double wait_time = 0;
  double submit_time = 0;
  double gpu_type_index = 0;
  double req_cpus = 0;
  double req_mem_gb = 0;
  double free_nodes = 0;
  double can_schedule_now = 0;
  double num_ways = 0;
  double dsr = 0;
  double future_avail = 0;
  double cff = 0;
  double job_size = 0;  // already min-max normalized over the queue
  double urgency = 0;
};

std::vector<FeatureRow> feature_rows(const ClusterState& state,
                                     const std::vector<const JobRecord*>& queue,
                                     std::int64_t now, RuntimeSource source);

// Engineered 8-column observation per row, min-max normalized over the
// snapshot and clamped to [0,1]:
//   [req_gpus, obs_time, wait, dsr, future_avail, cff, toggled, num_ways]
// toggled carries job_size when cff > kFragThreshold, urgency otherwise.
std::vector<std::array<double, kObsWidth>> sample_features(
    const std::vector<FeatureRow>& rows);

// Raw 8-column fallback (no engineered signals, no sampler):
//   [req_gpus, obs_time, wait, submit, req_cpus, req_mem, type_idx, free_frac]
std::vector<std::array<double, kObsWidth>> naive_features(
    const std::vector<FeatureRow>& rows);

struct StateOptions {
  bool naive = false;
  RuntimeSource runtime_source = RuntimeSource::requested;
};

// Fixed-shape network input: kMaxQueueRows x kObsWidth observation block and
// kMaxQueueRows x kCtxWidth context block, zero-padded past valid_rows.
// When the queue overflows, the earliest 256 submitters are kept.
struct StateMatrix {
  std::vector<double> ov;  // row-major valid+padded observation block
  std::vector<double> cv;  // row-major context block
  int valid_rows = 0;
  std::vector<std::string> row_jobs;
  std::vector<std::int64_t> row_submit;
  std::vector<std::size_t> row_queue_index;  // position in the caller's queue
  std::string layout_version;
};

StateMatrix build_state(const ClusterState& state,
                        const std::vector<const JobRecord*>& queue,
                        std::int64_t now, const StateOptions& opts);

}  // namespace gsched
