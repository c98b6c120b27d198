#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gsched {

// One job as the simulator sees it. Times are integer seconds relative to the
// trace epoch; requested_time is the user estimate, actual_runtime the ground
// truth that drives the clock.
struct JobRecord {
  std::string job_id;
  std::string user_id;
  std::string vc_id;
  std::int64_t submit_time = 0;
  std::int64_t requested_time = 1;
  std::int64_t actual_runtime = 1;
  int requested_gpus = 1;
  std::string gpu_type;  // open label set; "MISC" matches any node type
  std::optional<int> requested_cpus;
  std::optional<double> requested_mem_gb;

  bool operator==(const JobRecord&) const = default;
};

struct TraceMeta {
  std::string source;        // file path or "synthetic"
  std::string cluster_hint;  // adapter name or empty
};

// jobs sorted by (submit_time, job_id); job_id unique
struct TraceSet {
  std::vector<JobRecord> jobs;
  std::int64_t epoch = 0;
  TraceMeta meta;
};

enum class TraceFormat { canonical, philly, helios, alibaba };

TraceFormat parse_trace_format(const std::string& name);
std::string trace_format_name(TraceFormat fmt);

struct LoadReport {
  std::size_t rows_seen = 0;
  std::size_t rows_dropped = 0;
};

// Headered CSV in; canonical column names for TraceFormat::canonical, the
// per-cluster adapter mappings otherwise (see README for the expected
// columns). Rows missing mandatory fields are dropped and counted.
TraceSet load_trace(const std::string& path, TraceFormat fmt,
                    LoadReport* report = nullptr);

// Canonical headered CSV; load_trace(save_trace(t)) round-trips.
void save_trace(const TraceSet& trace, const std::string& path);

struct GenConfig {
  int job_count = 1024;
  double arrival_rate = 0.02;     // jobs per second
  double runtime_median_s = 600;  // e^mu of the log-normal runtime
  double runtime_sigma = 1.2;     // log-space spread, 0 = constant runtimes
  std::vector<std::pair<int, double>> gpu_demand = {
      {1, 0.5}, {2, 0.2}, {4, 0.15}, {8, 0.1}, {16, 0.05}};
  std::vector<std::pair<std::string, double>> gpu_type_mix = {{"V100", 1.0}};
  // requested_time = actual * U(lo,hi); [1,1] means truthful estimates
  double estimate_noise_lo = 1.0;
  double estimate_noise_hi = 1.0;
  int user_count = 16;
  std::uint64_t seed = 1;
};

// Deterministic in the seed: exponential inter-arrival gaps, log-normal
// runtimes, weighted gpu demand and type mix.
TraceSet synthesize_trace(const GenConfig& cfg);

// Prefix split: first floor(fraction*n) jobs train, rest eval.
std::pair<TraceSet, TraceSet> split_trace(const TraceSet& trace,
                                          double train_fraction);

// Contiguous window of `size` jobs at a uniformly random start offset,
// submit times re-based so the first job arrives at 0.
std::vector<JobRecord> sample_batch(const TraceSet& trace, std::size_t size,
                                    std::uint64_t seed);

}  // namespace gsched
