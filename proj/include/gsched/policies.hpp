#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsched/trace.hpp"

namespace gsched {

enum class PolicyKind { fifo, sjf, wfp3, unicep, f1, slurm_mf };
PolicyKind parse_policy(const std::string& name);
std::string policy_name(PolicyKind k);

// Which runtime the policy observes: ground truth while training, the user
// estimate at evaluation time. The clock always runs on ground truth.
enum class RuntimeSource { actual, requested };

struct PriorityContext {
  std::int64_t now = 0;
  RuntimeSource runtime_source = RuntimeSource::requested;
  const std::vector<const JobRecord*>* queue = nullptr;
  const std::unordered_map<std::string, double>* user_gpu_seconds = nullptr;
  int total_gpus = 0;
  // derived once per scheduling pass
  std::int64_t req_time_min = 0;
  std::int64_t req_time_max = 0;
};

PriorityContext make_priority_context(
    std::int64_t now, const std::vector<const JobRecord*>& queue,
    RuntimeSource source,
    const std::unordered_map<std::string, double>& user_gpu_seconds,
    int total_gpus);

// Higher score schedules first for every policy; formulas that are
// conventionally minimized enter negated.
double priority(PolicyKind kind, const JobRecord& job,
                const PriorityContext& ctx);

// Permutation of queue indices, descending score; ties broken by earlier
// submit_time then lexicographic job_id.
std::vector<std::size_t> rank_order(PolicyKind kind,
                                    const std::vector<const JobRecord*>& queue,
                                    const PriorityContext& ctx);

}  // namespace gsched
