#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gsched/trace.hpp"

namespace gsched {

struct NodeSpec {
  std::string node_id;
  std::string gpu_type;
  std::string vc_id;
  int gpus = 8;
  int cpus = 32;
  std::int64_t mem_mb = 256 * 1024;
};

// Proportional resource model: jobs without explicit cpu/mem requests consume
// cpu_per_gpu and mem_per_gpu_gb for every GPU they hold.
struct ClusterSpec {
  std::vector<NodeSpec> nodes;
  int cpu_per_gpu = 4;
  double mem_per_gpu_gb = 32.0;

  int total_gpus() const;
  std::int64_t mem_per_gpu_mb() const;
};

struct NodeGroup {
  int count = 1;
  int gpus = 8;
  std::string gpu_type = "V100";
  std::string vc_id = "default";
  int cpus = -1;        // -1: gpus * cpu_per_gpu
  double mem_gb = -1.0; // -1: gpus * mem_per_gpu_gb
};

// "count:4,gpus:8,type:V100,vc:default[,cpus:32][,mem_gb:256]"
NodeGroup parse_node_group(const std::string& text);

ClusterSpec build_cluster(const std::vector<NodeGroup>& groups,
                          int cpu_per_gpu = 4, double mem_per_gpu_gb = 32.0);

// Five virtual clusters of 8-GPU nodes: 16+12+10+8+8 = 54 nodes, 432 GPUs.
ClusterSpec helios_cluster();

struct PlacementPlan {
  enum class Style { pack, spread, mixed };
  std::vector<std::pair<std::string, int>> assignments;  // (node_id, gpus)
  Style style = Style::pack;

  int total_gpus() const;
};

struct NodeState {
  int free_gpus = 0;
  int free_cpus = 0;
  std::int64_t free_mem_mb = 0;
};

// Mutable occupancy over a fixed ClusterSpec. The spec must outlive every
// state built from it; states are cheap to copy for what-if probing.
class ClusterState {
 public:
  ClusterState() = default;
  explicit ClusterState(const ClusterSpec& spec);

  const ClusterSpec& spec() const { return *spec_; }
  const std::vector<NodeState>& nodes() const { return node_state_; }
  int node_index(const std::string& node_id) const;  // -1 when unknown

  void allocate(const JobRecord& job, const PlacementPlan& plan);
  PlacementPlan release(const std::string& job_id);
  bool has_job(const std::string& job_id) const;

  int total_free_gpus() const;
  int allocated_gpus() const;
  std::map<std::string, int> free_gpus_by_type() const;

  const std::unordered_map<std::string, PlacementPlan>& allocations() const {
    return allocations_;
  }

  // every resource non-negative and allocations + free == capacity
  bool conservation_ok() const;

  std::uint64_t occupancy_digest() const;

 private:
  // cpu/mem demand is derived from the job record, so release keeps the
  // fields it needs rather than requiring the caller to pass the job back
  struct DemandBasis {
    int requested_gpus = 1;
    std::optional<int> requested_cpus;
    std::optional<double> requested_mem_gb;
  };

  const ClusterSpec* spec_ = nullptr;
  std::vector<NodeState> node_state_;
  std::unordered_map<std::string, int> index_;
  std::unordered_map<std::string, PlacementPlan> allocations_;
  std::unordered_map<std::string, DemandBasis> demand_basis_;
};

// Per-node cpu/mem demand for q of the job's GPUs; explicit job requests
// override the proportional model and spread pro-rata across nodes.
int cpu_demand(const ClusterSpec& spec, const JobRecord& job, int q);
std::int64_t mem_demand_mb(const ClusterSpec& spec, const JobRecord& job, int q);

// Canonical candidate family: pack on one node, plus an even spread over m
// nodes for every divisor m of requested_gpus with 1 < m <= requested_gpus.
// Node choice is deterministic (descending free GPUs, then ascending id);
// plans are grouped per matching gpu_type class and ordered by node count.
std::vector<PlacementPlan> candidate_placements(const ClusterState& state,
                                                const JobRecord& job);
int count_placements(const ClusterState& state, const JobRecord& job);
bool can_schedule_now(const ClusterState& state, const JobRecord& job);

}  // namespace gsched
