#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gsched/cluster.hpp"
#include "gsched/trace.hpp"

namespace gsched {

// Binary-choice placement problem: way1 is the spread-style placement, way2
// the pack-style one. Either may be absent (single-candidate jobs).
struct AllocProblem {
  JobRecord job;
  std::optional<PlacementPlan> way1;
  std::optional<PlacementPlan> way2;
};

struct AllocSolution {
  bool feasible = false;
  int selected_way = 0;  // 1 or 2, 0 when infeasible
  PlacementPlan plan;
  // Occupancy counts per node: the chosen placement plus a maximal fill of
  // the remaining capacity at the proportional per-gpu rates. The objective
  // counts every occupied gpu slot.
  std::vector<std::pair<std::string, int>> occupancy;
  int objective = 0;
};

// Exact solve by enumerating the selector: evaluates each provided way,
// maximizes total occupancy, breaks ties toward lower post-placement
// fragmentation and then toward packing.
AllocSolution solve(const ClusterState& state, const AllocProblem& problem);

// Independent exhaustive check for small instances (<= 8 nodes, <= 8 gpus
// per node): per-way feasibility via trial allocation, per-node occupancy by
// full enumeration. Must agree with solve() on feasibility and objective.
AllocSolution brute_force_oracle(const ClusterState& state,
                                 const AllocProblem& problem);

struct LookaheadEntry {
  std::string job_id;
  bool scheduled = false;
  bool used_solver = false;
  AllocSolution solution;
};

inline constexpr int kDefaultLookahead = 16;

// Walks the first k ranked jobs, building each job's pack/widest-spread pair
// from the canonical candidates and applying winners to a working copy, so
// later jobs see earlier reservations. Jobs without candidates are skipped.
// Single-candidate jobs place directly without invoking the solver.
std::vector<LookaheadEntry> lookahead_allocate(
    const ClusterState& state, const std::vector<const JobRecord*>& ranked,
    int k = kDefaultLookahead);

}  // namespace gsched
