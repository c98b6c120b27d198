#include "gsched/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gsched/errors.hpp"
#include "gsched/features.hpp"

namespace gsched {

namespace {

void validate_way(const ClusterState& state, const JobRecord& job,
                  const PlacementPlan& way) {
  if (way.assignments.empty()) throw EngineError("allocator: empty way");
  if (way.total_gpus() != job.requested_gpus)
    throw EngineError("allocator: way gpu total mismatch for " + job.job_id);
  std::map<std::string, int> seen;
  for (const auto& [node_id, count] : way.assignments) {
    if (count <= 0) throw EngineError("allocator: non-positive count in way");
    if (state.node_index(node_id) < 0)
      throw EngineError("allocator: unknown node " + node_id);
    if (++seen[node_id] > 1)
      throw EngineError("allocator: node repeated in way " + node_id);
  }
}

bool way_feasible(const ClusterState& state, const JobRecord& job,
                  const PlacementPlan& way) {
  for (const auto& [node_id, count] : way.assignments) {
    const NodeState& ns =
        state.nodes()[static_cast<std::size_t>(state.node_index(node_id))];
    if (ns.free_gpus < count ||
        ns.free_cpus < cpu_demand(state.spec(), job, count) ||
        ns.free_mem_mb < mem_demand_mb(state.spec(), job, count))
      return false;
  }
  return true;
}

// fragmentation of the free pool after applying the way (fill not applied;
// only the job's own placement changes real state)
double post_cff(const ClusterState& state, const PlacementPlan& way) {
  std::vector<int> free_after;
  free_after.reserve(state.nodes().size());
  for (const auto& ns : state.nodes()) free_after.push_back(ns.free_gpus);
  for (const auto& [node_id, count] : way.assignments)
    free_after[static_cast<std::size_t>(state.node_index(node_id))] -= count;
  double total = 0.0, sq = 0.0;
  for (int f : free_after) {
    total += f;
    sq += static_cast<double>(f) * f;
  }
  if (total <= 0.0) return 0.0;
  return 1.0 - sq / (total * total);
}

struct WayScore {
  bool feasible = false;
  int objective = 0;
  double frag = 0.0;
  std::vector<std::pair<std::string, int>> occupancy;
};

// objective = job gpus + maximal extra occupancy at proportional rates,
// computed per node (constraints do not couple nodes)
WayScore score_way(const ClusterState& state, const JobRecord& job,
                   const PlacementPlan& way) {
  WayScore s;
  if (!way_feasible(state, job, way)) return s;
  s.feasible = true;
  s.frag = post_cff(state, way);

  const ClusterSpec& spec = state.spec();
  const int cpu_rate = spec.cpu_per_gpu;
  const std::int64_t mem_rate = spec.mem_per_gpu_mb();

  std::map<std::string, int> way_count;
  for (const auto& [node_id, count] : way.assignments) way_count[node_id] = count;

  for (std::size_t i = 0; i < state.nodes().size(); ++i) {
    const NodeSpec& nspec = spec.nodes[i];
    const NodeState& ns = state.nodes()[i];
    auto it = way_count.find(nspec.node_id);
    const int pinned = it == way_count.end() ? 0 : it->second;
    int rem_gpus = ns.free_gpus - pinned;
    int rem_cpus = ns.free_cpus - (pinned ? cpu_demand(spec, job, pinned) : 0);
    std::int64_t rem_mem =
        ns.free_mem_mb - (pinned ? mem_demand_mb(spec, job, pinned) : 0);
    int extra = static_cast<int>(std::min<std::int64_t>(
        rem_gpus,
        std::min<std::int64_t>(cpu_rate > 0 ? rem_cpus / cpu_rate : 0,
                               mem_rate > 0 ? rem_mem / mem_rate : 0)));
    extra = std::max(extra, 0);
    int occupied = pinned + extra;
    if (occupied > 0) s.occupancy.emplace_back(nspec.node_id, occupied);
    s.objective += occupied;
  }
  return s;
}

AllocSolution pick(const ClusterState& state, const AllocProblem& problem,
                   const WayScore& s1, const WayScore& s2) {
  AllocSolution out;
  const bool has1 = problem.way1.has_value() && s1.feasible;
  const bool has2 = problem.way2.has_value() && s2.feasible;
  if (!has1 && !has2) return out;

  int choose;
  if (has1 != has2) {
    choose = has1 ? 1 : 2;
  } else if (s1.objective != s2.objective) {
    choose = s1.objective > s2.objective ? 1 : 2;
  } else if (s1.frag != s2.frag) {
    choose = s1.frag < s2.frag ? 1 : 2;
  } else {
    choose = 2;  // full tie keeps the packed shape
  }
  const WayScore& w = choose == 1 ? s1 : s2;
  out.feasible = true;
  out.selected_way = choose;
  out.plan = choose == 1 ? *problem.way1 : *problem.way2;
  out.occupancy = w.occupancy;
  out.objective = w.objective;
  return out;
}

}  // namespace

AllocSolution solve(const ClusterState& state, const AllocProblem& problem) {
  if (!problem.way1 && !problem.way2)
    throw EngineError("allocator: problem with no ways for " + problem.job.job_id);
  if (problem.way1) validate_way(state, problem.job, *problem.way1);
  if (problem.way2) validate_way(state, problem.job, *problem.way2);
  if (problem.way1 && problem.way2 &&
      problem.way1->total_gpus() != problem.way2->total_gpus())
    throw EngineError("allocator: ways disagree on gpu total");

  WayScore s1 = problem.way1 ? score_way(state, problem.job, *problem.way1)
                             : WayScore{};
  WayScore s2 = problem.way2 ? score_way(state, problem.job, *problem.way2)
                             : WayScore{};
  return pick(state, problem, s1, s2);
}

AllocSolution brute_force_oracle(const ClusterState& state,
                                 const AllocProblem& problem) {
  if (state.nodes().size() > 8)
    throw EngineError("oracle: instance too large (nodes)");
  for (const auto& n : state.spec().nodes)
    if (n.gpus > 8) throw EngineError("oracle: instance too large (gpus)");
  if (!problem.way1 && !problem.way2)
    throw EngineError("oracle: problem with no ways");

  const ClusterSpec& spec = state.spec();

  auto eval_way = [&](const PlacementPlan& way) -> WayScore {
    WayScore s;
    // feasibility judged by an actual trial allocation
    ClusterState trial = state;
    try {
      trial.allocate(problem.job, way);
    } catch (const EngineError&) {
      return s;
    }
    s.feasible = true;

    // fragmentation measured on the trial state's free pool
    s.frag = cff(trial);

    // exhaustive per-node search for the largest extra occupancy
    s.objective = way.total_gpus();
    std::map<std::string, int> pinned;
    for (const auto& [node_id, count] : way.assignments) pinned[node_id] = count;
    for (std::size_t i = 0; i < trial.nodes().size(); ++i) {
      const NodeSpec& nspec = spec.nodes[i];
      const NodeState& ns = trial.nodes()[i];
      int best = 0;
      for (int extra = 0; extra <= ns.free_gpus; ++extra) {
        bool ok = extra <= ns.free_gpus &&
                  static_cast<std::int64_t>(extra) * spec.cpu_per_gpu <=
                      ns.free_cpus &&
                  static_cast<std::int64_t>(extra) * spec.mem_per_gpu_mb() <=
                      ns.free_mem_mb;
        if (ok) best = std::max(best, extra);
      }
      int pin = pinned.count(nspec.node_id) ? pinned[nspec.node_id] : 0;
      int occupied = pin + best;
      if (occupied > 0) s.occupancy.emplace_back(nspec.node_id, occupied);
      s.objective += best;
    }
    return s;
  };

  WayScore s1 = problem.way1 ? eval_way(*problem.way1) : WayScore{};
  WayScore s2 = problem.way2 ? eval_way(*problem.way2) : WayScore{};
  return pick(state, problem, s1, s2);
}

std::vector<LookaheadEntry> lookahead_allocate(
    const ClusterState& state, const std::vector<const JobRecord*>& ranked,
    int k) {
  if (k < 1) throw ConfigError("lookahead depth must be >= 1");
  ClusterState working = state;
  std::vector<LookaheadEntry> out;
  const std::size_t limit =
      std::min(ranked.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < limit; ++i) {
    const JobRecord& job = *ranked[i];
    LookaheadEntry entry;
    entry.job_id = job.job_id;
    auto plans = candidate_placements(working, job);
    if (plans.empty()) {
      out.push_back(std::move(entry));
      continue;
    }
    if (plans.size() == 1) {
      // single candidate: place directly, no solver involved
      entry.scheduled = true;
      entry.solution.feasible = true;
      entry.solution.selected_way = 2;
      entry.solution.plan = plans.front();
      entry.solution.objective = plans.front().total_gpus();
      working.allocate(job, plans.front());
      out.push_back(std::move(entry));
      continue;
    }
    AllocProblem p;
    p.job = job;
    p.way2 = plans.front();  // fewest nodes
    p.way1 = plans.back();   // widest spread
    AllocSolution sol = solve(working, p);
    entry.used_solver = true;
    if (sol.feasible) {
      working.allocate(job, sol.plan);
      entry.scheduled = true;
      entry.solution = std::move(sol);
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace gsched
