#include "gsched/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "gsched/errors.hpp"
#include "gsched/io.hpp"

namespace gsched {

int ClusterSpec::total_gpus() const {
  int total = 0;
  for (const auto& n : nodes) total += n.gpus;
  return total;
}

std::int64_t ClusterSpec::mem_per_gpu_mb() const {
  return std::llround(mem_per_gpu_gb * 1024.0);
}

int PlacementPlan::total_gpus() const {
  int total = 0;
  for (const auto& [node, count] : assignments) total += count;
  return total;
}

NodeGroup parse_node_group(const std::string& text) {
  NodeGroup g;
  bool saw_count = false, saw_gpus = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string item = text.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    pos = (comma == std::string::npos) ? text.size() : comma + 1;
    std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("node group item needs key:value, got '" + item + "'");
    std::string key = item.substr(0, colon);
    std::string val = item.substr(colon + 1);
    try {
      if (key == "count") { g.count = std::stoi(val); saw_count = true; }
      else if (key == "gpus") { g.gpus = std::stoi(val); saw_gpus = true; }
      else if (key == "type") { g.gpu_type = val; }
      else if (key == "vc") { g.vc_id = val; }
      else if (key == "cpus") { g.cpus = std::stoi(val); }
      else if (key == "mem_gb") { g.mem_gb = std::stod(val); }
      else throw ConfigError("unknown node group key: " + key);
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      throw ConfigError("bad node group value for " + key + ": " + val);
    }
  }
  if (!saw_count || !saw_gpus)
    throw ConfigError("node group needs count and gpus: " + text);
  if (g.count <= 0 || g.gpus <= 0)
    throw ConfigError("node group count/gpus must be positive: " + text);
  if ((g.cpus != -1 && g.cpus <= 0) || (g.mem_gb != -1.0 && g.mem_gb <= 0.0))
    throw ConfigError("node group cpus/mem_gb must be positive: " + text);
  return g;
}

ClusterSpec build_cluster(const std::vector<NodeGroup>& groups,
                          int cpu_per_gpu, double mem_per_gpu_gb) {
  if (groups.empty()) throw ConfigError("cluster needs at least one node group");
  if (cpu_per_gpu <= 0 || mem_per_gpu_gb <= 0)
    throw ConfigError("per-gpu resource rates must be positive");
  ClusterSpec spec;
  spec.cpu_per_gpu = cpu_per_gpu;
  spec.mem_per_gpu_gb = mem_per_gpu_gb;
  int idx = 0;
  for (const auto& g : groups) {
    if (g.count <= 0 || g.gpus <= 0)
      throw ConfigError("node group counts must be positive");
    if (g.gpu_type.empty() || g.vc_id.empty())
      throw ConfigError("node group type/vc must be non-empty");
    for (int i = 0; i < g.count; ++i) {
      NodeSpec n;
      char idbuf[16];
      std::snprintf(idbuf, sizeof idbuf, "n%03d", idx++);
      n.node_id = idbuf;
      n.gpu_type = g.gpu_type;
      n.vc_id = g.vc_id;
      n.gpus = g.gpus;
      n.cpus = g.cpus > 0 ? g.cpus : g.gpus * cpu_per_gpu;
      n.mem_mb = g.mem_gb > 0 ? std::llround(g.mem_gb * 1024.0)
                              : static_cast<std::int64_t>(g.gpus) *
                                    std::llround(mem_per_gpu_gb * 1024.0);
      spec.nodes.push_back(std::move(n));
    }
  }
  return spec;
}

ClusterSpec helios_cluster() {
  std::vector<NodeGroup> groups = {
      {16, 8, "V100", "VC1"}, {12, 8, "V100", "VC2"}, {10, 8, "V100", "VC3"},
      {8, 8, "P100", "VC4"},  {8, 8, "P100", "VC5"}};
  return build_cluster(groups, 6, 42.0);
}

ClusterState::ClusterState(const ClusterSpec& spec) : spec_(&spec) {
  node_state_.reserve(spec.nodes.size());
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const auto& n = spec.nodes[i];
    if (n.gpus <= 0 || n.cpus <= 0 || n.mem_mb <= 0)
      throw ConfigError("node capacities must be positive: " + n.node_id);
    if (!index_.emplace(n.node_id, static_cast<int>(i)).second)
      throw ConfigError("duplicate node id: " + n.node_id);
    node_state_.push_back({n.gpus, n.cpus, n.mem_mb});
  }
}

int ClusterState::node_index(const std::string& node_id) const {
  auto it = index_.find(node_id);
  return it == index_.end() ? -1 : it->second;
}

int cpu_demand(const ClusterSpec& spec, const JobRecord& job, int q) {
  if (job.requested_cpus) {
    // pro-rata share, rounded up so the sum over parts never understates
    std::int64_t num = static_cast<std::int64_t>(*job.requested_cpus) * q;
    return static_cast<int>((num + job.requested_gpus - 1) / job.requested_gpus);
  }
  return q * spec.cpu_per_gpu;
}

std::int64_t mem_demand_mb(const ClusterSpec& spec, const JobRecord& job, int q) {
  if (job.requested_mem_gb) {
    std::int64_t total = std::llround(*job.requested_mem_gb * 1024.0);
    return (total * q + job.requested_gpus - 1) / job.requested_gpus;
  }
  return static_cast<std::int64_t>(q) * spec.mem_per_gpu_mb();
}

void ClusterState::allocate(const JobRecord& job, const PlacementPlan& plan) {
  if (!spec_) throw EngineError("cluster state not initialized");
  if (allocations_.count(job.job_id))
    throw EngineError("job already allocated: " + job.job_id);
  if (plan.assignments.empty())
    throw EngineError("empty placement plan for " + job.job_id);
  if (plan.total_gpus() != job.requested_gpus)
    throw EngineError("plan gpu total mismatch for " + job.job_id);
  std::set<int> used;
  for (const auto& [node_id, count] : plan.assignments) {
    int idx = node_index(node_id);
    if (idx < 0) throw EngineError("unknown node in plan: " + node_id);
    if (!used.insert(idx).second)
      throw EngineError("node repeated in plan: " + node_id);
    if (count <= 0) throw EngineError("non-positive gpu count in plan");
    const NodeState& ns = node_state_[static_cast<std::size_t>(idx)];
    if (ns.free_gpus < count || ns.free_cpus < cpu_demand(*spec_, job, count) ||
        ns.free_mem_mb < mem_demand_mb(*spec_, job, count))
      throw EngineError("plan infeasible on node " + node_id + " for " + job.job_id);
  }
  for (const auto& [node_id, count] : plan.assignments) {
    NodeState& ns = node_state_[static_cast<std::size_t>(node_index(node_id))];
    ns.free_gpus -= count;
    ns.free_cpus -= cpu_demand(*spec_, job, count);
    ns.free_mem_mb -= mem_demand_mb(*spec_, job, count);
  }
  allocations_.emplace(job.job_id, plan);
  demand_basis_.emplace(job.job_id,
                        DemandBasis{job.requested_gpus, job.requested_cpus,
                                    job.requested_mem_gb});
}

PlacementPlan ClusterState::release(const std::string& job_id) {
  auto it = allocations_.find(job_id);
  if (it == allocations_.end())
    throw EngineError("release of unallocated job: " + job_id);
  auto basis_it = demand_basis_.find(job_id);
  JobRecord ghost;
  ghost.requested_gpus = basis_it->second.requested_gpus;
  ghost.requested_cpus = basis_it->second.requested_cpus;
  ghost.requested_mem_gb = basis_it->second.requested_mem_gb;
  PlacementPlan plan = it->second;
  for (const auto& [node_id, count] : plan.assignments) {
    NodeState& ns = node_state_[static_cast<std::size_t>(node_index(node_id))];
    ns.free_gpus += count;
    ns.free_cpus += cpu_demand(*spec_, ghost, count);
    ns.free_mem_mb += mem_demand_mb(*spec_, ghost, count);
  }
  allocations_.erase(it);
  demand_basis_.erase(basis_it);
  return plan;
}

bool ClusterState::has_job(const std::string& job_id) const {
  return allocations_.count(job_id) > 0;
}

int ClusterState::total_free_gpus() const {
  int total = 0;
  for (const auto& ns : node_state_) total += ns.free_gpus;
  return total;
}

int ClusterState::allocated_gpus() const {
  return spec_->total_gpus() - total_free_gpus();
}

std::map<std::string, int> ClusterState::free_gpus_by_type() const {
  std::map<std::string, int> out;
  for (std::size_t i = 0; i < node_state_.size(); ++i)
    out[spec_->nodes[i].gpu_type] += node_state_[i].free_gpus;
  return out;
}

bool ClusterState::conservation_ok() const {
  std::vector<int> gpu_alloc(node_state_.size(), 0);
  std::vector<int> cpu_alloc(node_state_.size(), 0);
  std::vector<std::int64_t> mem_alloc(node_state_.size(), 0);
  for (const auto& [job_id, plan] : allocations_) {
    const auto& basis = demand_basis_.at(job_id);
    JobRecord ghost;
    ghost.requested_gpus = basis.requested_gpus;
    ghost.requested_cpus = basis.requested_cpus;
    ghost.requested_mem_gb = basis.requested_mem_gb;
    for (const auto& [node_id, count] : plan.assignments) {
      int idx = node_index(node_id);
      if (idx < 0) return false;
      gpu_alloc[static_cast<std::size_t>(idx)] += count;
      cpu_alloc[static_cast<std::size_t>(idx)] += cpu_demand(*spec_, ghost, count);
      mem_alloc[static_cast<std::size_t>(idx)] += mem_demand_mb(*spec_, ghost, count);
    }
  }
  for (std::size_t i = 0; i < node_state_.size(); ++i) {
    const auto& cap = spec_->nodes[i];
    const auto& ns = node_state_[i];
    if (ns.free_gpus < 0 || ns.free_cpus < 0 || ns.free_mem_mb < 0) return false;
    if (ns.free_gpus + gpu_alloc[i] != cap.gpus) return false;
    if (ns.free_cpus + cpu_alloc[i] != cap.cpus) return false;
    if (ns.free_mem_mb + mem_alloc[i] != cap.mem_mb) return false;
  }
  return true;
}

std::uint64_t ClusterState::occupancy_digest() const {
  std::vector<std::int64_t> words;
  words.reserve(node_state_.size() * 3);
  for (const auto& ns : node_state_) {
    words.push_back(ns.free_gpus);
    words.push_back(ns.free_cpus);
    words.push_back(ns.free_mem_mb);
  }
  return fnv1a64(words.data(), words.size() * sizeof(std::int64_t));
}

namespace {

std::vector<int> order_nodes(const ClusterState& state,
                             const std::vector<int>& nodes) {
  // nodes pre-filtered; order by (free gpus desc, node_id asc)
  std::vector<int> order = nodes;
  const auto& spec = state.spec();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    int fa = state.nodes()[static_cast<std::size_t>(a)].free_gpus;
    int fb = state.nodes()[static_cast<std::size_t>(b)].free_gpus;
    if (fa != fb) return fa > fb;
    return spec.nodes[static_cast<std::size_t>(a)].node_id <
           spec.nodes[static_cast<std::size_t>(b)].node_id;
  });
  return order;
}

// shared walk for candidate_placements / count_placements
int enumerate_placements(const ClusterState& state, const JobRecord& job,
                         std::vector<PlacementPlan>* out) {
  const ClusterSpec& spec = state.spec();
  const int g = job.requested_gpus;
  if (g <= 0) throw EngineError("job requests no gpus: " + job.job_id);

  bool vc_known = false;
  for (const auto& n : spec.nodes)
    if (n.vc_id == job.vc_id) { vc_known = true; break; }

  const bool any_type = job.gpu_type.empty() || job.gpu_type == "MISC";
  std::map<std::string, std::vector<int>> by_class;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const auto& n = spec.nodes[i];
    if (vc_known && n.vc_id != job.vc_id) continue;
    if (!any_type && n.gpu_type != job.gpu_type) continue;
    by_class[n.gpu_type].push_back(static_cast<int>(i));
  }

  int found = 0;
  for (const auto& [cls, members] : by_class) {
    std::vector<int> order = order_nodes(state, members);
    for (int m = 1; m <= g; ++m) {
      if (g % m != 0) continue;
      const int q = g / m;
      const int need_cpu = cpu_demand(spec, job, q);
      const std::int64_t need_mem = mem_demand_mb(spec, job, q);
      std::vector<int> chosen;
      for (int idx : order) {
        const NodeState& ns = state.nodes()[static_cast<std::size_t>(idx)];
        if (ns.free_gpus >= q && ns.free_cpus >= need_cpu &&
            ns.free_mem_mb >= need_mem) {
          chosen.push_back(idx);
          if (static_cast<int>(chosen.size()) == m) break;
        }
      }
      if (static_cast<int>(chosen.size()) != m) continue;
      ++found;
      if (out) {
        PlacementPlan plan;
        plan.style = (m == 1)   ? PlacementPlan::Style::pack
                     : (q == 1) ? PlacementPlan::Style::spread
                                : PlacementPlan::Style::mixed;
        for (int idx : chosen)
          plan.assignments.emplace_back(
              spec.nodes[static_cast<std::size_t>(idx)].node_id, q);
        out->push_back(std::move(plan));
      }
    }
  }
  if (out) {
    std::stable_sort(out->begin(), out->end(),
                     [](const PlacementPlan& a, const PlacementPlan& b) {
                       return a.assignments.size() < b.assignments.size();
                     });
  }
  return found;
}

}  // namespace

std::vector<PlacementPlan> candidate_placements(const ClusterState& state,
                                                const JobRecord& job) {
  std::vector<PlacementPlan> out;
  enumerate_placements(state, job, &out);
  return out;
}

int count_placements(const ClusterState& state, const JobRecord& job) {
  return enumerate_placements(state, job, nullptr);
}

bool can_schedule_now(const ClusterState& state, const JobRecord& job) {
  return count_placements(state, job) > 0;
}

}  // namespace gsched
