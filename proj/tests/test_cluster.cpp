#include <set>

#include "doctest.h"
#include "gsched/cluster.hpp"
#include "gsched/errors.hpp"
#include "gsched/rng.hpp"

using namespace gsched;

namespace {

JobRecord gpu_job(const std::string& id, int gpus,
                  const std::string& type = "V100",
                  const std::string& vc = "default") {
  JobRecord j;
  j.job_id = id;
  j.user_id = "u0";
  j.vc_id = vc;
  j.requested_time = 100;
  j.actual_runtime = 100;
  j.requested_gpus = gpus;
  j.gpu_type = type;
  return j;
}

ClusterSpec two_nodes() {
  return build_cluster({NodeGroup{2, 8, "V100", "default", -1, -1.0}}, 4, 32.0);
}

}  // namespace

TEST_CASE("node group text parses fields and defaults") {
  NodeGroup g = parse_node_group("count:4,gpus:8,type:A100,vc:VC2,cpus:96,mem_gb:512");
  CHECK(g.count == 4);
  CHECK(g.gpus == 8);
  CHECK(g.gpu_type == "A100");
  CHECK(g.vc_id == "VC2");
  CHECK(g.cpus == 96);
  CHECK(g.mem_gb == 512.0);

  NodeGroup d = parse_node_group("count:2,gpus:4");
  CHECK(d.gpu_type == "V100");
  CHECK(d.vc_id == "default");
  CHECK(d.cpus == -1);

  CHECK_THROWS_AS(parse_node_group("count:0,gpus:8"), ConfigError);
  CHECK_THROWS_AS(parse_node_group("bogus:1"), ConfigError);
}

TEST_CASE("build_cluster applies proportional defaults") {
  ClusterSpec spec = build_cluster({NodeGroup{2, 8, "V100", "default", -1, -1.0}},
                                   6, 42.0);
  REQUIRE(spec.nodes.size() == 2);
  CHECK(spec.total_gpus() == 16);
  CHECK(spec.nodes[0].cpus == 48);            // 8 gpus * 6
  CHECK(spec.nodes[0].mem_mb == 8 * 43008);   // 8 gpus * 42 GB
  CHECK(spec.nodes[0].node_id != spec.nodes[1].node_id);
  CHECK(spec.cpu_per_gpu == 6);
}

TEST_CASE("the five-vc preset matches its published shape") {
  ClusterSpec spec = helios_cluster();
  CHECK(spec.nodes.size() == 54);
  CHECK(spec.total_gpus() == 432);

  std::map<std::string, int> by_vc;
  std::set<std::string> types;
  for (const auto& n : spec.nodes) {
    by_vc[n.vc_id] += n.gpus;
    types.insert(n.gpu_type);
  }
  CHECK(by_vc["VC1"] == 128);
  CHECK(by_vc["VC2"] == 96);
  CHECK(by_vc["VC3"] == 80);
  CHECK(by_vc["VC4"] == 64);
  CHECK(by_vc["VC5"] == 64);
  CHECK(types == std::set<std::string>{"V100", "P100"});
}

TEST_CASE("candidate plans are the pack plus even spreads, pack first") {
  ClusterSpec spec = two_nodes();
  ClusterState state(spec);
  JobRecord j = gpu_job("j", 8);

  std::vector<PlacementPlan> plans = candidate_placements(state, j);
  REQUIRE(plans.size() == 2);  // pack on one node, spread 4+4 over two
  CHECK(plans[0].assignments.size() == 1);
  CHECK(plans[0].assignments[0].second == 8);
  CHECK(plans[0].style == PlacementPlan::Style::pack);
  CHECK(plans[1].assignments.size() == 2);
  CHECK(plans[1].assignments[0].second == 4);
  CHECK(plans[1].assignments[1].second == 4);
  // 4 gpus per node is neither the pack nor a one-gpu-per-node spread
  CHECK(plans[1].style == PlacementPlan::Style::mixed);
  CHECK(count_placements(state, j) == 2);
  CHECK(can_schedule_now(state, j));

  // a 2-gpu job split 1+1 is the genuine spread shape
  std::vector<PlacementPlan> pair = candidate_placements(state, gpu_job("p", 2));
  REQUIRE(pair.size() == 2);
  CHECK(pair[1].style == PlacementPlan::Style::spread);
}

TEST_CASE("spread width is capped by divisors and node availability") {
  ClusterSpec spec = build_cluster({NodeGroup{3, 8, "V100", "default", -1, -1.0}});
  ClusterState state(spec);

  // 6 gpus over 3 nodes: pack, 2x3, 3x2 (6 ways needs 6 nodes)
  std::vector<PlacementPlan> plans = candidate_placements(state, gpu_job("a", 6));
  REQUIRE(plans.size() == 3);
  CHECK(plans[0].assignments.size() == 1);
  CHECK(plans[1].assignments.size() == 2);
  CHECK(plans[2].assignments.size() == 3);

  // 1 gpu: only the pack
  CHECK(count_placements(state, gpu_job("b", 1)) == 1);
}

TEST_CASE("node order prefers freer nodes, then lower ids") {
  ClusterSpec spec = two_nodes();
  ClusterState state(spec);
  // occupy 2 gpus on the first node so the second is freer
  PlacementPlan p;
  p.assignments = {{spec.nodes[0].node_id, 2}};
  state.allocate(gpu_job("filler", 2), p);

  std::vector<PlacementPlan> plans = candidate_placements(state, gpu_job("j", 4));
  REQUIRE(!plans.empty());
  CHECK(plans[0].assignments[0].first == spec.nodes[1].node_id);
}

TEST_CASE("typed jobs match their class, MISC matches everything") {
  ClusterSpec spec = build_cluster({NodeGroup{1, 8, "V100", "default", -1, -1.0},
                                    NodeGroup{1, 8, "P100", "default", -1, -1.0}});
  ClusterState state(spec);

  std::vector<PlacementPlan> v = candidate_placements(state, gpu_job("v", 8, "V100"));
  REQUIRE(v.size() == 1);
  CHECK(v[0].assignments[0].first == spec.nodes[0].node_id);

  std::vector<PlacementPlan> misc = candidate_placements(state, gpu_job("m", 8, "MISC"));
  CHECK(misc.size() == 2);  // pack per type class

  CHECK(candidate_placements(state, gpu_job("x", 8, "A100")).empty());
}

TEST_CASE("vc confinement applies only to known vcs") {
  ClusterSpec spec = build_cluster({NodeGroup{1, 8, "V100", "VC1", -1, -1.0},
                                    NodeGroup{1, 8, "V100", "VC2", -1, -1.0}});
  ClusterState state(spec);

  std::vector<PlacementPlan> confined =
      candidate_placements(state, gpu_job("a", 8, "V100", "VC2"));
  REQUIRE(confined.size() == 1);
  CHECK(confined[0].assignments[0].first == spec.nodes[1].node_id);

  // a vc the cluster does not serve leaves the job unconfined
  std::vector<PlacementPlan> open =
      candidate_placements(state, gpu_job("b", 8, "V100", "VC9"));
  CHECK(open.size() == 2);
}

TEST_CASE("explicit cpu requests spread pro-rata") {
  ClusterSpec spec = two_nodes();
  JobRecord j = gpu_job("j", 4);
  j.requested_cpus = 10;
  CHECK(cpu_demand(spec, j, 2) == 5);   // ceil(10 * 2/4)
  CHECK(cpu_demand(spec, j, 3) == 8);   // ceil(10 * 3/4)
  CHECK(cpu_demand(spec, j, 4) == 10);

  JobRecord d = gpu_job("d", 4);  // proportional default
  CHECK(cpu_demand(spec, d, 2) == 8);   // 2 gpus * 4 cpus

  JobRecord m = gpu_job("m", 4);
  m.requested_mem_gb = 100.0;
  CHECK(mem_demand_mb(spec, m, 2) == 51200);  // ceil(100GB * 2/4)
}

TEST_CASE("allocate and release conserve resources through random churn") {
  ClusterSpec spec = build_cluster({NodeGroup{3, 8, "V100", "default", -1, -1.0},
                                    NodeGroup{2, 4, "P100", "default", -1, -1.0}});
  ClusterState state(spec);
  const std::uint64_t initial_digest = state.occupancy_digest();
  const int initial_free = state.total_free_gpus();
  REQUIRE(initial_free == 32);

  Rng rng(123);
  std::vector<std::string> live;
  int next_id = 0;
  for (int step = 0; step < 400; ++step) {
    bool do_alloc = live.empty() || rng.uniform() < 0.6;
    if (do_alloc) {
      JobRecord j = gpu_job("c" + std::to_string(next_id++),
                            1 + static_cast<int>(rng.uniform_index(8)),
                            rng.uniform() < 0.5 ? "MISC" : "V100");
      std::vector<PlacementPlan> plans = candidate_placements(state, j);
      if (plans.empty()) continue;
      state.allocate(j, plans[rng.uniform_index(plans.size())]);
      live.push_back(j.job_id);
    } else {
      std::size_t pick = rng.uniform_index(live.size());
      state.release(live[pick]);
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    REQUIRE(state.conservation_ok());
    REQUIRE(state.total_free_gpus() + state.allocated_gpus() == initial_free);
  }
  for (const auto& id : live) state.release(id);
  CHECK(state.total_free_gpus() == initial_free);
  CHECK(state.occupancy_digest() == initial_digest);
  CHECK(state.conservation_ok());
}

TEST_CASE("allocation rejects bad plans and double booking") {
  ClusterSpec spec = two_nodes();
  ClusterState state(spec);
  JobRecord j = gpu_job("j", 8);
  std::vector<PlacementPlan> plans = candidate_placements(state, j);
  REQUIRE(!plans.empty());
  state.allocate(j, plans[0]);

  CHECK_THROWS_AS(state.allocate(j, plans[0]), EngineError);  // same id again
  CHECK_THROWS_AS(state.release("ghost"), EngineError);

  // plan asking for more than a node has left
  JobRecord big = gpu_job("big", 16);
  PlacementPlan bad;
  bad.assignments = {{spec.nodes[0].node_id, 16}};
  CHECK_THROWS_AS(state.allocate(big, bad), EngineError);
}

TEST_CASE("free_gpus_by_type tracks typed occupancy") {
  ClusterSpec spec = build_cluster({NodeGroup{1, 8, "V100", "default", -1, -1.0},
                                    NodeGroup{1, 4, "P100", "default", -1, -1.0}});
  ClusterState state(spec);
  auto free0 = state.free_gpus_by_type();
  CHECK(free0["V100"] == 8);
  CHECK(free0["P100"] == 4);

  JobRecord j = gpu_job("j", 2, "P100");
  state.allocate(j, candidate_placements(state, j).front());
  auto free1 = state.free_gpus_by_type();
  CHECK(free1["V100"] == 8);
  CHECK(free1["P100"] == 2);
}

TEST_CASE("occupancy digest distinguishes placements") {
  ClusterSpec spec = two_nodes();
  ClusterState a(spec);
  ClusterState b(spec);
  JobRecord j = gpu_job("j", 8);
  std::vector<PlacementPlan> plans = candidate_placements(a, j);
  REQUIRE(plans.size() == 2);
  a.allocate(j, plans[0]);  // pack
  b.allocate(j, plans[1]);  // spread
  CHECK(a.occupancy_digest() != b.occupancy_digest());
}
