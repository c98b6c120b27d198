#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "gsched/agent.hpp"
#include "gsched/errors.hpp"
#include "test_util.hpp"

using namespace gsched;

namespace {

JobRecord mj(const std::string& id, std::int64_t submit, int gpus,
             std::int64_t runtime, std::int64_t requested = -1) {
  JobRecord j;
  j.job_id = id;
  j.user_id = "u" + std::to_string(submit % 4);
  j.submit_time = submit;
  j.actual_runtime = runtime;
  j.requested_time = requested >= 0 ? requested : runtime;
  j.requested_gpus = gpus;
  j.gpu_type = "V100";
  return j;
}

// full-size matrix with deterministic, distinct rows
StateMatrix make_sm(int valid) {
  StateMatrix sm;
  sm.ov.assign(static_cast<std::size_t>(kMaxQueueRows) * kObsWidth, 0.0);
  sm.cv.assign(static_cast<std::size_t>(kMaxQueueRows) * kCtxWidth, 0.0);
  sm.valid_rows = valid;
  sm.layout_version = kLayoutVersionPro;
  for (int r = 0; r < valid; ++r) {
    sm.row_jobs.push_back("j" + std::to_string(r));
    sm.row_submit.push_back(r);
    sm.row_queue_index.push_back(static_cast<std::size_t>(r));
    for (int c = 0; c < kObsWidth; ++c) {
      sm.ov[static_cast<std::size_t>(r) * kObsWidth + c] =
          0.1 * (r + 1) + 0.03 * c;
    }
    for (int c = 0; c < kCtxWidth; ++c) {
      sm.cv[static_cast<std::size_t>(r) * kCtxWidth + c] =
          0.2 * (r + 1) - 0.05 * c;
    }
  }
  return sm;
}

TraceSet toy_trace() {
  TraceSet t;
  for (int i = 0; i < 40; ++i) {
    std::int64_t runtime = 20 + (i % 5) * 15;
    t.jobs.push_back(mj("j" + std::to_string(i), i * 5, (i % 3) + 1, runtime,
                        runtime * 2));
  }
  return t;
}

ClusterSpec one_node() {
  return build_cluster({NodeGroup{1, 8, "V100", "default", -1, -1.0}}, 4, 32.0);
}

}  // namespace

TEST_CASE("reward is relative improvement over the base score") {
  CHECK(compute_reward(1000.0, 800.0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(compute_reward(800.0, 1000.0) == doctest::Approx(-0.25));
  // a zero base falls back to the absolute gap at the guard scale
  CHECK(compute_reward(0.0, -0.5) == doctest::Approx(0.5 / 1e-6));
}

TEST_CASE("actor priorities form a distribution over valid rows") {
  PpoHyper ppo;
  AgentNets nets = init_agent(false, ppo, 7);
  CHECK(nets.layout_version == kLayoutVersionPro);

  StateMatrix sm = make_sm(3);
  PriorityVector pv = actor_priorities(nets.actor, sm);
  REQUIRE(pv.probs.size() == static_cast<std::size_t>(kMaxQueueRows));
  CHECK(pv.valid_rows == 3);

  double sum = 0.0;
  for (int r = 0; r < 3; ++r) {
    CHECK(pv.probs[static_cast<std::size_t>(r)] > 0.0);
    sum += pv.probs[static_cast<std::size_t>(r)];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  for (int r = 3; r < kMaxQueueRows; ++r)
    CHECK(pv.probs[static_cast<std::size_t>(r)] == 0.0);

  StateMatrix empty = make_sm(0);
  PriorityVector none = actor_priorities(nets.actor, empty);
  for (double p : none.probs) CHECK(p == 0.0);
}

TEST_CASE("action selection") {
  StateMatrix sm = make_sm(3);
  PriorityVector pv;
  pv.valid_rows = 3;
  pv.probs.assign(static_cast<std::size_t>(kMaxQueueRows), 0.0);

  SUBCASE("greedy takes the argmax") {
    pv.probs[0] = 0.2;
    pv.probs[1] = 0.5;
    pv.probs[2] = 0.3;
    CHECK(select_action(pv, sm, true, nullptr) == 1);
  }

  SUBCASE("greedy ties resolve to the earliest row") {
    pv.probs[0] = 0.4;
    pv.probs[1] = 0.4;
    pv.probs[2] = 0.2;
    CHECK(select_action(pv, sm, true, nullptr) == 0);
  }

  SUBCASE("sampling follows the distribution") {
    pv.probs[1] = 1.0;
    Rng rng(5);
    for (int i = 0; i < 10; ++i)
      CHECK(select_action(pv, sm, false, &rng) == 1);
  }

  SUBCASE("degenerate inputs are engine errors") {
    PriorityVector bad;
    bad.valid_rows = 0;
    CHECK_THROWS_AS(select_action(bad, sm, true, nullptr), EngineError);
    pv.probs[0] = 1.0;
    CHECK_THROWS_AS(select_action(pv, sm, false, nullptr), EngineError);
  }
}

TEST_CASE("ppo leaves parameters bitwise unchanged at zero advantage") {
  PpoHyper hyper;
  hyper.entropy_coef = 0.0;  // isolates the surrogate term
  AgentNets nets = init_agent(false, hyper, 11);

  StateMatrix sm = make_sm(4);
  PriorityVector pv = actor_priorities(nets.actor, sm);

  Decision d;
  d.state = sm;
  d.row = 1;
  d.logp_old = std::log(pv.probs[1]);
  d.value_old = critic_value(nets.critic, sm);

  Trajectory traj;
  traj.decisions = {d, d, d};
  traj.reward = d.value_old;  // advantage exactly zero everywhere

  std::vector<double> actor_before = flatten_params(nets.actor);
  std::vector<double> critic_before = flatten_params(nets.critic);

  Rng shuffle(3);
  PpoDiag diag = ppo_update(nets, traj, hyper, shuffle);

  CHECK(flatten_params(nets.actor) == actor_before);
  CHECK(flatten_params(nets.critic) == critic_before);
  CHECK(diag.samples == 3 * hyper.epochs);
  CHECK(diag.clip_fraction == 0.0);
  CHECK(diag.mean_ratio == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(diag.value_loss == doctest::Approx(0.0));
}

TEST_CASE("the clipped branch blocks the policy gradient") {
  PpoHyper hyper;
  hyper.entropy_coef = 0.0;
  hyper.epochs = 1;
  hyper.clip = 0.2;
  AgentNets nets = init_agent(false, hyper, 13);

  StateMatrix sm = make_sm(3);
  PriorityVector pv = actor_priorities(nets.actor, sm);

  Decision d;
  d.state = sm;
  d.row = 2;
  // pretend the action was half as likely when sampled: ratio = 2 today
  d.logp_old = std::log(pv.probs[2]) - std::log(2.0);
  d.value_old = critic_value(nets.critic, sm);

  Trajectory traj;
  traj.decisions = {d};

  SUBCASE("positive advantage above the ceiling freezes the actor") {
    traj.reward = d.value_old + 1.0;  // single decision: advantage stays 1

    std::vector<double> actor_before = flatten_params(nets.actor);
    std::vector<double> critic_before = flatten_params(nets.critic);
    Rng shuffle(4);
    PpoDiag diag = ppo_update(nets, traj, hyper, shuffle);

    CHECK(flatten_params(nets.actor) == actor_before);
    CHECK(flatten_params(nets.critic) != critic_before);
    CHECK(diag.samples == 1);
    CHECK(diag.clip_fraction == doctest::Approx(1.0));
    CHECK(diag.mean_ratio == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(diag.policy_loss == doctest::Approx(-1.2).epsilon(1e-9));
    CHECK(diag.value_loss == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("negative advantage keeps the gradient flowing") {
    traj.reward = d.value_old - 1.0;

    std::vector<double> actor_before = flatten_params(nets.actor);
    Rng shuffle(4);
    ppo_update(nets, traj, hyper, shuffle);
    CHECK(flatten_params(nets.actor) != actor_before);
  }
}

TEST_CASE("ppo ignores an empty trajectory") {
  PpoHyper hyper;
  AgentNets nets = init_agent(false, hyper, 17);
  std::vector<double> before = flatten_params(nets.actor);
  Trajectory traj;
  Rng shuffle(1);
  PpoDiag diag = ppo_update(nets, traj, hyper, shuffle);
  CHECK(diag.samples == 0);
  CHECK(flatten_params(nets.actor) == before);
}

TEST_CASE("ranker output is a permutation and records decisions") {
  PpoHyper ppo;
  AgentNets nets = init_agent(false, ppo, 19);
  ClusterSpec spec =
      build_cluster({NodeGroup{2, 8, "V100", "default", -1, -1.0}}, 4, 32.0);
  ClusterState state(spec);

  std::vector<JobRecord> jobs;
  for (int i = 0; i < 5; ++i) jobs.push_back(mj("q" + std::to_string(i), i, 1, 30));
  std::vector<const JobRecord*> queue;
  for (const auto& j : jobs) queue.push_back(&j);

  StateOptions opts;
  opts.naive = false;
  opts.runtime_source = RuntimeSource::actual;

  Trajectory traj;
  RlRanker greedy(nets, opts, true, nullptr, &traj);
  std::vector<std::size_t> ranked = greedy.rank(queue, state, 100);

  std::vector<std::size_t> sorted = ranked;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(queue.size());
  std::iota(iota.begin(), iota.end(), std::size_t{0});
  CHECK(sorted == iota);

  REQUIRE(traj.decisions.size() == 1);
  CHECK(traj.decisions[0].row >= 0);
  CHECK(traj.decisions[0].row < 5);
  CHECK(traj.decisions[0].logp_old <= 0.0);
  CHECK(traj.decisions[0].state.valid_rows == 5);

  // greedy ranking is a pure function of nets and inputs
  RlRanker again(nets, opts, true, nullptr, nullptr);
  CHECK(again.rank(queue, state, 100) == ranked);
}

TEST_CASE("queue overflow trails in submit order") {
  PpoHyper ppo;
  AgentNets nets = init_agent(false, ppo, 23);
  ClusterSpec spec = one_node();
  ClusterState state(spec);

  std::vector<JobRecord> jobs;
  jobs.reserve(300);
  for (int i = 0; i < 300; ++i)
    jobs.push_back(mj("o" + std::to_string(i), i, 1, 30));
  std::vector<const JobRecord*> queue;
  for (const auto& j : jobs) queue.push_back(&j);

  StateOptions opts;
  opts.naive = false;
  opts.runtime_source = RuntimeSource::actual;
  RlRanker ranker(nets, opts, true, nullptr, nullptr);
  std::vector<std::size_t> ranked = ranker.rank(queue, state, 400);

  REQUIRE(ranked.size() == 300);
  std::vector<std::size_t> sorted = ranked;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 300; ++i) CHECK(sorted[i] == i);
  // the queue arrived submit-sorted, so the cutoff tail is 256..299 in order
  for (std::size_t i = 256; i < 300; ++i) CHECK(ranked[i] == i);
}

TEST_CASE("checkpoints round trip and enforce the feature layout") {
  TempDir td;
  PpoHyper ppo;
  AgentNets nets = init_agent(false, ppo, 5);
  nets.trained_batches = 7;

  AgentConfig cfg;
  cfg.base_policy = PolicyKind::sjf;
  cfg.metric = Metric::bsld;
  cfg.naive = false;

  std::string path = td.file("agent.ckpt.json");
  save_checkpoint(nets, cfg, path);

  AgentNets back = load_checkpoint(path, false);
  CHECK(flatten_params(back.actor) == flatten_params(nets.actor));
  CHECK(flatten_params(back.critic) == flatten_params(nets.critic));
  CHECK(back.layout_version == kLayoutVersionPro);
  CHECK(back.trained_batches == 7);
  CHECK(back.opt_actor.lr == nets.opt_actor.lr);
  CHECK(back.opt_critic.step == nets.opt_critic.step);

  CHECK_THROWS_AS(load_checkpoint(path, true), DataError);

  CheckpointInfo info = read_checkpoint_info(path);
  CHECK(info.layout_version == kLayoutVersionPro);
  CHECK(info.base_policy == PolicyKind::sjf);
  CHECK(info.metric == Metric::bsld);
  CHECK_FALSE(info.naive);
  CHECK(info.trained_batches == 7);

  write_text(td.file("junk.json"), "{\"format\":\"nope\"}");
  CHECK_THROWS_AS(load_checkpoint(td.file("junk.json"), false), DataError);
  write_text(td.file("garbage.json"), "not json at all");
  CHECK_THROWS_AS(read_checkpoint_info(td.file("garbage.json")), DataError);
  CHECK_THROWS_AS(load_checkpoint(td.file("missing.json"), false), DataError);
}

TEST_CASE("training is deterministic and counts batches") {
  TraceSet trace = toy_trace();
  ClusterSpec spec = one_node();

  AgentConfig cfg;
  cfg.base_policy = PolicyKind::fifo;
  cfg.metric = Metric::wait;
  cfg.epochs = 1;
  cfg.batches_per_epoch = 2;
  cfg.batch_size = 8;
  cfg.seed = 42;
  cfg.ppo.epochs = 2;

  AgentNets n1 = init_agent(false, cfg.ppo, 123);
  TrainResult r1 = train(trace, spec, cfg, n1);
  REQUIRE(r1.curve.size() == 2);
  CHECK(n1.trained_batches == 2);
  for (const CurvePoint& pt : r1.curve) {
    CHECK(pt.decisions > 0);
    CHECK(std::isfinite(pt.reward));
    CHECK(pt.diag.samples > 0);
  }

  AgentNets n2 = init_agent(false, cfg.ppo, 123);
  int callbacks = 0;
  TrainResult r2 = train(trace, spec, cfg, n2,
                         [&](const CurvePoint&) { ++callbacks; });
  CHECK(callbacks == 2);
  CHECK(flatten_params(n1.actor) == flatten_params(n2.actor));
  CHECK(flatten_params(n1.critic) == flatten_params(n2.critic));
  for (std::size_t i = 0; i < r1.curve.size(); ++i)
    CHECK(r1.curve[i].reward == r2.curve[i].reward);

  // zero epochs is a legal no-op
  AgentConfig idle = cfg;
  idle.epochs = 0;
  AgentNets n3 = init_agent(false, cfg.ppo, 123);
  std::vector<double> before = flatten_params(n3.actor);
  TrainResult r3 = train(trace, spec, idle, n3);
  CHECK(r3.curve.empty());
  CHECK(flatten_params(n3.actor) == before);

  AgentConfig bad = cfg;
  bad.batches_per_epoch = 0;
  CHECK_THROWS_AS(train(trace, spec, bad, n1), ConfigError);

  // nets trained for one layout refuse a run configured for the other
  AgentNets naive_nets = init_agent(true, cfg.ppo, 1);
  CHECK_THROWS_AS(train(trace, spec, cfg, naive_nets), ConfigError);
}

TEST_CASE("evaluation aggregates per-run stats") {
  TraceSet trace = toy_trace();
  ClusterSpec spec = one_node();

  AgentConfig cfg;
  cfg.base_policy = PolicyKind::fifo;
  cfg.metric = Metric::wait;
  cfg.seed = 9;

  AgentNets nets = init_agent(false, cfg.ppo, 31);
  EvalResult ev = evaluate(trace, spec, cfg, nets, 2, 8);
  REQUIRE(ev.runs.size() == 2);
  CHECK(ev.batch_size == 8);
  CHECK(ev.base_mean.wait_sum ==
        doctest::Approx((ev.runs[0].base.wait_sum + ev.runs[1].base.wait_sum) /
                        2.0));
  CHECK(ev.rl_mean.jct_mean ==
        doctest::Approx((ev.runs[0].rl.jct_mean + ev.runs[1].rl.jct_mean) /
                        2.0));
  for (const EvalRun& run : ev.runs) {
    CHECK(run.base.util >= 0.0);
    CHECK(run.base.util <= 1.0);
    CHECK(run.rl.util >= 0.0);
    CHECK(run.rl.util <= 1.0);
  }

  EvalResult again = evaluate(trace, spec, cfg, nets, 2, 8);
  CHECK(again.runs[0].rl.wait_sum == ev.runs[0].rl.wait_sum);
  CHECK(again.runs[1].base.bsld_sum == ev.runs[1].base.bsld_sum);

  CHECK_THROWS_AS(evaluate(trace, spec, cfg, nets, 0, 8), ConfigError);
  CHECK_THROWS_AS(evaluate(trace, spec, cfg, nets, 1, 0), ConfigError);
}
