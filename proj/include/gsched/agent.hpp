#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gsched/features.hpp"
#include "gsched/metrics.hpp"
#include "gsched/nn.hpp"
#include "gsched/policies.hpp"
#include "gsched/rng.hpp"
#include "gsched/sim.hpp"
#include "gsched/trace.hpp"

namespace gsched {

struct PpoHyper {
  double policy_lr = 1e-4;
  double value_lr = 1e-3;
  double clip = 0.2;
  double entropy_coef = 0.01;
  int epochs = 4;      // passes over one trajectory per update
  int minibatch = 64;
  bool normalize_advantages = true;
};

struct AgentConfig {
  PolicyKind base_policy = PolicyKind::fifo;
  Metric metric = Metric::wait;
  bool naive = false;
  int lookahead = kDefaultLookahead;
  bool backfill = true;
  int epochs = 20;
  int batches_per_epoch = 20;
  int batch_size = 256;
  double bsld_tau = kDefaultBsldTau;
  std::uint64_t seed = 1;
  PpoHyper ppo;
};

// Actor scores each observation row through a weight-shared column network;
// the critic reads the flattened context block.
struct AgentNets {
  Mlp actor;
  Mlp critic;
  AdamState opt_actor;
  AdamState opt_critic;
  std::string layout_version;
  std::int64_t trained_batches = 0;
};

AgentNets init_agent(bool naive, const PpoHyper& ppo, std::uint64_t seed);

// Fixed-length probability vector over matrix rows; padded rows exactly 0.
struct PriorityVector {
  std::vector<double> probs;  // size kMaxQueueRows
  int valid_rows = 0;
};

PriorityVector actor_priorities(const Mlp& actor, const StateMatrix& sm);
double critic_value(const Mlp& critic, const StateMatrix& sm);

// Greedy takes the argmax (ties to the earlier submitter); otherwise samples
// the categorical distribution with the caller's rng.
int select_action(const PriorityVector& pv, const StateMatrix& sm, bool greedy,
                  Rng* rng);

// (base - rl) / max(|base|, 1e-6): positive when the learned run wins
double compute_reward(double base_score, double rl_score);

struct Decision {
  StateMatrix state;
  int row = -1;
  double logp_old = 0;
  double value_old = 0;
};

struct Trajectory {
  std::vector<Decision> decisions;
  double reward = 0;  // terminal, broadcast to every decision
};

// Queue ordering provider backed by the actor; records the trajectory when
// given one. The sampled (or greedy) row ranks first, the remaining rows
// follow by descending probability, overflow jobs trail in submit order.
class RlRanker : public RankProvider {
 public:
  RlRanker(const AgentNets& nets, StateOptions opts, bool greedy, Rng* rng,
           Trajectory* traj);
  std::vector<std::size_t> rank(const std::vector<const JobRecord*>& queue,
                                const ClusterState& state,
                                std::int64_t now) override;

 private:
  const AgentNets& nets_;
  StateOptions opts_;
  bool greedy_;
  Rng* rng_;
  Trajectory* traj_;
};

struct PpoDiag {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
  double mean_ratio = 0;
  int samples = 0;
};

// Clipped-surrogate update over one trajectory: advantage is the broadcast
// reward minus the stored value, the value head regresses to the reward.
PpoDiag ppo_update(AgentNets& nets, const Trajectory& traj,
                   const PpoHyper& hyper, Rng& shuffle_rng);

struct CurvePoint {
  int epoch = 0;
  int batch = 0;
  double reward = 0;
  double base_score = 0;
  double rl_score = 0;
  int decisions = 0;
  PpoDiag diag;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
};

// Dual-pipeline driver: every batch runs once under the base policy and once
// under the agent (identical jobs, fresh cluster), the scores set the reward,
// and one update follows. Training observes ground-truth runtimes.
TrainResult train(const TraceSet& trace, const ClusterSpec& spec,
                  const AgentConfig& cfg, AgentNets& nets,
                  const std::function<void(const CurvePoint&)>& on_batch = {});

struct EvalEpisodeStats {
  double wait_sum = 0;
  double jct_sum = 0;
  double bsld_sum = 0;
  double util = 0;
  double wait_mean = 0;
  double jct_mean = 0;
};

struct EvalRun {
  int run = 0;
  EvalEpisodeStats base;
  EvalEpisodeStats rl;
};

struct EvalResult {
  std::vector<EvalRun> runs;
  EvalEpisodeStats base_mean;
  EvalEpisodeStats rl_mean;
  int batch_size = 0;
};

// Greedy evaluation on sampled batches; policies and features observe
// requested runtimes here, matching how users would drive the scheduler.
EvalResult evaluate(const TraceSet& trace, const ClusterSpec& spec,
                    const AgentConfig& cfg, const AgentNets& nets, int runs,
                    int batch_size);

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const AgentNets& nets, const AgentConfig& cfg,
                     const std::string& path);
// Verifies format version and that the stored layout matches `expect_naive`.
AgentNets load_checkpoint(const std::string& path, bool expect_naive);

// Header fields only, for callers that need the stored mode before deciding
// how to load (the CLI defaults its feature mode from here).
struct CheckpointInfo {
  std::string layout_version;
  PolicyKind base_policy = PolicyKind::fifo;
  Metric metric = Metric::wait;
  bool naive = false;
  std::int64_t trained_batches = 0;
};

CheckpointInfo read_checkpoint_info(const std::string& path);

}  // namespace gsched
