#include "gsched/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>

#include "gsched/errors.hpp"
#include "gsched/io.hpp"

namespace gsched {

namespace {

constexpr double kLogFloor = 1e-300;

std::vector<double> ov_row(const StateMatrix& sm, int row) {
  auto first = sm.ov.begin() + static_cast<std::ptrdiff_t>(row) * kObsWidth;
  return std::vector<double>(first, first + kObsWidth);
}

std::string expected_layout(bool naive) {
  return naive ? kLayoutVersionNaive : kLayoutVersionPro;
}

void check_layout(const AgentNets& nets, bool naive) {
  if (nets.layout_version != expected_layout(naive)) {
    throw ConfigError("feature layout mismatch: nets carry " +
                      nets.layout_version + ", run wants " +
                      expected_layout(naive));
  }
}

}  // namespace

AgentNets init_agent(bool naive, const PpoHyper& ppo, std::uint64_t seed) {
  AgentNets nets;
  nets.actor = init_mlp({kObsWidth, 32, 16, 1}, Mlp::Act::tanh_act,
                        derive_seed(seed, 0x300000001ull));
  nets.critic = init_mlp({kMaxQueueRows * kCtxWidth, 64, 32, 1},
                         Mlp::Act::tanh_act, derive_seed(seed, 0x300000002ull));
  nets.opt_actor = init_adam(nets.actor, ppo.policy_lr);
  nets.opt_critic = init_adam(nets.critic, ppo.value_lr);
  nets.layout_version = expected_layout(naive);
  return nets;
}

PriorityVector actor_priorities(const Mlp& actor, const StateMatrix& sm) {
  PriorityVector pv;
  pv.valid_rows = sm.valid_rows;
  // Every row goes through the net, padded ones included, so a decision pass
  // costs the same whatever the queue holds; the mask drops padding after.
  std::vector<double> logits(kMaxQueueRows, 0.0);
  std::vector<char> mask(kMaxQueueRows, 0);
  for (int r = 0; r < kMaxQueueRows; ++r) {
    logits[static_cast<std::size_t>(r)] = forward(actor, ov_row(sm, r)).front();
    mask[static_cast<std::size_t>(r)] = r < sm.valid_rows ? 1 : 0;
  }
  if (sm.valid_rows == 0) {
    pv.probs.assign(kMaxQueueRows, 0.0);
    return pv;
  }
  pv.probs = softmax(logits, &mask);
  return pv;
}

double critic_value(const Mlp& critic, const StateMatrix& sm) {
  return forward(critic, sm.cv).front();
}

int select_action(const PriorityVector& pv, const StateMatrix& sm, bool greedy,
                  Rng* rng) {
  (void)sm;
  if (pv.valid_rows <= 0) throw EngineError("select_action: no valid rows");
  if (greedy) {
    // rows arrive sorted by (submit, job_id), so keeping the first argmax
    // already breaks ties toward the earlier submitter
    int best = 0;
    for (int r = 1; r < pv.valid_rows; ++r) {
      if (pv.probs[static_cast<std::size_t>(r)] >
          pv.probs[static_cast<std::size_t>(best)]) {
        best = r;
      }
    }
    return best;
  }
  if (rng == nullptr) throw EngineError("select_action: sampling needs an rng");
  std::vector<double> w(pv.probs.begin(),
                        pv.probs.begin() + pv.valid_rows);
  return static_cast<int>(rng->categorical(w));
}

double compute_reward(double base_score, double rl_score) {
  return (base_score - rl_score) / std::max(std::abs(base_score), 1e-6);
}

RlRanker::RlRanker(const AgentNets& nets, StateOptions opts, bool greedy,
                   Rng* rng, Trajectory* traj)
    : nets_(nets), opts_(opts), greedy_(greedy), rng_(rng), traj_(traj) {}

std::vector<std::size_t> RlRanker::rank(
    const std::vector<const JobRecord*>& queue, const ClusterState& state,
    std::int64_t now) {
  StateMatrix sm = build_state(state, queue, now, opts_);
  PriorityVector pv = actor_priorities(nets_.actor, sm);
  int chosen = select_action(pv, sm, greedy_, rng_);

  std::vector<int> rest;
  rest.reserve(static_cast<std::size_t>(pv.valid_rows));
  for (int r = 0; r < pv.valid_rows; ++r) {
    if (r != chosen) rest.push_back(r);
  }
  // stable on the submit-ordered rows, so probability ties stay FIFO
  std::stable_sort(rest.begin(), rest.end(), [&](int a, int b) {
    return pv.probs[static_cast<std::size_t>(a)] >
           pv.probs[static_cast<std::size_t>(b)];
  });

  std::vector<std::size_t> ranked;
  ranked.reserve(queue.size());
  std::vector<char> used(queue.size(), 0);
  auto push_row = [&](int r) {
    std::size_t qi = sm.row_queue_index[static_cast<std::size_t>(r)];
    ranked.push_back(qi);
    used[qi] = 1;
  };
  push_row(chosen);
  for (int r : rest) push_row(r);

  // queue positions past the matrix cutoff trail in submit order
  std::vector<std::size_t> overflow;
  for (std::size_t i = 0; i < queue.size(); ++i) {
    if (!used[i]) overflow.push_back(i);
  }
  std::sort(overflow.begin(), overflow.end(),
            [&](std::size_t a, std::size_t b) {
              if (queue[a]->submit_time != queue[b]->submit_time) {
                return queue[a]->submit_time < queue[b]->submit_time;
              }
              return queue[a]->job_id < queue[b]->job_id;
            });
  ranked.insert(ranked.end(), overflow.begin(), overflow.end());

  if (traj_ != nullptr) {
    Decision d;
    d.row = chosen;
    d.logp_old =
        std::log(std::max(pv.probs[static_cast<std::size_t>(chosen)],
                          kLogFloor));
    d.value_old = critic_value(nets_.critic, sm);
    d.state = std::move(sm);
    traj_->decisions.push_back(std::move(d));
  }
  return ranked;
}

PpoDiag ppo_update(AgentNets& nets, const Trajectory& traj,
                   const PpoHyper& hyper, Rng& shuffle_rng) {
  PpoDiag diag;
  const std::size_t n = traj.decisions.size();
  if (n == 0) return diag;

  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) {
    adv[i] = traj.reward - traj.decisions[i].value_old;
  }
  if (hyper.normalize_advantages && n > 1) {
    double mean = std::accumulate(adv.begin(), adv.end(), 0.0) /
                  static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv) {
      a = sd > 1e-8 ? (a - mean) / sd : a - mean;
    }
  }

  const std::size_t mb =
      static_cast<std::size_t>(std::max(1, hyper.minibatch));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::int64_t clip_events = 0;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    }
    for (std::size_t off = 0; off < n; off += mb) {
      const std::size_t end = std::min(n, off + mb);
      Grads ga = Grads::zeros_like(nets.actor);
      Grads gc = Grads::zeros_like(nets.critic);

      for (std::size_t k = off; k < end; ++k) {
        const Decision& d = traj.decisions[order[k]];
        const double a = adv[order[k]];
        const int valid = d.state.valid_rows;

        // padded rows carry exactly zero gradient, so only the real rows
        // get a cached forward here
        std::vector<ForwardCache> caches(static_cast<std::size_t>(valid));
        std::vector<double> logits(kMaxQueueRows, 0.0);
        std::vector<char> mask(kMaxQueueRows, 0);
        for (int r = 0; r < valid; ++r) {
          logits[static_cast<std::size_t>(r)] =
              forward(nets.actor, ov_row(d.state, r),
                      &caches[static_cast<std::size_t>(r)])
                  .front();
          mask[static_cast<std::size_t>(r)] = 1;
        }
        std::vector<double> p = softmax(logits, &mask);

        const double p_row =
            std::max(p[static_cast<std::size_t>(d.row)], kLogFloor);
        const double ratio = std::exp(std::log(p_row) - d.logp_old);
        const double surr1 = ratio * a;
        const double lo = 1.0 - hyper.clip;
        const double hi = 1.0 + hyper.clip;
        const double surr2 = std::clamp(ratio, lo, hi) * a;
        // min() picks the unclipped branch on ties, and only that branch
        // passes gradient through the ratio
        const double coef = surr1 <= surr2 ? surr1 : 0.0;
        if (ratio < lo || ratio > hi) ++clip_events;

        double entropy = 0.0;
        for (int r = 0; r < valid; ++r) {
          double pr = p[static_cast<std::size_t>(r)];
          if (pr > 0.0) entropy -= pr * std::log(pr);
        }

        for (int r = 0; r < valid; ++r) {
          const double pr = p[static_cast<std::size_t>(r)];
          const double indicator = r == d.row ? 1.0 : 0.0;
          const double dsurr = -coef * (indicator - pr);
          const double dent =
              pr > 0.0
                  ? hyper.entropy_coef * pr * (std::log(pr) + entropy)
                  : 0.0;
          const double dz = dsurr + dent;
          if (dz != 0.0) {
            backward(nets.actor, caches[static_cast<std::size_t>(r)], {dz},
                     &ga);
          }
        }

        ForwardCache cc;
        const double v = forward(nets.critic, d.state.cv, &cc).front();
        const double verr = v - traj.reward;
        if (verr != 0.0) backward(nets.critic, cc, {2.0 * verr}, &gc);

        diag.policy_loss += -std::min(surr1, surr2);
        diag.value_loss += verr * verr;
        diag.entropy += entropy;
        diag.mean_ratio += ratio;
        diag.samples += 1;
      }

      const double inv = 1.0 / static_cast<double>(end - off);
      ga.scale(inv);
      gc.scale(inv);
      adam_step(nets.actor, nets.opt_actor, ga);
      adam_step(nets.critic, nets.opt_critic, gc);
    }
  }

  if (diag.samples > 0) {
    const double inv = 1.0 / static_cast<double>(diag.samples);
    diag.policy_loss *= inv;
    diag.value_loss *= inv;
    diag.entropy *= inv;
    diag.mean_ratio *= inv;
    diag.clip_fraction = static_cast<double>(clip_events) * inv;
  }
  return diag;
}

namespace {

SimConfig base_sim_config(const AgentConfig& cfg, RuntimeSource source) {
  SimConfig sc;
  sc.mode = SchedulerMode::base;
  sc.policy = cfg.base_policy;
  sc.runtime_source = source;
  sc.backfill = cfg.backfill;
  sc.bsld_tau = cfg.bsld_tau;
  return sc;
}

SimConfig rl_sim_config(const AgentConfig& cfg, RuntimeSource source) {
  SimConfig sc = base_sim_config(cfg, source);
  sc.mode = SchedulerMode::rl;
  sc.lookahead = cfg.lookahead;
  sc.direct_placement = cfg.naive;
  return sc;
}

EvalEpisodeStats episode_stats(const EpisodeResult& er) {
  EvalEpisodeStats s;
  s.wait_sum = er.score_wait;
  s.jct_sum = er.score_jct;
  s.bsld_sum = er.score_bsld;
  s.util = er.util_fraction;
  const double n = static_cast<double>(er.outcomes.size());
  s.wait_mean = n > 0 ? s.wait_sum / n : 0.0;
  s.jct_mean = n > 0 ? s.jct_sum / n : 0.0;
  return s;
}

}  // namespace

TrainResult train(const TraceSet& trace, const ClusterSpec& spec,
                  const AgentConfig& cfg, AgentNets& nets,
                  const std::function<void(const CurvePoint&)>& on_batch) {
  check_layout(nets, cfg.naive);
  if (cfg.epochs < 0 || cfg.batches_per_epoch < 1 || cfg.batch_size < 1) {
    throw ConfigError("train: epochs must be >= 0, batches and batch size positive");
  }
  const SimConfig base_cfg = base_sim_config(cfg, RuntimeSource::actual);
  const SimConfig rl_cfg = rl_sim_config(cfg, RuntimeSource::actual);
  const StateOptions opts{cfg.naive, RuntimeSource::actual};

  TrainResult out;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      const std::uint64_t batch_seed = derive_seed(
          cfg.seed,
          0x100000000ull + static_cast<std::uint64_t>(epoch) * 10007u +
              static_cast<std::uint64_t>(b));
      const std::vector<JobRecord> batch =
          sample_batch(trace, static_cast<std::size_t>(cfg.batch_size),
                       batch_seed);

      const EpisodeResult base_run = run_episode(batch, spec, base_cfg);
      const double base_score = episode_score(base_run, cfg.metric);

      Trajectory traj;
      Rng action_rng(derive_seed(batch_seed, 1));
      RlRanker ranker(nets, opts, /*greedy=*/false, &action_rng, &traj);
      const EpisodeResult rl_run = run_episode(batch, spec, rl_cfg, &ranker);
      const double rl_score = episode_score(rl_run, cfg.metric);

      traj.reward = compute_reward(base_score, rl_score);
      Rng shuffle_rng(derive_seed(batch_seed, 2));
      const PpoDiag diag = ppo_update(nets, traj, cfg.ppo, shuffle_rng);
      nets.trained_batches += 1;

      CurvePoint pt;
      pt.epoch = epoch;
      pt.batch = b;
      pt.reward = traj.reward;
      pt.base_score = base_score;
      pt.rl_score = rl_score;
      pt.decisions = static_cast<int>(traj.decisions.size());
      pt.diag = diag;
      out.curve.push_back(pt);
      if (on_batch) on_batch(pt);
    }
  }
  return out;
}

EvalResult evaluate(const TraceSet& trace, const ClusterSpec& spec,
                    const AgentConfig& cfg, const AgentNets& nets, int runs,
                    int batch_size) {
  check_layout(nets, cfg.naive);
  if (runs < 1 || batch_size < 1) {
    throw ConfigError("evaluate: runs and batch size must be positive");
  }
  const SimConfig base_cfg = base_sim_config(cfg, RuntimeSource::requested);
  const SimConfig rl_cfg = rl_sim_config(cfg, RuntimeSource::requested);
  const StateOptions opts{cfg.naive, RuntimeSource::requested};

  EvalResult out;
  out.batch_size = batch_size;
  for (int r = 0; r < runs; ++r) {
    // eval stream kept clear of the training batch stream
    const std::uint64_t batch_seed =
        derive_seed(cfg.seed, 0x200000000ull + static_cast<std::uint64_t>(r));
    const std::vector<JobRecord> batch = sample_batch(
        trace, static_cast<std::size_t>(batch_size), batch_seed);

    const EpisodeResult base_run = run_episode(batch, spec, base_cfg);
    RlRanker ranker(nets, opts, /*greedy=*/true, nullptr, nullptr);
    const EpisodeResult rl_run = run_episode(batch, spec, rl_cfg, &ranker);

    EvalRun row;
    row.run = r;
    row.base = episode_stats(base_run);
    row.rl = episode_stats(rl_run);
    out.runs.push_back(row);
  }

  auto add = [](EvalEpisodeStats& acc, const EvalEpisodeStats& s) {
    acc.wait_sum += s.wait_sum;
    acc.jct_sum += s.jct_sum;
    acc.bsld_sum += s.bsld_sum;
    acc.util += s.util;
    acc.wait_mean += s.wait_mean;
    acc.jct_mean += s.jct_mean;
  };
  auto divide = [](EvalEpisodeStats& acc, double k) {
    acc.wait_sum /= k;
    acc.jct_sum /= k;
    acc.bsld_sum /= k;
    acc.util /= k;
    acc.wait_mean /= k;
    acc.jct_mean /= k;
  };
  for (const EvalRun& row : out.runs) {
    add(out.base_mean, row.base);
    add(out.rl_mean, row.rl);
  }
  divide(out.base_mean, static_cast<double>(runs));
  divide(out.rl_mean, static_cast<double>(runs));
  return out;
}

void save_checkpoint(const AgentNets& nets, const AgentConfig& cfg,
                     const std::string& path) {
  nlohmann::json j;
  j["format"] = "gsched-checkpoint";
  j["version"] = kCheckpointVersion;
  j["layout_version"] = nets.layout_version;
  j["actor"] = mlp_to_json(nets.actor);
  j["critic"] = mlp_to_json(nets.critic);
  j["opt_actor"] = adam_to_json(nets.opt_actor);
  j["opt_critic"] = adam_to_json(nets.opt_critic);
  j["meta"] = {{"base_policy", policy_name(cfg.base_policy)},
               {"metric", metric_name(cfg.metric)},
               {"naive", cfg.naive},
               {"trained_batches", nets.trained_batches}};
  atomic_write_file(path, j.dump(2) + "\n");
}

namespace {

nlohmann::json parse_checkpoint(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
  if (!j.is_object() || j.value("format", std::string{}) != "gsched-checkpoint") {
    throw DataError("checkpoint " + path + ": not a checkpoint file");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw DataError("checkpoint " + path + ": unsupported version");
  }
  return j;
}

}  // namespace

AgentNets load_checkpoint(const std::string& path, bool expect_naive) {
  const nlohmann::json j = parse_checkpoint(path);
  AgentNets nets;
  try {
    nets.layout_version = j.at("layout_version").get<std::string>();
    if (nets.layout_version != expected_layout(expect_naive)) {
      throw DataError("checkpoint " + path + ": layout " +
                      nets.layout_version + " does not match expected " +
                      expected_layout(expect_naive));
    }
    nets.actor = mlp_from_json(j.at("actor"));
    nets.critic = mlp_from_json(j.at("critic"));
    nets.opt_actor = adam_from_json(j.at("opt_actor"), nets.actor);
    nets.opt_critic = adam_from_json(j.at("opt_critic"), nets.critic);
    nets.trained_batches =
        j.at("meta").value("trained_batches", std::int64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
  if (nets.actor.input_size() != kObsWidth || nets.actor.output_size() != 1) {
    throw DataError("checkpoint " + path + ": actor shape mismatch");
  }
  if (nets.critic.input_size() != kMaxQueueRows * kCtxWidth ||
      nets.critic.output_size() != 1) {
    throw DataError("checkpoint " + path + ": critic shape mismatch");
  }
  return nets;
}

CheckpointInfo read_checkpoint_info(const std::string& path) {
  const nlohmann::json j = parse_checkpoint(path);
  CheckpointInfo info;
  try {
    info.layout_version = j.at("layout_version").get<std::string>();
    const nlohmann::json& meta = j.at("meta");
    info.base_policy = parse_policy(meta.at("base_policy").get<std::string>());
    info.metric = parse_metric(meta.at("metric").get<std::string>());
    info.naive = meta.value("naive", false);
    info.trained_batches = meta.value("trained_batches", std::int64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
  return info;
}

}  // namespace gsched
