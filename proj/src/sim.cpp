#include "gsched/sim.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <map>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "gsched/errors.hpp"
#include "gsched/io.hpp"

namespace gsched {

namespace {

struct Event {
  std::int64_t t = 0;
  int kind = 0;  // 0 completion, 1 arrival: completions drain first
  std::string job_id;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.t != b.t) return a.t > b.t;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.job_id > b.job_id;
  }
};

std::int64_t estimated_runtime(const JobRecord& j, RuntimeSource source) {
  return std::max<std::int64_t>(
      1, source == RuntimeSource::actual ? j.actual_runtime : j.requested_time);
}

class Episode {
 public:
  Episode(const std::vector<JobRecord>& batch, const ClusterSpec& spec,
          const SimConfig& cfg, RankProvider* ranker)
      : batch_(batch), spec_(spec), cfg_(cfg), ranker_(ranker), state_(spec) {
    if (batch.empty()) throw ConfigError("empty batch");
    if (cfg.mode == SchedulerMode::rl && ranker == nullptr)
      throw ConfigError("rl mode needs a rank provider");
    if (cfg.lookahead < 1) throw ConfigError("lookahead must be >= 1");
    result_.util.total_gpus = spec.total_gpus();

    std::unordered_set<std::string> ids;
    ClusterState empty(spec);
    for (const auto& j : batch_) {
      if (!ids.insert(j.job_id).second)
        throw DataError("duplicate job id in batch: " + j.job_id);
      if (count_placements(empty, j) == 0)
        throw DataError("unschedulable job (exceeds cluster capacity): " +
                        j.job_id);
      by_id_.emplace(j.job_id, &j);
    }
  }

  EpisodeResult run() {
    for (const auto& j : batch_) events_.push({j.submit_time, 1, j.job_id});
    while (!events_.empty()) {
      std::int64_t now = events_.top().t;
      while (!events_.empty() && events_.top().t == now) {
        Event ev = events_.top();
        events_.pop();
        if (ev.kind == 0) {
          complete(ev.job_id, now);
        } else {
          queue_.push_back(by_id_.at(ev.job_id));
          log(now, "arrive", ev.job_id);
        }
      }
      schedule_pass(now);
    }
    if (!queue_.empty()) throw EngineError("episode ended with queued jobs");

    for (const auto& j : batch_) {
      auto it = outcomes_.find(j.job_id);
      if (it == outcomes_.end())
        throw EngineError("job never completed: " + j.job_id);
      result_.outcomes.push_back(it->second);
    }
    result_.score_wait = aggregate_score(result_.outcomes, Metric::wait);
    result_.score_jct = aggregate_score(result_.outcomes, Metric::jct);
    result_.score_bsld =
        aggregate_score(result_.outcomes, Metric::bsld, cfg_.bsld_tau);
    std::int64_t h_start = batch_.front().submit_time;
    std::int64_t h_end = h_start;
    for (const auto& [id, o] : outcomes_) {
      h_start = std::min(h_start, o.submit);
      h_end = std::max(h_end, o.end);
    }
    result_.makespan = h_end;
    result_.util_fraction = h_end > h_start
                                ? utilization(result_.util, h_start, h_end)
                                : 0.0;
    return std::move(result_);
  }

 private:
  void log(std::int64_t t, const char* kind, const std::string& job_id,
           const PlacementPlan* plan = nullptr, std::int64_t reservation = -1) {
    if (!cfg_.collect_log) return;
    LogEvent ev;
    ev.t = t;
    ev.kind = kind;
    ev.job_id = job_id;
    if (plan) ev.plan = *plan;
    ev.reservation = reservation;
    ev.queue_size = queue_.size();
    ev.digest = hex64(state_.occupancy_digest());
    result_.log.push_back(std::move(ev));
  }

  void complete(const std::string& job_id, std::int64_t now) {
    const JobRecord& j = *by_id_.at(job_id);
    state_.release(job_id);
    user_gpu_seconds_[j.user_id] +=
        static_cast<double>(j.requested_gpus) *
        static_cast<double>(j.actual_runtime);
    result_.util.record(now, state_.allocated_gpus());
    log(now, "complete", job_id);
  }

  void start(const JobRecord& j, const PlacementPlan& plan, std::int64_t now,
             bool via_backfill) {
    state_.allocate(j, plan);
    JobOutcome o;
    o.job_id = j.job_id;
    o.submit = j.submit_time;
    o.start = now;
    o.end = now + j.actual_runtime;
    o.gpus = j.requested_gpus;
    outcomes_.emplace(j.job_id, o);
    events_.push({o.end, 0, j.job_id});
    result_.util.record(now, state_.allocated_gpus());
    queue_.erase(std::find(queue_.begin(), queue_.end(), &j));
    log(now, via_backfill ? "backfill_start" : "start", j.job_id, &plan);
  }

  std::vector<std::size_t> rank_queue(std::int64_t now) {
    if (cfg_.mode == SchedulerMode::rl) {
      ++result_.decision_count;
      return ranker_->rank(queue_, state_, now);
    }
    PriorityContext ctx =
        make_priority_context(now, queue_, cfg_.runtime_source,
                              user_gpu_seconds_, spec_.total_gpus());
    return rank_order(cfg_.policy, queue_, ctx);
  }

  void schedule_pass(std::int64_t now) {
    while (!queue_.empty()) {
      if (state_.total_free_gpus() == 0) return;  // nothing can start or backfill
      std::vector<std::size_t> ranked = rank_queue(now);
      if (ranked.size() != queue_.size())
        throw EngineError("rank provider returned wrong size");

      bool started_any = false;
      if (cfg_.mode == SchedulerMode::rl && !cfg_.direct_placement) {
        std::vector<const JobRecord*> ranked_jobs;
        ranked_jobs.reserve(ranked.size());
        for (std::size_t idx : ranked) ranked_jobs.push_back(queue_[idx]);
        auto entries =
            lookahead_allocate(state_, ranked_jobs, cfg_.lookahead);
        for (const auto& e : entries) {
          if (e.scheduled)
            start(*by_id_.at(e.job_id), e.solution.plan, now, false);
        }
        started_any = std::any_of(entries.begin(), entries.end(),
                                  [](const LookaheadEntry& e) { return e.scheduled; });
        if (started_any) continue;
        backfill_pass(ranked_jobs, now);
        return;
      }

      const JobRecord& head = *queue_[ranked.front()];
      auto plans = candidate_placements(state_, head);
      if (!plans.empty()) {
        start(head, plans.front(), now, false);
        started_any = true;
      }
      if (!started_any) {
        std::vector<const JobRecord*> ranked_jobs;
        ranked_jobs.reserve(ranked.size());
        for (std::size_t idx : ranked) ranked_jobs.push_back(queue_[idx]);
        backfill_pass(ranked_jobs, now);
        return;
      }
    }
  }

  // Earliest hypothetical time the head fits, releasing running jobs in
  // estimated completion order. Estimates follow the configured source, so
  // training mode reserves on ground truth and evaluation mode on requests.
  std::int64_t head_reservation(const JobRecord& head, std::int64_t now) {
    std::vector<std::pair<std::int64_t, std::string>> releases;
    releases.reserve(outcomes_.size());
    for (const auto& [id, plan] : state_.allocations()) {
      const JobRecord& j = *by_id_.at(id);
      std::int64_t est_end =
          outcomes_.at(id).start + estimated_runtime(j, cfg_.runtime_source);
      releases.emplace_back(std::max(est_end, now), id);
    }
    std::sort(releases.begin(), releases.end());
    ClusterState probe = state_;
    for (const auto& [t, id] : releases) {
      probe.release(id);
      if (can_schedule_now(probe, head)) return t;
    }
    return std::numeric_limits<std::int64_t>::max();
  }

  void backfill_pass(const std::vector<const JobRecord*>& ranked_jobs,
                     std::int64_t now) {
    if (!cfg_.backfill || ranked_jobs.size() < 2) return;
    const JobRecord& head = *ranked_jobs.front();
    std::int64_t reservation = head_reservation(head, now);
    if (reservation == std::numeric_limits<std::int64_t>::max()) return;
    log(now, "reserve", head.job_id, nullptr, reservation);

    for (std::size_t i = 1; i < ranked_jobs.size(); ++i) {
      const JobRecord& j = *ranked_jobs[i];
      if (now + estimated_runtime(j, cfg_.runtime_source) > reservation)
        continue;
      auto plans = candidate_placements(state_, j);
      if (plans.empty()) continue;
      start(j, plans.front(), now, true);
    }
  }

  const std::vector<JobRecord>& batch_;
  const ClusterSpec& spec_;
  const SimConfig& cfg_;
  RankProvider* ranker_;
  ClusterState state_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
  std::vector<const JobRecord*> queue_;
  std::unordered_map<std::string, const JobRecord*> by_id_;
  std::unordered_map<std::string, JobOutcome> outcomes_;
  std::unordered_map<std::string, double> user_gpu_seconds_;
  EpisodeResult result_;
};

}  // namespace

EpisodeResult run_episode(const std::vector<JobRecord>& batch,
                          const ClusterSpec& spec, const SimConfig& cfg,
                          RankProvider* ranker) {
  Episode ep(batch, spec, cfg, ranker);
  return ep.run();
}

double episode_score(const EpisodeResult& result, Metric metric) {
  switch (metric) {
    case Metric::wait: return result.score_wait;
    case Metric::jct: return result.score_jct;
    case Metric::bsld: return result.score_bsld;
    case Metric::utilization: return -result.util_fraction;
  }
  return result.score_wait;
}

std::vector<LatencyRow> measure_overhead(
    const std::vector<int>& queue_sizes,
    const std::function<void(const std::vector<const JobRecord*>&,
                             const ClusterState&, std::int64_t)>& decision_pass,
    const TraceSet& trace, const ClusterSpec& spec, int reps) {
  if (reps < 1) throw ConfigError("reps must be >= 1");
  if (trace.jobs.empty()) throw DataError("empty trace for overhead run");
  std::vector<LatencyRow> out;
  for (int size : queue_sizes) {
    if (size < 1) throw ConfigError("queue size must be >= 1");
    if (static_cast<std::size_t>(size) > trace.jobs.size())
      throw DataError("trace shorter than requested queue size");
    std::vector<const JobRecord*> queue;
    queue.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i)
      queue.push_back(&trace.jobs[static_cast<std::size_t>(i)]);
    std::int64_t now = 0;
    for (const JobRecord* j : queue) now = std::max(now, j->submit_time);

    ClusterState state(spec);
    LatencyRow row;
    row.queue_size = size;
    row.reps = reps;
    row.min_ms = std::numeric_limits<double>::infinity();
    double total = 0.0;
    // one untimed warmup hides allocator and cache effects
    decision_pass(queue, state, now);
    for (int r = 0; r < reps; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      decision_pass(queue, state, now);
      auto t1 = std::chrono::steady_clock::now();
      double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      total += ms;
      row.min_ms = std::min(row.min_ms, ms);
    }
    row.mean_ms = total / reps;
    out.push_back(row);
  }
  return out;
}

}  // namespace gsched
