#include "gsched/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gsched/errors.hpp"

namespace gsched {

PolicyKind parse_policy(const std::string& name) {
  if (name == "fifo") return PolicyKind::fifo;
  if (name == "sjf") return PolicyKind::sjf;
  if (name == "wfp3") return PolicyKind::wfp3;
  if (name == "unicep") return PolicyKind::unicep;
  if (name == "f1") return PolicyKind::f1;
  if (name == "slurm_mf" || name == "slurm") return PolicyKind::slurm_mf;
  throw ConfigError("unknown policy: " + name);
}

std::string policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::fifo: return "fifo";
    case PolicyKind::sjf: return "sjf";
    case PolicyKind::wfp3: return "wfp3";
    case PolicyKind::unicep: return "unicep";
    case PolicyKind::f1: return "f1";
    case PolicyKind::slurm_mf: return "slurm_mf";
  }
  return "fifo";
}

PriorityContext make_priority_context(
    std::int64_t now, const std::vector<const JobRecord*>& queue,
    RuntimeSource source,
    const std::unordered_map<std::string, double>& user_gpu_seconds,
    int total_gpus) {
  PriorityContext ctx;
  ctx.now = now;
  ctx.runtime_source = source;
  ctx.queue = &queue;
  ctx.user_gpu_seconds = &user_gpu_seconds;
  ctx.total_gpus = total_gpus;
  if (!queue.empty()) {
    ctx.req_time_min = std::numeric_limits<std::int64_t>::max();
    ctx.req_time_max = std::numeric_limits<std::int64_t>::min();
    for (const JobRecord* j : queue) {
      ctx.req_time_min = std::min(ctx.req_time_min, j->requested_time);
      ctx.req_time_max = std::max(ctx.req_time_max, j->requested_time);
    }
  }
  return ctx;
}

namespace {

constexpr double kWeekSeconds = 7.0 * 24.0 * 3600.0;

double observed_runtime(const JobRecord& job, const PriorityContext& ctx) {
  std::int64_t rt = ctx.runtime_source == RuntimeSource::actual
                        ? job.actual_runtime
                        : job.requested_time;
  return static_cast<double>(std::max<std::int64_t>(1, rt));
}

double waiting(const JobRecord& job, const PriorityContext& ctx) {
  return static_cast<double>(std::max<std::int64_t>(0, ctx.now - job.submit_time));
}

double slurm_multifactor(const JobRecord& job, const PriorityContext& ctx) {
  double age = std::min(waiting(job, ctx) / kWeekSeconds, 1.0);

  double usage = 0.0;
  if (ctx.user_gpu_seconds) {
    auto it = ctx.user_gpu_seconds->find(job.user_id);
    if (it != ctx.user_gpu_seconds->end()) usage = it->second;
  }
  // half-decay constant: the whole cluster running for one week
  double half_decay = static_cast<double>(ctx.total_gpus) * kWeekSeconds;
  double fairshare =
      half_decay > 0.0 ? std::exp2(-usage / half_decay) : 1.0;

  // shorter requested time scores higher; min-max over the queue snapshot
  double job_attr = 1.0;
  if (ctx.req_time_max > ctx.req_time_min) {
    double norm = static_cast<double>(job.requested_time - ctx.req_time_min) /
                  static_cast<double>(ctx.req_time_max - ctx.req_time_min);
    job_attr = 1.0 - norm;
  }

  const double partition = 1.0;
  const double qos = 1.0;
  return 1000.0 * (age + fairshare + job_attr + partition + qos);
}

}  // namespace

double priority(PolicyKind kind, const JobRecord& job,
                const PriorityContext& ctx) {
  switch (kind) {
    case PolicyKind::fifo:
      return -static_cast<double>(job.submit_time);
    case PolicyKind::sjf:
      return -observed_runtime(job, ctx);
    case PolicyKind::wfp3: {
      double wt = waiting(job, ctx);
      double rt = observed_runtime(job, ctx);
      double nt = job.requested_gpus;
      double r = wt / rt;
      return r * r * r * nt;
    }
    case PolicyKind::unicep: {
      double wt = waiting(job, ctx);
      double rt = observed_runtime(job, ctx);
      double nt = std::max(job.requested_gpus, 2);  // log2(1) would divide by 0
      return wt / (std::log2(nt) * rt);
    }
    case PolicyKind::f1: {
      double rt = observed_runtime(job, ctx);
      double nt = job.requested_gpus;
      double st = static_cast<double>(std::max<std::int64_t>(1, job.submit_time));
      return -(std::log10(rt) * nt + 870.0 * std::log10(st));
    }
    case PolicyKind::slurm_mf:
      return slurm_multifactor(job, ctx);
  }
  throw ConfigError("unhandled policy kind");
}

std::vector<std::size_t> rank_order(PolicyKind kind,
                                    const std::vector<const JobRecord*>& queue,
                                    const PriorityContext& ctx) {
  std::vector<double> score(queue.size());
  for (std::size_t i = 0; i < queue.size(); ++i)
    score[i] = priority(kind, *queue[i], ctx);
  std::vector<std::size_t> order(queue.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    if (queue[a]->submit_time != queue[b]->submit_time)
      return queue[a]->submit_time < queue[b]->submit_time;
    return queue[a]->job_id < queue[b]->job_id;
  });
  return order;
}

}  // namespace gsched
