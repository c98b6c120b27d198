#include "gsched/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "gsched/errors.hpp"

namespace gsched {

namespace {

double observed_time(const JobRecord& job, RuntimeSource source) {
  std::int64_t rt = source == RuntimeSource::actual ? job.actual_runtime
                                                    : job.requested_time;
  return static_cast<double>(std::max<std::int64_t>(1, rt));
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// min-max over a column; constant columns collapse to 0
struct MinMax {
  double lo = 0, hi = 0;
  bool init = false;
  void feed(double v) {
    if (!init) { lo = hi = v; init = true; return; }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double norm(double v) const {
    if (!init || hi <= lo) return 0.0;
    return clamp01((v - lo) / (hi - lo));
  }
};

}  // namespace

double dsr(const ClusterState& state, const JobRecord& job) {
  const bool any_type = job.gpu_type.empty() || job.gpu_type == "MISC";
  int matching_free = 0;
  for (std::size_t i = 0; i < state.nodes().size(); ++i) {
    if (any_type || state.spec().nodes[i].gpu_type == job.gpu_type)
      matching_free += state.nodes()[i].free_gpus;
  }
  double value = static_cast<double>(job.requested_gpus) /
                 static_cast<double>(std::max(matching_free, 1));
  return std::min(std::max(value, 0.0), static_cast<double>(job.requested_gpus));
}

double future_avail(const ClusterState& state,
                    const std::vector<const JobRecord*>& queue,
                    std::size_t idx) {
  if (idx >= queue.size()) throw EngineError("future_avail: bad queue index");
  std::set<std::string> cluster_types;
  for (const auto& n : state.spec().nodes) cluster_types.insert(n.gpu_type);

  double total_free = static_cast<double>(state.total_free_gpus());
  double ahead = 0.0;
  for (std::size_t k = 0; k < idx; ++k) {
    const JobRecord* j = queue[k];
    bool targets_cluster = j->gpu_type.empty() || j->gpu_type == "MISC" ||
                           cluster_types.count(j->gpu_type) > 0;
    if (targets_cluster) ahead += static_cast<double>(j->requested_gpus);
  }
  return total_free - static_cast<double>(queue[idx]->requested_gpus) - ahead;
}

double cff(const ClusterState& state) {
  double total = 0.0, sq = 0.0;
  for (const auto& ns : state.nodes()) {
    double f = static_cast<double>(ns.free_gpus);
    total += f;
    sq += f * f;
  }
  if (total <= 0.0) return 0.0;
  return 1.0 - sq / (total * total);
}

double job_size(const std::vector<const JobRecord*>& queue, std::size_t idx,
                RuntimeSource source) {
  if (idx >= queue.size()) throw EngineError("job_size: bad queue index");
  MinMax mm;
  for (const JobRecord* j : queue)
    mm.feed(j->requested_gpus * observed_time(*j, source));
  return mm.norm(queue[idx]->requested_gpus * observed_time(*queue[idx], source));
}

double urgency(const JobRecord& job, std::int64_t now, RuntimeSource source) {
  double wait = static_cast<double>(std::max<std::int64_t>(0, now - job.submit_time));
  return wait / (wait + observed_time(job, source));
}

std::vector<FeatureRow> feature_rows(const ClusterState& state,
                                     const std::vector<const JobRecord*>& queue,
                                     std::int64_t now, RuntimeSource source) {
  std::vector<FeatureRow> rows;
  rows.reserve(queue.size());
  if (queue.empty()) return rows;

  // categorical labels index into the sorted distinct sets of this snapshot
  std::map<std::string, int> users, vcs, types;
  for (const JobRecord* j : queue) {
    users.emplace(j->user_id, 0);
    vcs.emplace(j->vc_id, 0);
    types.emplace(j->gpu_type, 0);
  }
  int u = 0; for (auto& [k, v] : users) v = u++;
  int c = 0; for (auto& [k, v] : vcs) v = c++;
  int t = 0; for (auto& [k, v] : types) v = t++;

  int free_nodes = 0;
  for (const auto& ns : state.nodes())
    if (ns.free_gpus > 0) ++free_nodes;
  const double frag = cff(state);

  // hoisted parts of future_avail and job_size: the per-row helpers rescan
  // the whole queue, which turns a full matrix build quadratic
  std::set<std::string> cluster_types;
  for (const auto& n : state.spec().nodes) cluster_types.insert(n.gpu_type);
  const double total_free = static_cast<double>(state.total_free_gpus());
  double ahead = 0.0;

  MinMax size_mm;
  for (const JobRecord* j : queue)
    size_mm.feed(j->requested_gpus * observed_time(*j, source));

  for (std::size_t i = 0; i < queue.size(); ++i) {
    const JobRecord& j = *queue[i];
    FeatureRow r;
    r.job_id = j.job_id;
    r.user_index = users[j.user_id];
    r.vc_index = vcs[j.vc_id];
    r.requested_gpus = j.requested_gpus;
    r.observed_time = observed_time(j, source);
    r.wait_time = static_cast<double>(std::max<std::int64_t>(0, now - j.submit_time));
    r.submit_time = static_cast<double>(j.submit_time);
    r.gpu_type_index = types[j.gpu_type];
    r.req_cpus = j.requested_cpus
                     ? static_cast<double>(*j.requested_cpus)
                     : static_cast<double>(j.requested_gpus * state.spec().cpu_per_gpu);
    r.req_mem_gb = j.requested_mem_gb
                       ? *j.requested_mem_gb
                       : j.requested_gpus * state.spec().mem_per_gpu_gb;
    int ways = count_placements(state, j);
    r.num_ways = ways;
    r.can_schedule_now = ways > 0 ? 1.0 : 0.0;
    r.free_nodes = free_nodes;
    r.dsr = dsr(state, j);
    r.future_avail = total_free - static_cast<double>(j.requested_gpus) - ahead;
    r.cff = frag;
    r.job_size = size_mm.norm(j.requested_gpus * r.observed_time);
    r.urgency = urgency(j, now, source);
    rows.push_back(std::move(r));

    const bool targets_cluster = j.gpu_type.empty() || j.gpu_type == "MISC" ||
                                 cluster_types.count(j.gpu_type) > 0;
    if (targets_cluster) ahead += static_cast<double>(j.requested_gpus);
  }
  return rows;
}

std::vector<std::array<double, kObsWidth>> sample_features(
    const std::vector<FeatureRow>& rows) {
  std::vector<std::array<double, kObsWidth>> out(rows.size());
  if (rows.empty()) return out;

  MinMax m_gpus, m_time, m_wait, m_dsr, m_fa;
  for (const auto& r : rows) {
    m_gpus.feed(r.requested_gpus);
    m_time.feed(r.observed_time);
    m_wait.feed(r.wait_time);
    m_dsr.feed(r.dsr);
    m_fa.feed(r.future_avail);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    // the toggle emphasizes packing-relevant size under fragmentation and
    // deadline pressure otherwise; the de-emphasized candidate is dropped
    double toggled = r.cff > kFragThreshold ? r.job_size : r.urgency;
    out[i] = {m_gpus.norm(r.requested_gpus),
              m_time.norm(r.observed_time),
              m_wait.norm(r.wait_time),
              m_dsr.norm(r.dsr),
              m_fa.norm(r.future_avail),
              clamp01(r.cff),
              clamp01(toggled),
              std::min(r.num_ways, static_cast<double>(kNumWaysCap)) /
                  kNumWaysCap};
  }
  return out;
}

std::vector<std::array<double, kObsWidth>> naive_features(
    const std::vector<FeatureRow>& rows) {
  std::vector<std::array<double, kObsWidth>> out(rows.size());
  if (rows.empty()) return out;

  MinMax m_gpus, m_time, m_wait, m_submit, m_cpus, m_mem, m_type, m_nodes;
  for (const auto& r : rows) {
    m_gpus.feed(r.requested_gpus);
    m_time.feed(r.observed_time);
    m_wait.feed(r.wait_time);
    m_submit.feed(r.submit_time);
    m_cpus.feed(r.req_cpus);
    m_mem.feed(r.req_mem_gb);
    m_type.feed(r.gpu_type_index);
    m_nodes.feed(r.free_nodes);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out[i] = {m_gpus.norm(r.requested_gpus), m_time.norm(r.observed_time),
              m_wait.norm(r.wait_time),      m_submit.norm(r.submit_time),
              m_cpus.norm(r.req_cpus),       m_mem.norm(r.req_mem_gb),
              m_type.norm(r.gpu_type_index), m_nodes.norm(r.free_nodes)};
  }
  return out;
}

StateMatrix build_state(const ClusterState& state,
                        const std::vector<const JobRecord*>& queue,
                        std::int64_t now, const StateOptions& opts) {
  // earliest submitters first; overflow keeps the front of that order
  std::vector<std::size_t> order(queue.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (queue[a]->submit_time != queue[b]->submit_time)
      return queue[a]->submit_time < queue[b]->submit_time;
    return queue[a]->job_id < queue[b]->job_id;
  });
  if (order.size() > static_cast<std::size_t>(kMaxQueueRows))
    order.resize(kMaxQueueRows);

  std::vector<const JobRecord*> snapshot;
  snapshot.reserve(order.size());
  for (std::size_t idx : order) snapshot.push_back(queue[idx]);

  auto rows = feature_rows(state, snapshot, now, opts.runtime_source);
  auto obs = opts.naive ? naive_features(rows) : sample_features(rows);

  MinMax m_submit, m_time, m_gpus, m_wait;
  for (const auto& r : rows) {
    m_submit.feed(r.submit_time);
    m_time.feed(r.observed_time);
    m_gpus.feed(r.requested_gpus);
    m_wait.feed(r.wait_time);
  }

  StateMatrix sm;
  sm.ov.assign(static_cast<std::size_t>(kMaxQueueRows) * kObsWidth, 0.0);
  sm.cv.assign(static_cast<std::size_t>(kMaxQueueRows) * kCtxWidth, 0.0);
  sm.valid_rows = static_cast<int>(rows.size());
  sm.layout_version = opts.naive ? kLayoutVersionNaive : kLayoutVersionPro;
  sm.row_jobs.reserve(rows.size());
  sm.row_submit.reserve(rows.size());
  sm.row_queue_index = order;

  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < kObsWidth; ++c)
      sm.ov[i * kObsWidth + static_cast<std::size_t>(c)] = obs[i][static_cast<std::size_t>(c)];
    const auto& r = rows[i];
    double* cvrow = &sm.cv[i * kCtxWidth];
    cvrow[0] = m_submit.norm(r.submit_time);
    cvrow[1] = m_time.norm(r.observed_time);
    cvrow[2] = r.can_schedule_now;
    cvrow[3] = m_gpus.norm(r.requested_gpus);
    cvrow[4] = m_wait.norm(r.wait_time);
    sm.row_jobs.push_back(r.job_id);
    sm.row_submit.push_back(snapshot[i]->submit_time);
  }
  return sm;
}

}  // namespace gsched
