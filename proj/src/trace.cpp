#include "gsched/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gsched/errors.hpp"
#include "gsched/io.hpp"
#include "gsched/rng.hpp"

namespace gsched {

namespace {

std::optional<std::int64_t> parse_i64(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    // tolerate trailing ".0" style decimals seen in exported spreadsheets
    try {
      std::size_t pos = 0;
      double d = std::stod(s, &pos);
      if (pos != s.size() || !std::isfinite(d)) return std::nullopt;
      return static_cast<std::int64_t>(std::llround(d));
    } catch (...) {
      return std::nullopt;
    }
  }
  return v;
}

std::optional<double> parse_f64(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    double d = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(d)) return std::nullopt;
    return d;
  } catch (...) {
    return std::nullopt;
  }
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct Table {
  std::unordered_map<std::string, std::size_t> col;
  std::vector<std::vector<std::string>> rows;

  const std::string* field(const std::vector<std::string>& row,
                           const std::string& name) const {
    auto it = col.find(name);
    if (it == col.end() || it->second >= row.size()) return nullptr;
    if (row[it->second].empty()) return nullptr;
    return &row[it->second];
  }
};

Table read_table(const std::string& path) {
  std::string text = read_file(path);
  Table t;
  std::size_t pos = 0;
  bool header_done = false;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string line = text.substr(
        pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (!header_done) {
      for (std::size_t i = 0; i < fields.size(); ++i) t.col[lower(fields[i])] = i;
      header_done = true;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  if (!header_done) throw DataError("empty trace file: " + path);
  return t;
}

void finalize(TraceSet& ts, bool rebase, LoadReport* report,
              std::size_t dropped) {
  if (ts.jobs.empty()) throw DataError("no valid rows in trace");
  // duplicates keep the first occurrence in file order
  std::unordered_set<std::string> seen;
  std::vector<JobRecord> unique;
  unique.reserve(ts.jobs.size());
  for (auto& j : ts.jobs) {
    if (seen.insert(j.job_id).second) {
      unique.push_back(std::move(j));
    } else {
      ++dropped;
    }
  }
  ts.jobs = std::move(unique);
  std::sort(ts.jobs.begin(), ts.jobs.end(),
            [](const JobRecord& a, const JobRecord& b) {
              if (a.submit_time != b.submit_time)
                return a.submit_time < b.submit_time;
              return a.job_id < b.job_id;
            });
  if (rebase && !ts.jobs.empty()) {
    ts.epoch = ts.jobs.front().submit_time;
    for (auto& j : ts.jobs) j.submit_time -= ts.epoch;
  }
  if (report) report->rows_dropped = dropped;
}

TraceSet load_canonical(const Table& t, LoadReport* report) {
  TraceSet ts;
  std::size_t dropped = 0;
  for (const auto& row : t.rows) {
    JobRecord j;
    const std::string* id = t.field(row, "job_id");
    auto submit = t.field(row, "submit_time") ? parse_i64(*t.field(row, "submit_time")) : std::nullopt;
    auto req_t = t.field(row, "requested_time") ? parse_i64(*t.field(row, "requested_time")) : std::nullopt;
    auto act = t.field(row, "actual_runtime") ? parse_i64(*t.field(row, "actual_runtime")) : std::nullopt;
    auto gpus = t.field(row, "requested_gpus") ? parse_i64(*t.field(row, "requested_gpus")) : std::nullopt;
    if (!id || !submit || !req_t || !act || !gpus) {
      ++dropped;
      continue;
    }
    // value_or defaults are unreachable past the guard; they only quiet a
    // bogus -O3 maybe-uninitialized warning on optional reads
    const std::int64_t submit_s = submit.value_or(0);
    const std::int64_t act_s = act.value_or(1);
    const std::int64_t gpu_n = gpus.value_or(1);
    if (submit_s < 0 || act_s < 1 || gpu_n < 1 || gpu_n > 100000) {
      ++dropped;
      continue;
    }
    j.job_id = *id;
    j.user_id = t.field(row, "user_id") ? *t.field(row, "user_id") : "unknown";
    j.vc_id = t.field(row, "vc_id") ? *t.field(row, "vc_id") : "default";
    j.submit_time = submit_s;
    j.requested_time = std::max<std::int64_t>(1, req_t.value_or(1));
    j.actual_runtime = act_s;
    j.requested_gpus = static_cast<int>(gpu_n);
    j.gpu_type = t.field(row, "gpu_type") ? *t.field(row, "gpu_type") : "MISC";
    if (const auto* c = t.field(row, "requested_cpus")) {
      if (auto v = parse_i64(*c); v && *v > 0) j.requested_cpus = static_cast<int>(*v);
    }
    if (const auto* m = t.field(row, "requested_mem_gb")) {
      if (auto v = parse_f64(*m); v && *v > 0) j.requested_mem_gb = *v;
    }
    ts.jobs.push_back(std::move(j));
  }
  if (report) report->rows_seen = t.rows.size();
  finalize(ts, /*rebase=*/false, report, dropped);
  return ts;
}

TraceSet load_philly(const Table& t, LoadReport* report) {
  TraceSet ts;
  std::size_t dropped = 0;
  for (const auto& row : t.rows) {
    const std::string* id = t.field(row, "jobid");
    auto submit = t.field(row, "submitted_time") ? parse_i64(*t.field(row, "submitted_time")) : std::nullopt;
    auto run = t.field(row, "run_time") ? parse_i64(*t.field(row, "run_time")) : std::nullopt;
    auto gpus = t.field(row, "num_gpus") ? parse_i64(*t.field(row, "num_gpus")) : std::nullopt;
    if (!id || !submit || !run || !gpus) {
      ++dropped;
      continue;
    }
    const std::int64_t run_s = run.value_or(1);
    const std::int64_t gpu_n = gpus.value_or(1);
    if (run_s < 1 || gpu_n < 1) {
      ++dropped;
      continue;
    }
    JobRecord j;
    j.job_id = *id;
    j.user_id = t.field(row, "user") ? *t.field(row, "user") : "unknown";
    j.vc_id = t.field(row, "vc") ? *t.field(row, "vc") : "default";
    j.submit_time = submit.value_or(0);
    j.actual_runtime = run_s;
    auto est = t.field(row, "estimated_run_time")
                   ? parse_i64(*t.field(row, "estimated_run_time"))
                   : std::nullopt;
    j.requested_time = std::max<std::int64_t>(1, est.value_or(run_s));
    j.requested_gpus = static_cast<int>(gpu_n);
    j.gpu_type = "P100";  // single-type cluster
    ts.jobs.push_back(std::move(j));
  }
  if (report) report->rows_seen = t.rows.size();
  finalize(ts, /*rebase=*/true, report, dropped);
  return ts;
}

TraceSet load_helios(const Table& t, LoadReport* report) {
  TraceSet ts;
  std::size_t dropped = 0;
  // raw vc labels map to VC1..VCn in order of first appearance
  std::unordered_map<std::string, std::string> vc_map;
  for (const auto& row : t.rows) {
    const std::string* id = t.field(row, "job_id");
    auto submit = t.field(row, "submit_time") ? parse_i64(*t.field(row, "submit_time")) : std::nullopt;
    auto run = t.field(row, "duration") ? parse_i64(*t.field(row, "duration")) : std::nullopt;
    auto gpus = t.field(row, "gpu_num") ? parse_i64(*t.field(row, "gpu_num")) : std::nullopt;
    if (!id || !submit || !run || !gpus) {
      ++dropped;
      continue;
    }
    const std::int64_t run_s = run.value_or(1);
    const std::int64_t gpu_n = gpus.value_or(1);
    if (run_s < 1 || gpu_n < 1) {
      ++dropped;
      continue;
    }
    JobRecord j;
    j.job_id = *id;
    j.user_id = t.field(row, "user") ? *t.field(row, "user") : "unknown";
    std::string vc_raw = t.field(row, "vc") ? *t.field(row, "vc") : "default";
    auto it = vc_map.find(vc_raw);
    if (it == vc_map.end()) {
      std::string mapped = "VC" + std::to_string(vc_map.size() + 1);
      it = vc_map.emplace(vc_raw, std::move(mapped)).first;
    }
    j.vc_id = it->second;
    j.submit_time = submit.value_or(0);
    j.actual_runtime = run_s;
    j.requested_time = run_s;
    j.requested_gpus = static_cast<int>(gpu_n);
    j.gpu_type = t.field(row, "gpu_type") ? *t.field(row, "gpu_type") : "MISC";
    if (const auto* c = t.field(row, "cpu_num")) {
      if (auto v = parse_i64(*c); v && *v > 0) j.requested_cpus = static_cast<int>(*v);
    }
    ts.jobs.push_back(std::move(j));
  }
  if (report) report->rows_seen = t.rows.size();
  finalize(ts, /*rebase=*/true, report, dropped);
  return ts;
}

TraceSet load_alibaba(const Table& t, LoadReport* report) {
  TraceSet ts;
  std::size_t dropped = 0;
  for (const auto& row : t.rows) {
    const std::string* id = t.field(row, "job_name");
    auto submit = t.field(row, "submit_time") ? parse_i64(*t.field(row, "submit_time")) : std::nullopt;
    auto start = t.field(row, "start_time") ? parse_i64(*t.field(row, "start_time")) : std::nullopt;
    auto end = t.field(row, "end_time") ? parse_i64(*t.field(row, "end_time")) : std::nullopt;
    auto plan_gpu = t.field(row, "plan_gpu") ? parse_f64(*t.field(row, "plan_gpu")) : std::nullopt;
    if (!id || !submit || !start || !end || !plan_gpu) {
      ++dropped;
      continue;
    }
    const std::int64_t run_s = end.value_or(0) - start.value_or(0);
    const double gpu_cards = plan_gpu.value_or(0.0);
    if (run_s < 1 || gpu_cards <= 0) {
      ++dropped;
      continue;
    }
    JobRecord j;
    j.job_id = *id;
    j.user_id = t.field(row, "user") ? *t.field(row, "user") : "unknown";
    j.vc_id = "default";
    j.submit_time = submit.value_or(0);
    j.actual_runtime = run_s;
    j.requested_time = run_s;
    // plan_gpu is in card-percent units: 100 == one full device
    j.requested_gpus = std::max(1, static_cast<int>(std::ceil(gpu_cards / 100.0)));
    j.gpu_type = t.field(row, "gpu_type") ? *t.field(row, "gpu_type") : "MISC";
    if (const auto* c = t.field(row, "plan_cpu")) {
      if (auto v = parse_f64(*c); v && *v > 0)
        j.requested_cpus = std::max(1, static_cast<int>(std::ceil(*v / 100.0)));
    }
    if (const auto* m = t.field(row, "plan_mem")) {
      if (auto v = parse_f64(*m); v && *v > 0) j.requested_mem_gb = *v;
    }
    ts.jobs.push_back(std::move(j));
  }
  if (report) report->rows_seen = t.rows.size();
  finalize(ts, /*rebase=*/true, report, dropped);
  return ts;
}

}  // namespace

TraceFormat parse_trace_format(const std::string& name) {
  std::string n = lower(name);
  if (n == "canonical" || n == "csv") return TraceFormat::canonical;
  if (n == "philly") return TraceFormat::philly;
  if (n == "helios") return TraceFormat::helios;
  if (n == "alibaba") return TraceFormat::alibaba;
  throw ConfigError("unknown trace format: " + name);
}

std::string trace_format_name(TraceFormat fmt) {
  switch (fmt) {
    case TraceFormat::canonical: return "canonical";
    case TraceFormat::philly: return "philly";
    case TraceFormat::helios: return "helios";
    case TraceFormat::alibaba: return "alibaba";
  }
  return "canonical";
}

TraceSet load_trace(const std::string& path, TraceFormat fmt,
                    LoadReport* report) {
  Table t = read_table(path);
  TraceSet ts;
  switch (fmt) {
    case TraceFormat::canonical: ts = load_canonical(t, report); break;
    case TraceFormat::philly: ts = load_philly(t, report); break;
    case TraceFormat::helios: ts = load_helios(t, report); break;
    case TraceFormat::alibaba: ts = load_alibaba(t, report); break;
  }
  ts.meta.source = path;
  ts.meta.cluster_hint = trace_format_name(fmt);
  return ts;
}

void save_trace(const TraceSet& trace, const std::string& path) {
  std::ostringstream out;
  out << "job_id,user_id,vc_id,submit_time,requested_time,actual_runtime,"
         "requested_gpus,gpu_type,requested_cpus,requested_mem_gb\n";
  for (const auto& j : trace.jobs) {
    out << j.job_id << ',' << j.user_id << ',' << j.vc_id << ','
        << j.submit_time << ',' << j.requested_time << ',' << j.actual_runtime
        << ',' << j.requested_gpus << ',' << j.gpu_type << ',';
    if (j.requested_cpus) out << *j.requested_cpus;
    out << ',';
    if (j.requested_mem_gb) out << format_double(*j.requested_mem_gb);
    out << '\n';
  }
  atomic_write_file(path, out.str());
}

TraceSet synthesize_trace(const GenConfig& cfg) {
  if (cfg.job_count <= 0) throw ConfigError("job_count must be positive");
  if (!(cfg.arrival_rate > 0)) throw ConfigError("arrival_rate must be positive");
  if (!(cfg.runtime_median_s > 0)) throw ConfigError("runtime_median_s must be positive");
  if (cfg.runtime_sigma < 0) throw ConfigError("runtime_sigma must be non-negative");
  if (!(cfg.estimate_noise_lo > 0) || cfg.estimate_noise_hi < cfg.estimate_noise_lo)
    throw ConfigError("estimate_noise range invalid");
  if (cfg.gpu_demand.empty()) throw ConfigError("gpu_demand empty");
  if (cfg.gpu_type_mix.empty()) throw ConfigError("gpu_type_mix empty");
  if (cfg.user_count <= 0) throw ConfigError("user_count must be positive");
  for (const auto& [g, w] : cfg.gpu_demand)
    if (g < 1 || w < 0) throw ConfigError("gpu_demand entry invalid");
  for (const auto& [t, w] : cfg.gpu_type_mix)
    if (t.empty() || w < 0) throw ConfigError("gpu_type_mix entry invalid");

  std::vector<double> demand_w, type_w;
  for (const auto& [g, w] : cfg.gpu_demand) demand_w.push_back(w);
  for (const auto& [t, w] : cfg.gpu_type_mix) type_w.push_back(w);

  Rng rng(cfg.seed);
  const double mu = std::log(cfg.runtime_median_s);
  TraceSet ts;
  ts.jobs.reserve(static_cast<std::size_t>(cfg.job_count));
  double clock = 0.0;
  for (int i = 0; i < cfg.job_count; ++i) {
    clock += rng.exponential(cfg.arrival_rate);
    double run = rng.lognormal(mu, cfg.runtime_sigma);
    double noise = rng.uniform(cfg.estimate_noise_lo, cfg.estimate_noise_hi);
    std::size_t di = rng.categorical(demand_w);
    std::size_t ti = rng.categorical(type_w);
    std::uint64_t user = rng.uniform_index(static_cast<std::uint64_t>(cfg.user_count));

    JobRecord j;
    char idbuf[16];
    std::snprintf(idbuf, sizeof idbuf, "j%06d", i);
    j.job_id = idbuf;
    j.user_id = "u" + std::to_string(user);
    j.vc_id = "default";
    j.submit_time = static_cast<std::int64_t>(std::floor(clock));
    j.actual_runtime = std::max<std::int64_t>(1, std::llround(run));
    j.requested_time = std::max<std::int64_t>(
        1, std::llround(static_cast<double>(j.actual_runtime) * noise));
    j.requested_gpus = cfg.gpu_demand[di].first;
    j.gpu_type = cfg.gpu_type_mix[ti].first;
    ts.jobs.push_back(std::move(j));
  }
  ts.meta.source = "synthetic";
  return ts;
}

std::pair<TraceSet, TraceSet> split_trace(const TraceSet& trace,
                                          double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw ConfigError("train_fraction must be in [0,1]");
  // epsilon shields exact products like 0.9*100 from fp rounding
  auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(trace.jobs.size()) + 1e-9));
  TraceSet train, eval;
  train.epoch = eval.epoch = trace.epoch;
  train.meta = eval.meta = trace.meta;
  train.jobs.assign(trace.jobs.begin(), trace.jobs.begin() + static_cast<std::ptrdiff_t>(n_train));
  eval.jobs.assign(trace.jobs.begin() + static_cast<std::ptrdiff_t>(n_train), trace.jobs.end());
  return {std::move(train), std::move(eval)};
}

std::vector<JobRecord> sample_batch(const TraceSet& trace, std::size_t size,
                                    std::uint64_t seed) {
  if (size == 0) throw ConfigError("batch size must be positive");
  if (size > trace.jobs.size())
    throw DataError("batch size exceeds trace length");
  Rng rng(seed);
  std::size_t start = static_cast<std::size_t>(
      rng.uniform_index(trace.jobs.size() - size + 1));
  std::vector<JobRecord> out(trace.jobs.begin() + static_cast<std::ptrdiff_t>(start),
                             trace.jobs.begin() + static_cast<std::ptrdiff_t>(start + size));
  std::int64_t base = out.front().submit_time;
  for (auto& j : out) j.submit_time -= base;
  return out;
}

}  // namespace gsched
