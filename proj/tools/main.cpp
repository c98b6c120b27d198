#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsched/agent.hpp"
#include "gsched/allocator.hpp"
#include "gsched/cluster.hpp"
#include "gsched/errors.hpp"
#include "gsched/features.hpp"
#include "gsched/io.hpp"
#include "gsched/metrics.hpp"
#include "gsched/nn.hpp"
#include "gsched/policies.hpp"
#include "gsched/rng.hpp"
#include "gsched/sim.hpp"
#include "gsched/trace.hpp"

using namespace gsched;
using nlohmann::json;

namespace {

std::int64_t unix_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Everything that varies between identical reruns lives under this one key,
// so byte-level determinism checks can drop it and compare the rest.
json wall_clock(std::int64_t started_ms) {
  return json{{"unix_ms", unix_ms()}, {"elapsed_ms", unix_ms() - started_ms}};
}

struct ClusterArgs {
  std::string preset = "helios";
  std::vector<std::string> groups;
  int cpu_per_gpu = 4;
  double mem_per_gpu_gb = 32.0;
};

void add_cluster_options(CLI::App* cmd, ClusterArgs& args) {
  cmd->add_option("--cluster", args.preset,
                  "cluster preset (helios) when no --nodes given")
      ->capture_default_str();
  cmd->add_option("--nodes", args.groups,
                  "node group, repeatable: "
                  "count:4,gpus:8,type:V100,vc:default[,cpus:32][,mem_gb:256]");
  cmd->add_option("--cpu-per-gpu", args.cpu_per_gpu,
                  "cpus consumed per allocated gpu")
      ->capture_default_str();
  cmd->add_option("--mem-per-gpu-gb", args.mem_per_gpu_gb,
                  "memory consumed per allocated gpu")
      ->capture_default_str();
}

ClusterSpec make_cluster(const ClusterArgs& args) {
  if (!args.groups.empty()) {
    std::vector<NodeGroup> groups;
    groups.reserve(args.groups.size());
    for (const auto& g : args.groups) groups.push_back(parse_node_group(g));
    return build_cluster(groups, args.cpu_per_gpu, args.mem_per_gpu_gb);
  }
  if (args.preset == "helios") return helios_cluster();
  throw ConfigError("unknown cluster preset: " + args.preset);
}

json cluster_summary(const ClusterSpec& spec) {
  return json{{"nodes", spec.nodes.size()},
              {"total_gpus", spec.total_gpus()},
              {"cpu_per_gpu", spec.cpu_per_gpu},
              {"mem_per_gpu_gb", spec.mem_per_gpu_gb}};
}

struct TraceArgs {
  std::string path;
  std::string format = "canonical";
};

void add_trace_options(CLI::App* cmd, TraceArgs& args) {
  cmd->add_option("--trace", args.path, "input trace CSV")->required();
  cmd->add_option("--format", args.format,
                  "trace format: canonical|philly|helios|alibaba")
      ->capture_default_str();
}

TraceSet load_trace_args(const TraceArgs& args) {
  LoadReport report;
  TraceSet ts = load_trace(args.path, parse_trace_format(args.format), &report);
  if (report.rows_dropped > 0) {
    std::fprintf(stderr, "note: dropped %zu of %zu rows from %s\n",
                 report.rows_dropped, report.rows_seen, args.path.c_str());
  }
  if (ts.jobs.empty()) throw DataError("trace has no usable jobs: " + args.path);
  return ts;
}

std::string trace_digest(const std::string& path) {
  const std::string bytes = read_file(path);
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

json trace_summary(const TraceArgs& args, const TraceSet& ts) {
  return json{{"path", args.path},
              {"format", args.format},
              {"digest", trace_digest(args.path)},
              {"jobs", ts.jobs.size()}};
}

// "1:0.5,2:0.2" -> {(1,0.5),(2,0.2)}
std::vector<std::pair<int, double>> parse_int_weights(const std::string& text) {
  std::vector<std::pair<int, double>> out;
  for (const auto& part : split_csv_line(text)) {
    auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("expected value:weight, got " + part);
    }
    out.emplace_back(std::stoi(part.substr(0, colon)),
                     std::stod(part.substr(colon + 1)));
  }
  return out;
}

std::vector<std::pair<std::string, double>> parse_name_weights(
    const std::string& text) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& part : split_csv_line(text)) {
    auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("expected name:weight, got " + part);
    }
    out.emplace_back(part.substr(0, colon), std::stod(part.substr(colon + 1)));
  }
  return out;
}

struct AgentArgs {
  std::string policy = "fifo";
  std::string metric = "wait";
  bool naive = false;
  int lookahead = kDefaultLookahead;
  bool no_backfill = false;
  double bsld_tau = kDefaultBsldTau;
  PpoHyper ppo;
};

void add_agent_options(CLI::App* cmd, AgentArgs& args, bool with_ppo) {
  cmd->add_option("--policy", args.policy,
                  "baseline: fifo|sjf|wfp3|unicep|f1|slurm_mf")
      ->capture_default_str();
  cmd->add_option("--metric", args.metric,
                  "objective: wait|jct|bsld|utilization")
      ->capture_default_str();
  cmd->add_flag("--naive", args.naive,
                "raw features and direct placement (no solver)");
  cmd->add_option("--lookahead", args.lookahead,
                  "ranked jobs the placer may pull forward")
      ->capture_default_str();
  cmd->add_flag("--no-backfill", args.no_backfill, "disable backfilling");
  cmd->add_option("--bsld-tau", args.bsld_tau,
                  "short-job floor for bounded slowdown")
      ->capture_default_str();
  if (with_ppo) {
    cmd->add_option("--policy-lr", args.ppo.policy_lr)->capture_default_str();
    cmd->add_option("--value-lr", args.ppo.value_lr)->capture_default_str();
    cmd->add_option("--clip", args.ppo.clip)->capture_default_str();
    cmd->add_option("--entropy-coef", args.ppo.entropy_coef)
        ->capture_default_str();
    cmd->add_option("--ppo-epochs", args.ppo.epochs)->capture_default_str();
    cmd->add_option("--minibatch", args.ppo.minibatch)->capture_default_str();
  }
}

AgentConfig make_agent_config(const AgentArgs& args, std::uint64_t seed) {
  AgentConfig cfg;
  cfg.base_policy = parse_policy(args.policy);
  cfg.metric = parse_metric(args.metric);
  cfg.naive = args.naive;
  cfg.lookahead = args.lookahead;
  cfg.backfill = !args.no_backfill;
  cfg.bsld_tau = args.bsld_tau;
  cfg.ppo = args.ppo;
  cfg.seed = seed;
  return cfg;
}

json agent_config_json(const AgentConfig& cfg) {
  return json{{"base_policy", policy_name(cfg.base_policy)},
              {"metric", metric_name(cfg.metric)},
              {"naive", cfg.naive},
              {"lookahead", cfg.lookahead},
              {"backfill", cfg.backfill},
              {"bsld_tau", cfg.bsld_tau},
              {"seed", cfg.seed},
              {"ppo",
               {{"policy_lr", cfg.ppo.policy_lr},
                {"value_lr", cfg.ppo.value_lr},
                {"clip", cfg.ppo.clip},
                {"entropy_coef", cfg.ppo.entropy_coef},
                {"epochs", cfg.ppo.epochs},
                {"minibatch", cfg.ppo.minibatch},
                {"normalize_advantages", cfg.ppo.normalize_advantages}}}};
}

json stats_json(const EvalEpisodeStats& s) {
  return json{{"wait_sum", s.wait_sum},   {"jct_sum", s.jct_sum},
              {"bsld_sum", s.bsld_sum},   {"utilization", s.util},
              {"wait_mean", s.wait_mean}, {"jct_mean", s.jct_mean}};
}

double improvement_pct(double base, double rl) {
  return (base - rl) / std::max(std::abs(base), 1e-12) * 100.0;
}

// ---------------------------------------------------------------- gen-trace

struct GenTraceCmd {
  std::string out;
  GenConfig gen;
  std::string demand;
  std::string types;

  void run() const {
    GenConfig cfg = gen;
    if (!demand.empty()) cfg.gpu_demand = parse_int_weights(demand);
    if (!types.empty()) cfg.gpu_type_mix = parse_name_weights(types);
    TraceSet ts = synthesize_trace(cfg);
    save_trace(ts, out);
    std::printf("wrote %zu jobs to %s (digest %s)\n", ts.jobs.size(),
                out.c_str(), trace_digest(out).c_str());
  }
};

void register_gen_trace(CLI::App& app, GenTraceCmd& cmd) {
  CLI::App* c = app.add_subcommand("gen-trace", "synthesize a canonical trace");
  c->add_option("--out", cmd.out, "output CSV path")->required();
  c->add_option("--jobs", cmd.gen.job_count)->capture_default_str();
  c->add_option("--arrival-rate", cmd.gen.arrival_rate, "jobs per second")
      ->capture_default_str();
  c->add_option("--runtime-median", cmd.gen.runtime_median_s, "seconds")
      ->capture_default_str();
  c->add_option("--runtime-sigma", cmd.gen.runtime_sigma)
      ->capture_default_str();
  c->add_option("--noise-lo", cmd.gen.estimate_noise_lo,
                "requested_time = actual * U(lo,hi)")
      ->capture_default_str();
  c->add_option("--noise-hi", cmd.gen.estimate_noise_hi)
      ->capture_default_str();
  c->add_option("--users", cmd.gen.user_count)->capture_default_str();
  c->add_option("--seed", cmd.gen.seed)->capture_default_str();
  c->add_option("--demand", cmd.demand, "gpu demand mix, e.g. 1:0.5,2:0.3,8:0.2");
  c->add_option("--types", cmd.types, "gpu type mix, e.g. V100:0.8,P100:0.2");
  c->callback([&cmd] { cmd.run(); });
}

// -------------------------------------------------------------------- train

struct TrainCmd {
  TraceArgs trace;
  ClusterArgs cluster;
  AgentArgs agent;
  int epochs = 20;
  int batches = 20;
  int batch_size = 256;
  std::uint64_t seed = 1;
  std::string out;
  std::string curve_path;
  std::string resume;
  bool verbose = false;

  void run() const {
    const std::int64_t started = unix_ms();
    TraceSet ts = load_trace_args(trace);
    ClusterSpec spec = make_cluster(cluster);
    AgentConfig cfg = make_agent_config(agent, seed);
    cfg.epochs = epochs;
    cfg.batches_per_epoch = batches;
    cfg.batch_size = batch_size;

    AgentNets nets = resume.empty()
                         ? init_agent(cfg.naive, cfg.ppo, seed)
                         : load_checkpoint(resume, cfg.naive);

    double epoch_reward = 0.0;
    int epoch_batches = 0;
    auto on_batch = [&](const CurvePoint& pt) {
      epoch_reward += pt.reward;
      ++epoch_batches;
      if (verbose) {
        std::fprintf(stderr,
                     "epoch %d batch %d reward %.4f base %.1f rl %.1f\n",
                     pt.epoch, pt.batch, pt.reward, pt.base_score,
                     pt.rl_score);
      }
      if (pt.batch + 1 == batches) {
        std::fprintf(stderr, "epoch %d mean reward %.4f\n", pt.epoch,
                     epoch_reward / std::max(1, epoch_batches));
        epoch_reward = 0.0;
        epoch_batches = 0;
      }
    };

    TrainResult result = train(ts, spec, cfg, nets, on_batch);
    save_checkpoint(nets, cfg, out);

    if (!curve_path.empty()) {
      json points = json::array();
      for (const CurvePoint& pt : result.curve) {
        points.push_back({{"epoch", pt.epoch},
                          {"batch", pt.batch},
                          {"reward", pt.reward},
                          {"base_score", pt.base_score},
                          {"rl_score", pt.rl_score},
                          {"decisions", pt.decisions},
                          {"policy_loss", pt.diag.policy_loss},
                          {"value_loss", pt.diag.value_loss},
                          {"entropy", pt.diag.entropy},
                          {"clip_fraction", pt.diag.clip_fraction},
                          {"mean_ratio", pt.diag.mean_ratio}});
      }
      json doc{{"format", "gsched-train-curve"},
               {"version", 1},
               {"trace", trace_summary(trace, ts)},
               {"cluster", cluster_summary(spec)},
               {"config", agent_config_json(cfg)},
               {"epochs", epochs},
               {"batches_per_epoch", batches},
               {"batch_size", batch_size},
               {"points", points},
               {"wall_clock", wall_clock(started)}};
      atomic_write_file(curve_path, doc.dump(2) + "\n");
    }

    int tail = std::min<int>(5 * batches, static_cast<int>(result.curve.size()));
    double tail_reward = 0.0;
    for (int i = 0; i < tail; ++i) {
      tail_reward +=
          result.curve[result.curve.size() - 1 - static_cast<std::size_t>(i)]
              .reward;
    }
    std::printf("trained %d epochs x %d batches; mean reward last %d batches %.4f; checkpoint %s\n",
                epochs, batches, tail, tail > 0 ? tail_reward / tail : 0.0,
                out.c_str());
  }
};

void register_train(CLI::App& app, TrainCmd& cmd) {
  CLI::App* c = app.add_subcommand("train", "train the ranking agent");
  add_trace_options(c, cmd.trace);
  add_cluster_options(c, cmd.cluster);
  add_agent_options(c, cmd.agent, /*with_ppo=*/true);
  c->add_option("--epochs", cmd.epochs)->capture_default_str();
  c->add_option("--batches", cmd.batches, "batches per epoch")
      ->capture_default_str();
  c->add_option("--batch-size", cmd.batch_size, "jobs per episode")
      ->capture_default_str();
  c->add_option("--seed", cmd.seed)->capture_default_str();
  c->add_option("--out", cmd.out, "checkpoint output path")->required();
  c->add_option("--curve", cmd.curve_path, "write the training curve JSON here");
  c->add_option("--resume", cmd.resume, "checkpoint to continue from");
  c->add_flag("--verbose", cmd.verbose, "per-batch progress lines");
  c->set_config("--config", "", "read option defaults from an INI file");
  c->callback([&cmd] { cmd.run(); });
}

// --------------------------------------------------------------------- eval

struct EvalCmd {
  TraceArgs trace;
  ClusterArgs cluster;
  AgentArgs agent;
  std::string checkpoint;
  int runs = 10;
  int batch_size = 256;
  std::uint64_t seed = 1;
  std::string out;
  bool policy_given = false;
  bool metric_given = false;
  bool naive_given = false;

  void run() {
    const std::int64_t started = unix_ms();
    TraceSet ts = load_trace_args(trace);
    ClusterSpec spec = make_cluster(cluster);

    CheckpointInfo info = read_checkpoint_info(checkpoint);
    if (!policy_given) agent.policy = policy_name(info.base_policy);
    if (!metric_given) agent.metric = metric_name(info.metric);
    if (!naive_given) agent.naive = info.naive;

    AgentNets nets = load_checkpoint(checkpoint, agent.naive);
    AgentConfig cfg = make_agent_config(agent, seed);
    EvalResult result = evaluate(ts, spec, cfg, nets, runs, batch_size);

    json run_rows = json::array();
    for (const EvalRun& r : result.runs) {
      run_rows.push_back({{"run", r.run},
                          {"base", stats_json(r.base)},
                          {"rl", stats_json(r.rl)}});
    }
    json doc{
        {"format", "gsched-eval-report"},
        {"version", 1},
        {"trace", trace_summary(trace, ts)},
        {"cluster", cluster_summary(spec)},
        {"checkpoint",
         {{"path", checkpoint},
          {"layout_version", nets.layout_version},
          {"trained_batches", nets.trained_batches}}},
        {"config", agent_config_json(cfg)},
        {"runs_config", {{"runs", runs}, {"batch_size", batch_size}}},
        {"runs", run_rows},
        {"means",
         {{"base", stats_json(result.base_mean)},
          {"rl", stats_json(result.rl_mean)},
          {"improvement_pct",
           {{"wait_mean", improvement_pct(result.base_mean.wait_mean,
                                          result.rl_mean.wait_mean)},
            {"jct_mean", improvement_pct(result.base_mean.jct_mean,
                                         result.rl_mean.jct_mean)},
            {"bsld_sum", improvement_pct(result.base_mean.bsld_sum,
                                         result.rl_mean.bsld_sum)}}}}},
        {"wall_clock", wall_clock(started)}};
    if (!out.empty()) atomic_write_file(out, doc.dump(2) + "\n");

    std::printf("%-12s %14s %14s %10s\n", "metric", policy_name(cfg.base_policy).c_str(),
                "rl", "delta");
    auto row = [&](const char* name, double b, double r, bool higher_better) {
      double d = higher_better ? -improvement_pct(b, r) : improvement_pct(b, r);
      std::printf("%-12s %14.3f %14.3f %+9.2f%%\n", name, b, r, d);
    };
    row("wait_mean", result.base_mean.wait_mean, result.rl_mean.wait_mean, false);
    row("jct_mean", result.base_mean.jct_mean, result.rl_mean.jct_mean, false);
    row("bsld_sum", result.base_mean.bsld_sum, result.rl_mean.bsld_sum, false);
    row("utilization", result.base_mean.util, result.rl_mean.util, true);
    if (!out.empty()) std::printf("report: %s\n", out.c_str());
  }
};

void register_eval(CLI::App& app, EvalCmd& cmd) {
  CLI::App* c = app.add_subcommand("eval", "greedy evaluation against a baseline");
  add_trace_options(c, cmd.trace);
  add_cluster_options(c, cmd.cluster);
  add_agent_options(c, cmd.agent, /*with_ppo=*/false);
  c->add_option("--checkpoint", cmd.checkpoint, "trained agent")->required();
  c->add_option("--runs", cmd.runs, "sampled batches to average")
      ->capture_default_str();
  c->add_option("--batch-size", cmd.batch_size)->capture_default_str();
  c->add_option("--seed", cmd.seed)->capture_default_str();
  c->add_option("--out", cmd.out, "write the eval report JSON here");
  c->set_config("--config", "", "read option defaults from an INI file");
  c->callback([&cmd, c] {
    cmd.policy_given = c->count("--policy") > 0;
    cmd.metric_given = c->count("--metric") > 0;
    cmd.naive_given = c->count("--naive") > 0;
    cmd.run();
  });
}

// ------------------------------------------------------------------ compare

struct CompareCmd {
  std::string report_a;
  std::string report_b;

  static json load_report(const std::string& path) {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw DataError("report " + path + ": " + e.what());
    }
    if (j.value("format", std::string{}) != "gsched-eval-report") {
      throw DataError("report " + path + ": not an eval report");
    }
    return j;
  }

  void run() const {
    json a = load_report(report_a);
    json b = load_report(report_b);
    const std::string da = a.at("trace").value("digest", std::string{});
    const std::string db = b.at("trace").value("digest", std::string{});
    if (da != db) {
      throw ConfigError("reports evaluate different traces (digest " + da +
                        " vs " + db + ")");
    }
    const json ma = a.at("means").at("rl");
    const json mb = b.at("means").at("rl");
    std::printf("%-12s %14s %14s %10s\n", "metric", "A.rl", "B.rl", "delta");
    for (const char* key :
         {"wait_mean", "jct_mean", "bsld_sum", "utilization"}) {
      double va = ma.value(key, 0.0);
      double vb = mb.value(key, 0.0);
      std::printf("%-12s %14.3f %14.3f %+9.2f%%\n", key, va, vb,
                  improvement_pct(va, vb));
    }
  }
};

void register_compare(CLI::App& app, CompareCmd& cmd) {
  CLI::App* c = app.add_subcommand(
      "compare", "diff the learned-side means of two eval reports");
  c->add_option("report_a", cmd.report_a)->required();
  c->add_option("report_b", cmd.report_b)->required();
  c->callback([&cmd] { cmd.run(); });
}

// -------------------------------------------------------------- inspect-state

struct InspectCmd {
  TraceArgs trace;
  ClusterArgs cluster;
  int jobs = 32;
  bool naive = false;
  bool as_json = false;

  void run() const {
    TraceSet ts = load_trace_args(trace);
    ClusterSpec spec = make_cluster(cluster);
    ClusterState state(spec);

    const std::size_t n =
        std::min<std::size_t>(ts.jobs.size(), static_cast<std::size_t>(jobs));
    std::vector<const JobRecord*> queue;
    std::int64_t now = 0;
    for (std::size_t i = 0; i < n; ++i) {
      queue.push_back(&ts.jobs[i]);
      now = std::max(now, ts.jobs[i].submit_time);
    }
    StateOptions opts{naive, RuntimeSource::requested};
    StateMatrix sm = build_state(state, queue, now, opts);

    if (as_json) {
      json rows = json::array();
      for (int r = 0; r < sm.valid_rows; ++r) {
        json ov = json::array();
        json cv = json::array();
        for (int c = 0; c < kObsWidth; ++c) {
          ov.push_back(sm.ov[static_cast<std::size_t>(r * kObsWidth + c)]);
        }
        for (int c = 0; c < kCtxWidth; ++c) {
          cv.push_back(sm.cv[static_cast<std::size_t>(r * kCtxWidth + c)]);
        }
        rows.push_back({{"job_id", sm.row_jobs[static_cast<std::size_t>(r)]},
                        {"ov", ov},
                        {"cv", cv}});
      }
      json doc{{"layout_version", sm.layout_version},
               {"valid_rows", sm.valid_rows},
               {"now", now},
               {"rows", rows}};
      std::printf("%s\n", doc.dump(2).c_str());
      return;
    }

    std::printf("layout %s, %d rows, now=%lld\n", sm.layout_version.c_str(),
                sm.valid_rows, static_cast<long long>(now));
    for (int r = 0; r < sm.valid_rows; ++r) {
      std::printf("%-12s ov[", sm.row_jobs[static_cast<std::size_t>(r)].c_str());
      for (int c = 0; c < kObsWidth; ++c) {
        std::printf("%s%.4f", c ? " " : "",
                    sm.ov[static_cast<std::size_t>(r * kObsWidth + c)]);
      }
      std::printf("] cv[");
      for (int c = 0; c < kCtxWidth; ++c) {
        std::printf("%s%.4f", c ? " " : "",
                    sm.cv[static_cast<std::size_t>(r * kCtxWidth + c)]);
      }
      std::printf("]\n");
    }
  }
};

void register_inspect(CLI::App& app, InspectCmd& cmd) {
  CLI::App* c = app.add_subcommand(
      "inspect-state", "dump the feature matrix for a queue snapshot");
  add_trace_options(c, cmd.trace);
  add_cluster_options(c, cmd.cluster);
  c->add_option("--jobs", cmd.jobs, "queue depth: first N trace jobs")
      ->capture_default_str();
  c->add_flag("--naive", cmd.naive, "raw feature layout");
  c->add_flag("--json", cmd.as_json, "machine-readable output");
  c->callback([&cmd] { cmd.run(); });
}

// ------------------------------------------------------------ bench-overhead

struct BenchCmd {
  ClusterArgs cluster;
  std::vector<int> sizes = {128, 256, 512, 1024};
  int reps = 30;
  std::uint64_t seed = 1;
  bool naive = false;
  std::string out;

  void run() const {
    const std::int64_t started = unix_ms();
    ClusterSpec spec = make_cluster(cluster);

    int max_size = 0;
    for (int s : sizes) max_size = std::max(max_size, s);
    GenConfig gen;
    gen.job_count = max_size;
    gen.seed = derive_seed(seed, 0x400000001ull);
    TraceSet ts = synthesize_trace(gen);

    PpoHyper ppo;
    AgentNets nets = init_agent(naive, ppo, derive_seed(seed, 0x400000002ull));
    StateOptions opts{naive, RuntimeSource::requested};
    RlRanker ranker(nets, opts, /*greedy=*/true, nullptr, nullptr);

    // one full engine decision: feature build + ranking + placement probe
    auto pass = [&](const std::vector<const JobRecord*>& queue,
                    const ClusterState& state, std::int64_t now) {
      std::vector<std::size_t> order = ranker.rank(queue, state, now);
      std::vector<const JobRecord*> ranked;
      ranked.reserve(order.size());
      for (std::size_t i : order) ranked.push_back(queue[i]);
      lookahead_allocate(state, ranked, kDefaultLookahead);
    };
    std::vector<LatencyRow> rows = measure_overhead(sizes, pass, ts, spec, reps);

    std::printf("%10s %10s %12s %12s %8s\n", "queue", "reps", "mean_ms",
                "min_ms", "growth");
    json jrows = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double growth = i ? rows[i].mean_ms / rows[i - 1].mean_ms : 1.0;
      std::printf("%10d %10d %12.3f %12.3f %7.2fx\n", rows[i].queue_size,
                  rows[i].reps, rows[i].mean_ms, rows[i].min_ms, growth);
      jrows.push_back({{"queue_size", rows[i].queue_size},
                       {"reps", rows[i].reps},
                       {"mean_ms", rows[i].mean_ms},
                       {"min_ms", rows[i].min_ms},
                       {"growth", growth}});
    }
    if (!out.empty()) {
      json doc{{"format", "gsched-bench"},
               {"version", 1},
               {"cluster", cluster_summary(spec)},
               {"naive", naive},
               {"rows", jrows},
               {"wall_clock", wall_clock(started)}};
      atomic_write_file(out, doc.dump(2) + "\n");
    }
  }
};

void register_bench(CLI::App& app, BenchCmd& cmd) {
  CLI::App* c = app.add_subcommand(
      "bench-overhead", "decision-pass latency across queue sizes");
  add_cluster_options(c, cmd.cluster);
  c->add_option("--sizes", cmd.sizes, "queue sizes to time")
      ->delimiter(',')
      ->capture_default_str();
  c->add_option("--reps", cmd.reps)->capture_default_str();
  c->add_option("--seed", cmd.seed)->capture_default_str();
  c->add_flag("--naive", cmd.naive, "raw feature layout");
  c->add_option("--out", cmd.out, "write latency rows JSON here");
  c->callback([&cmd] { cmd.run(); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "trace-driven scheduling for heterogeneous GPU clusters: baseline "
      "policies, a learned ranking agent, and a placement solver"};
  app.require_subcommand(1);

  GenTraceCmd gen_cmd;
  TrainCmd train_cmd;
  EvalCmd eval_cmd;
  CompareCmd compare_cmd;
  InspectCmd inspect_cmd;
  BenchCmd bench_cmd;
  register_gen_trace(app, gen_cmd);
  register_train(app, train_cmd);
  register_eval(app, eval_cmd);
  register_compare(app, compare_cmd);
  register_inspect(app, inspect_cmd);
  register_bench(app, bench_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const EngineError& e) {
    std::fprintf(stderr, "engine error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
