// isosched: schedule, simulate and evaluate multi-DNN workloads on a tiled
// engine mesh.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "isosched/error.hpp"
#include "isosched/instances.hpp"
#include "isosched/seed.hpp"
#include "isosched/sim_metrics.hpp"
#include "isosched/workload.hpp"

namespace fs = std::filesystem;
using namespace isosched;

namespace {

constexpr int kExitUnschedulable = 2;
constexpr int kExitViolation = 3;
constexpr int kExitError = 1;

struct Options {
  std::string platform = "mesh4";
  std::string workload;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::int64_t mcts_iters = 5000;
  double exploration_c = 1.4142135623730951;
  double lcs_threshold = 0.15;
  std::string baseline = "none";

  // simulate / sweep-lbt
  double lambda = 0.0;
  std::size_t arrivals = 200;
  double lambda_lo = 1e-4;
  double lambda_hi = 1.0;
  int iterations = 12;
  std::size_t points = 8;

  // bench-mcu
  std::size_t pattern_size = 8;
  std::size_t host_size = 20;
  std::size_t instances = 10;
  double pattern_density = 0.2;
  double host_density = 0.5;

  // gen-workload
  std::string cls = "Simple";
  std::size_t tasks = 3;
  std::int64_t arrival_spacing = 0;

  // validate
  std::string table;
  bool allow_deadline_miss = false;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("isosched");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("ISOSCHED_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

std::string file_digest(const std::string& path) {
  if (path.empty()) return "-";
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(derive_seed(0, ss.str())));
  return buf;
}

struct Context {
  Options opt;
  std::string command;
  PlatformConfig platform;
  fs::path out;
  ReportMeta meta;

  Context(const Options& o, std::string cmd) : opt(o), command(std::move(cmd)) {
    platform = load_platform(opt.platform);
    out = opt.out;
    fs::create_directories(out);

    std::map<std::string, std::string> cfg{
        {"platform", opt.platform},
        {"platform_file", file_digest(fs::exists(opt.platform) ? opt.platform : "")},
        {"workload", opt.workload},
        {"workload_file", file_digest(opt.workload)},
        {"mcts_iters", std::to_string(opt.mcts_iters)},
        {"exploration_c", std::to_string(opt.exploration_c)},
        {"lcs_threshold", std::to_string(opt.lcs_threshold)},
        {"baseline", opt.baseline},
    };
    if (command == "simulate") {
      cfg["lambda"] = std::to_string(opt.lambda);
      cfg["arrivals"] = std::to_string(opt.arrivals);
    } else if (command == "sweep-lbt") {
      cfg["lambda_lo"] = std::to_string(opt.lambda_lo);
      cfg["lambda_hi"] = std::to_string(opt.lambda_hi);
      cfg["iterations"] = std::to_string(opt.iterations);
      cfg["arrivals"] = std::to_string(opt.arrivals);
      cfg["points"] = std::to_string(opt.points);
    }
    std::string canon = command;
    for (const auto& [k, v] : cfg) canon += "|" + k + "=" + v;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(derive_seed(0, canon)));
    meta.command = command;
    meta.config_hash = buf;
    meta.seed = opt.seed;
    meta.config = cfg;
    for (const char* label : {"mcts", "trace", "generator"}) meta.seeds[label] = derive_seed(opt.seed, label);
    spdlog::info("{} config hash {}", command, meta.config_hash);
  }

  SchedulerParams scheduler() const {
    SchedulerParams p;
    p.mcu.max_iterations = opt.mcts_iters;
    p.mcu.exploration = opt.exploration_c;
    p.mcu.rng_seed = meta.seeds.at("mcts");
    return p;
  }

  std::vector<std::shared_ptr<const PreparedTask>> prepare(const WorkloadSet& w) const {
    const auto ts = base_timeslot(w, platform.engine);
    PrepareOptions po;
    po.balance.threshold = opt.lcs_threshold;
    po.balance.buffer_capacity = platform.engine_buffer;
    std::vector<std::shared_ptr<const PreparedTask>> out;
    for (const auto& t : w.tasks) {
      out.push_back(std::make_shared<PreparedTask>(prepare_task(t, platform.engine, ts, po)));
      const auto& p = *out.back();
      spdlog::debug("task {} '{}': {} stages, {} groups, cv {:.3f} -> {:.3f}", t.task_id, t.name, p.stages.size(),
                    p.groups, p.lcs.cv_before, p.lcs.cv_after);
    }
    return out;
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream f(out / name, std::ios::binary);
    f << text;
    if (!f) throw Error(ErrorCode::InvariantError, "cli", "cannot write " + (out / name).string());
    spdlog::info("wrote {}", (out / name).string());
  }
};

std::string report_text(const Context& ctx, const OnlineRun& run) {
  std::ostringstream os;
  const auto sla = measure_sla(run.input, run.result);
  write_report(os, ctx.meta, run.input, run.result, sla, run.state.audit);
  return os.str();
}

nlohmann::json summary_json(const SimResult& r) {
  nlohmann::json j;
  j["sla_rate"] = r.sla_rate;
  j["makespan"] = r.makespan;
  j["rejected"] = r.rejected;
  j["energy_pj"] = {{"link", r.link_energy_pj}, {"dram", r.dram_energy_pj}, {"mac", r.mac_energy_pj},
                    {"total", r.total_energy_pj}};
  nlohmann::json finish = nlohmann::json::object();
  for (const auto& [d, f] : r.finish) finish[std::to_string(d)] = f;
  j["finish"] = std::move(finish);
  return j;
}

void run_baseline(const Context& ctx, const std::vector<std::shared_ptr<const PreparedTask>>& tasks) {
  if (ctx.opt.baseline == "none") return;
  const auto energy = EnergyModel::of(ctx.platform);
  nlohmann::json j;
  j["baseline"] = ctx.opt.baseline;
  j["config_hash"] = ctx.meta.config_hash;
  SimResult r = ctx.opt.baseline == "lts" ? baseline_lts(tasks, ctx.platform, energy)
                                          : baseline_tss_nprm(tasks, ctx.platform, ctx.scheduler(), energy).result;
  j["sim"] = summary_json(r);
  ctx.write("baseline_" + ctx.opt.baseline + ".json", j.dump(2) + "\n");
  std::cout << "baseline " << ctx.opt.baseline << ": sla_rate " << r.sla_rate << ", makespan " << r.makespan
            << ", energy " << r.total_energy_pj << " pJ\n";
}

int finish_run(const Context& ctx, const OnlineRun& run, bool rejections_fatal) {
  ctx.write("report.json", report_text(ctx, run));
  std::ostringstream table;
  write_schedule_table(table, run.input.table);
  ctx.write("schedule.txt", table.str());
  std::cout << ctx.command << ": " << run.input.tasks.size() << " tasks, sla_rate " << run.result.sla_rate
            << ", makespan " << run.result.makespan << ", energy " << run.result.total_energy_pj
            << " pJ, config " << ctx.meta.config_hash << "\n";
  for (const auto& a : run.state.audit)
    if (!a.violations.empty()) {
      spdlog::error("task {} committed with {} violations", a.d, a.violations.size());
      return kExitViolation;
    }
  if (rejections_fatal && run.result.rejected > 0) {
    for (const auto& t : run.input.tasks)
      if (t.rejected) spdlog::error("Unschedulable: task {} ('{}') cannot meet deadline {}", t.d, t.name, t.deadline);
    return kExitUnschedulable;
  }
  return 0;
}

WorkloadSet require_workload(const Options& opt) {
  if (opt.workload.empty()) throw Error(ErrorCode::ParseError, "cli", "--workload is required");
  return load_workload(opt.workload);
}

int cmd_schedule(const Options& opt) {
  Context ctx(opt, "schedule");
  const auto tasks = ctx.prepare(require_workload(opt));
  const auto energy = EnergyModel::of(ctx.platform);
  const auto run = run_workload(tasks, ctx.platform, ctx.scheduler(), energy);
  run_baseline(ctx, tasks);
  return finish_run(ctx, run, true);
}

int cmd_simulate(const Options& opt) {
  Context ctx(opt, "simulate");
  const auto tasks = ctx.prepare(require_workload(opt));
  const auto energy = EnergyModel::of(ctx.platform);
  run_baseline(ctx, tasks);
  if (opt.lambda <= 0.0) return finish_run(ctx, run_workload(tasks, ctx.platform, ctx.scheduler(), energy), true);
  const auto trace = poisson_trace(opt.lambda, opt.arrivals, tasks.size(), ctx.meta.seeds.at("trace"));
  const auto run = run_online(tasks, trace, ctx.platform, ctx.scheduler(), energy);
  return finish_run(ctx, run, false);
}

int cmd_sweep(const Options& opt) {
  Context ctx(opt, "sweep-lbt");
  const auto tasks = ctx.prepare(require_workload(opt));
  const auto energy = EnergyModel::of(ctx.platform);
  LbtOptions lo;
  lo.lambda_lo = opt.lambda_lo;
  lo.lambda_hi = opt.lambda_hi;
  lo.iterations = opt.iterations;
  lo.arrivals = opt.arrivals;
  lo.seed = ctx.meta.seeds.at("trace");
  lo.timeslot_cycles = tasks.empty() ? 1 : tasks.front()->timeslot_cycles;
  lo.scheduler = ctx.scheduler();

  nlohmann::json j;
  j["config_hash"] = ctx.meta.config_hash;
  j["seed"] = opt.seed;
  j["probe_budget"] = {{"iterations", lo.iterations}, {"arrivals", lo.arrivals}};
  double lbt = 0.0;
  try {
    const auto r = measure_lbt(tasks, ctx.platform, lo);
    lbt = r.rate_per_slot;
    j["lbt_per_slot"] = r.rate_per_slot;
    j["lbt_qps"] = r.qps;
    j["hit_upper_bound"] = r.hit_upper_bound;
    j["monotone"] = r.monotone;
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& p : r.probes)
      probes.push_back({{"lambda", p.lambda}, {"sla_rate", p.sla_rate}, {"satisfied", p.satisfied}});
    j["probes"] = std::move(probes);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoFeasibleRate) throw;
    spdlog::warn("{}", e.what());
    j["lbt_per_slot"] = 0.0;
    j["no_feasible_rate"] = true;
  }

  std::vector<SweepRow> rows;
  const auto n = std::max<std::size_t>(opt.points, 2);
  for (std::size_t k = 0; k < n; ++k) {
    const double lambda =
        opt.lambda_lo * std::pow(opt.lambda_hi / opt.lambda_lo, static_cast<double>(k) / static_cast<double>(n - 1));
    const auto trace = poisson_trace(lambda, opt.arrivals, tasks.size(), derive_seed(lo.seed, std::to_string(k)));
    const auto run = run_online(tasks, trace, ctx.platform, lo.scheduler, energy);
    rows.push_back({lambda, run.result.sla_rate, lbt, run.result.total_energy_pj});
  }
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  ctx.write("sweep.csv", csv.str());
  ctx.write("lbt.json", j.dump(2) + "\n");
  std::cout << "sweep-lbt: lbt " << lbt << " tasks/slot over " << rows.size() << " sweep points, config "
            << ctx.meta.config_hash << "\n";
  return 0;
}

int cmd_bench_mcu(const Options& opt) {
  Context ctx(opt, "bench-mcu");
  std::ostringstream csv;
  csv << "instance,embeddable,mcts_first_success,mcts_iterations,mcts_us,ullmann_expansions,ullmann_us\n";
  std::vector<std::int64_t> mcts, ull;
  using clock = std::chrono::steady_clock;
  for (std::size_t k = 0; k < opt.instances; ++k) {
    const auto seed = derive_seed(ctx.meta.seeds.at("generator"), "bench" + std::to_string(k));
    const auto inst = random_match_instance(opt.pattern_size, opt.host_size, opt.pattern_density, opt.host_density, seed);
    McuParams mp;
    mp.max_iterations = opt.mcts_iters;
    mp.exploration = opt.exploration_c;
    mp.rng_seed = derive_seed(ctx.meta.seeds.at("mcts"), std::to_string(k));
    auto t0 = clock::now();
    const auto m = mcu_search(inst.a, inst.b, mp);
    auto t1 = clock::now();
    const auto u = ullmann_search(inst.a, inst.b);
    auto t2 = clock::now();
    const auto us = [](auto a, auto b) {
      return std::chrono::duration_cast<std::chrono::microseconds>(b - a).count();
    };
    csv << k << ',' << (u.found ? 1 : 0) << ',' << m.first_success << ',' << m.iterations << ',' << us(t0, t1) << ','
        << u.expansions << ',' << us(t1, t2) << '\n';
    if (u.found) {
      mcts.push_back(m.first_success < 0 ? m.iterations : m.first_success);
      ull.push_back(u.expansions);
    }
  }
  ctx.write("bench_mcu.csv", csv.str());
  auto median = [](std::vector<std::int64_t> v) -> double {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto h = v.size() / 2;
    return v.size() % 2 ? static_cast<double>(v[h]) : 0.5 * static_cast<double>(v[h - 1] + v[h]);
  };
  std::cout << "bench-mcu: " << mcts.size() << "/" << opt.instances << " embeddable, median MCTS iterations "
            << median(mcts) << ", median Ullmann expansions " << median(ull) << "\n";
  return 0;
}

int cmd_gen(const Options& opt) {
  Context ctx(opt, "gen-workload");
  WorkloadSet w;
  if (opt.cls == "contention") {
    w = contention_scenario(ctx.platform, ctx.meta.seeds.at("generator")).workload;
  } else {
    SyntheticSpec spec;
    if (opt.cls == "Simple") spec.cls = ComplexityClass::Simple;
    else if (opt.cls == "Middle") spec.cls = ComplexityClass::Middle;
    else if (opt.cls == "Complex") spec.cls = ComplexityClass::Complex;
    else throw Error(ErrorCode::ParseError, "cli", "unknown class '" + opt.cls + "'");
    spec.tasks = opt.tasks;
    spec.arrival_spacing = opt.arrival_spacing;
    spec.engine = ctx.platform.engine;
    w = generate_synthetic(spec, ctx.meta.seeds.at("generator"));
  }
  std::ostringstream os;
  write_workload(os, w);
  ctx.write("workload.txt", os.str());
  std::size_t nodes = 0, edges = 0;
  for (const auto& t : w.tasks) {
    nodes += t.nodes.size();
    edges += t.edges.size();
  }
  std::cout << "gen-workload: " << w.tasks.size() << " tasks, " << nodes << " nodes, " << edges << " edges, class "
            << to_string(w.complexity) << "\n";
  return 0;
}

int cmd_validate(const Options& opt) {
  Context ctx(opt, "validate");
  const auto tasks = ctx.prepare(require_workload(opt));
  if (opt.table.empty()) throw Error(ErrorCode::ParseError, "cli", "--table is required");
  std::ifstream in(opt.table);
  if (!in) throw Error(ErrorCode::ParseError, "cli", "cannot open " + opt.table);
  const auto table = read_schedule_table(in, ctx.platform);
  ComputeSchedule x;
  CommSchedule y;
  for (const auto& [p, s] : table.engine_streams) x.entries.insert(x.entries.end(), s.begin(), s.end());
  for (const auto& [l, s] : table.link_streams) y.entries.insert(y.entries.end(), s.begin(), s.end());
  ScheduleProblem problem;
  // the scheduler may have committed a folded variant; its stage count is in the table
  std::map<std::size_t, std::size_t> stage_count;
  for (const auto& e : x.entries) stage_count[e.d] = std::max(stage_count[e.d], e.n + 1);
  for (const auto& t : tasks) {
    auto it = stage_count.find(t->dag.task_id);
    if (it == stage_count.end()) continue;
    const PreparedTask* chosen = t.get();
    for (const auto& v : t->coarser)
      if (chosen->stages.size() != it->second) chosen = v.get();
    if (chosen->stages.size() != it->second)
      throw Error(ErrorCode::ParseError, "cli", "task " + std::to_string(it->first) + " has no variant with " +
                                                    std::to_string(it->second) + " stages");
    append_problem(problem, *chosen, t->dag.task_id, t->dag.arrival, t->dag.deadline);
  }
  const auto report = validate_all(x, y, problem, ctx.platform);

  nlohmann::json j;
  j["config_hash"] = ctx.meta.config_hash;
  nlohmann::json vs = nlohmann::json::array();
  std::size_t fatal = 0;
  for (const auto& v : report.violations) {
    vs.push_back({{"kind", std::string(to_string(v.kind))}, {"task", v.d}, {"i", v.i}, {"n_or_k", v.n_or_k},
                  {"t", v.t}, {"link", v.link}, {"amount", v.amount}, {"detail", v.detail}});
    if (!(opt.allow_deadline_miss && v.kind == ViolationKind::Deadline)) ++fatal;
    std::cout << to_string(v.kind) << " task " << v.d << " group " << v.i << " node " << v.n_or_k << " slot " << v.t
              << ": " << v.detail << "\n";
  }
  j["violations"] = std::move(vs);
  nlohmann::json cost = nlohmann::json::object();
  for (const auto& [d, c] : report.comm_cost) cost[std::to_string(d)] = c;
  j["comm_cost"] = std::move(cost);
  ctx.write("validation.json", j.dump(2) + "\n");
  std::cout << "validate: " << report.violations.size() << " violations (" << fatal << " fatal)\n";
  return fatal ? kExitViolation : 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  Options opt;
  CLI::App app{"Preemptive tile-spatial scheduler for multi-DNN workloads"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* s) {
    s->add_option("--platform", opt.platform, "Preset (edge, cloud, mesh2, mesh4, mesh8) or platform file")
        ->capture_default_str();
    s->add_option("--workload", opt.workload, "Workload file");
    s->add_option("--seed", opt.seed, "Global seed")->capture_default_str();
    s->add_option("--out", opt.out, "Output directory")->capture_default_str();
    s->add_option("--mcts-iters", opt.mcts_iters, "MCTS iteration budget")->capture_default_str()->check(
        CLI::PositiveNumber);
    s->add_option("--exploration-c", opt.exploration_c, "UCB exploration constant")->capture_default_str();
    s->add_option("--lcs-threshold", opt.lcs_threshold, "CV threshold for stage balancing")->capture_default_str();
    s->add_option("--baseline", opt.baseline, "Reference baseline")
        ->check(CLI::IsMember({"lts", "tss-nprm", "none"}))
        ->capture_default_str();
  };

  auto* schedule = app.add_subcommand("schedule", "Schedule a workload at its own arrival slots");
  auto* simulate = app.add_subcommand("simulate", "Schedule and replay a workload or a Poisson trace");
  auto* sweep = app.add_subcommand("sweep-lbt", "Measure latency-bound throughput and sweep arrival rates");
  auto* bench = app.add_subcommand("bench-mcu", "Compare MCTS matching against backtracking");
  auto* gen = app.add_subcommand("gen-workload", "Write a synthetic workload file");
  auto* validate = app.add_subcommand("validate", "Check a schedule table against a workload");
  for (auto* s : {schedule, simulate, sweep, bench, gen, validate}) common(s);

  simulate->add_option("--lambda", opt.lambda, "Poisson rate in tasks per slot; 0 uses workload arrivals");
  simulate->add_option("--arrivals", opt.arrivals, "Trace length")->capture_default_str();
  sweep->add_option("--lambda-lo", opt.lambda_lo)->capture_default_str();
  sweep->add_option("--lambda-hi", opt.lambda_hi)->capture_default_str();
  sweep->add_option("--iterations", opt.iterations, "Binary search probes")->capture_default_str();
  sweep->add_option("--arrivals", opt.arrivals, "Arrivals per probe")->capture_default_str();
  sweep->add_option("--points", opt.points, "Sweep grid points")->capture_default_str();
  bench->add_option("--pattern-size", opt.pattern_size)->capture_default_str();
  bench->add_option("--host-size", opt.host_size)->capture_default_str();
  bench->add_option("--instances", opt.instances)->capture_default_str();
  bench->add_option("--pattern-density", opt.pattern_density)->capture_default_str();
  bench->add_option("--host-density", opt.host_density)->capture_default_str();
  gen->add_option("--class", opt.cls, "Simple, Middle, Complex or contention")->capture_default_str();
  gen->add_option("--tasks", opt.tasks)->capture_default_str();
  gen->add_option("--arrival-spacing", opt.arrival_spacing)->capture_default_str();
  validate->add_option("--table", opt.table, "Schedule table file")->required();
  validate->add_flag("--allow-deadline-miss", opt.allow_deadline_miss, "Report deadline misses without failing");

  CLI11_PARSE(app, argc, argv);

  try {
    if (schedule->parsed()) return cmd_schedule(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    if (bench->parsed()) return cmd_bench_mcu(opt);
    if (gen->parsed()) return cmd_gen(opt);
    if (validate->parsed()) return cmd_validate(opt);
  } catch (const Error& e) {
    spdlog::error("[{}] {}: {}", e.module(), to_string(e.code()), e.what());
    if (e.code() == ErrorCode::Unschedulable) return kExitUnschedulable;
    if (e.code() == ErrorCode::InvariantError) return kExitViolation;
    return kExitError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitError;
  }
  return kExitError;
}
