#include "isosched/sim_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <set>

#include <json.hpp>

#include "isosched/error.hpp"

namespace isosched {

namespace {

[[noreturn]] void inconsistent(const std::string& msg) {
  throw Error(ErrorCode::TableInconsistent, "sim-metrics", msg);
}

std::string key_str(const TileKey& k) {
  return "(" + std::to_string(k.d) + "," + std::to_string(k.i) + "," + std::to_string(k.n) + ")";
}

}  // namespace

ArrivalTrace poisson_trace(double lambda, std::size_t count, std::size_t templates, std::uint64_t seed) {
  if (lambda <= 0.0 || templates == 0)
    throw Error(ErrorCode::InvariantError, "sim-metrics", "Poisson trace needs lambda > 0 and a template");
  ArrivalTrace trace;
  trace.generator = "poisson";
  trace.lambda = lambda;
  trace.seed = seed;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(lambda);
  std::uniform_int_distribution<std::size_t> pick(0, templates - 1);
  double clock = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    clock += gap(rng);
    trace.events.push_back({pick(rng), static_cast<std::int64_t>(std::ceil(clock))});
  }
  return trace;
}

ArrivalTrace explicit_trace(std::vector<ArrivalEvent> events) {
  for (std::size_t k = 1; k < events.size(); ++k)
    if (events[k].slot < events[k - 1].slot)
      throw Error(ErrorCode::InvariantError, "sim-metrics",
                  "arrival " + std::to_string(k) + " precedes arrival " + std::to_string(k - 1));
  ArrivalTrace trace;
  trace.events = std::move(events);
  return trace;
}

double link_energy_pj(std::int64_t bits, std::int64_t hops, const EnergyModel& energy) {
  return static_cast<double>(bits * hops) * energy.hop_pj_per_bit;
}

SimResult simulate(const SimInput& input, const PlatformConfig& platform, const EnergyModel& energy) {
  SimResult r;

  // per-engine occupancy: compute tiles and reconfiguration windows
  struct Block {
    std::int64_t t, end;
    const ComputeEntry* tile;
  };
  std::map<std::int32_t, std::vector<Block>> engines;
  std::vector<const ComputeEntry*> tiles;
  for (const auto& [p, stream] : input.table.engine_streams)
    for (const auto& e : stream) {
      if (e.len <= 0) inconsistent("tile " + key_str(e.key()) + " has non-positive length");
      engines[e.p].push_back({e.t, e.t + e.len, &e});
      tiles.push_back(&e);
    }
  for (const auto& w : input.table.reconfig)
    if (w.len > 0) engines[w.p].push_back({w.t, w.t + w.len, nullptr});
  for (auto& [p, blocks] : engines) {
    std::sort(blocks.begin(), blocks.end(), [](const Block& a, const Block& b) { return a.t < b.t; });
    for (std::size_t k = 1; k < blocks.size(); ++k)
      if (blocks[k].t < blocks[k - 1].end)
        inconsistent("engine " + to_string(platform.coord(p)) + " is double-booked at slot " +
                     std::to_string(blocks[k].t));
  }

  std::map<TileKey, const ComputeEntry*> by_key;
  for (const auto* e : tiles)
    if (!by_key.emplace(e->key(), e).second) inconsistent("tile " + key_str(e->key()) + " appears twice");
  std::map<TileKey, std::vector<TileKey>> preds;
  for (const auto& dep : input.deps) preds[dep.after].push_back(dep.before);

  // slot order: a tile starts once every producer has finished in the replay
  std::sort(tiles.begin(), tiles.end(), [](const ComputeEntry* a, const ComputeEntry* b) {
    return std::tie(a->t, a->d, a->i, a->n) < std::tie(b->t, b->d, b->i, b->n);
  });
  std::map<TileKey, std::int64_t> done;
  std::int64_t last_end = std::numeric_limits<std::int64_t>::min();
  for (const auto* e : tiles) {
    std::int64_t ready = std::numeric_limits<std::int64_t>::min();
    auto it = preds.find(e->key());
    if (it != preds.end())
      for (const auto& before : it->second) {
        auto f = done.find(before);
        if (f == done.end()) {
          if (by_key.count(before)) inconsistent("tile " + key_str(e->key()) + " starts before " + key_str(before));
          continue;   // producer not part of this table (rejected or foreign)
        }
        ready = std::max(ready, f->second);
      }
    if (ready > e->t)
      inconsistent("tile " + key_str(e->key()) + " would stall from slot " + std::to_string(e->t) + " to " +
                   std::to_string(ready));
    done[e->key()] = e->t + e->len;
    last_end = std::max(last_end, e->t + e->len);
  }

  // links: per-slot load against capacity, and carried bits
  for (const auto& [l, stream] : input.table.link_streams) {
    std::map<std::int64_t, std::int64_t> load;
    for (const auto& e : stream) {
      if (!platform.is_link(e.link)) inconsistent("transfer on invalid link " + to_string(e.link));
      const auto profile = bandwidth_profile(std::max<std::int64_t>(e.units, 1), platform.link_bw);
      for (std::size_t k = 0; k < profile.size(); ++k) {
        auto& v = load[e.t + static_cast<std::int64_t>(k)];
        v += profile[k];
        if (v > platform.link_bw)
          inconsistent("link " + to_string(e.link) + " overloaded at slot " +
                       std::to_string(e.t + static_cast<std::int64_t>(k)));
      }
      const auto bits = std::max<std::int64_t>(e.units, 1) * platform.element_bits;
      r.link_bits[l] += bits;
      r.link_bits_total += bits;
    }
  }

  r.dram_bits_total = input.dram_bits;
  for (const auto& w : input.table.reconfig) r.dram_bits_total += w.bits;

  std::int64_t first_arrival = std::numeric_limits<std::int64_t>::max();
  std::int64_t macs = 0;
  std::size_t on_time = 0;
  for (const auto& task : input.tasks) {
    first_arrival = std::min(first_arrival, task.arrival);
    if (task.rejected) {
      r.finish[task.d] = -1;
      r.on_time[task.d] = false;
      ++r.rejected;
      continue;
    }
    auto f = done.find(task.final_tile);
    if (f == done.end()) inconsistent("final tile of task " + std::to_string(task.d) + " never ran");
    r.finish[task.d] = f->second;
    const bool ok = f->second - task.arrival < task.deadline;
    r.on_time[task.d] = ok;
    on_time += ok ? 1 : 0;
    macs += task.total_macs;
  }
  r.sla_rate = input.tasks.empty() ? 1.0 : static_cast<double>(on_time) / static_cast<double>(input.tasks.size());
  if (!input.tasks.empty() && last_end != std::numeric_limits<std::int64_t>::min())
    r.makespan = last_end - first_arrival;

  r.link_energy_pj = link_energy_pj(r.link_bits_total, 1, energy);
  r.dram_energy_pj = static_cast<double>(r.dram_bits_total) * energy.dram_pj_per_bit;
  r.mac_energy_pj = static_cast<double>(macs) * energy.mac_pj;
  r.total_energy_pj = r.link_energy_pj + r.dram_energy_pj + r.mac_energy_pj;
  return r;
}

// ---- SLA ------------------------------------------------------------------------

SlaReport measure_sla(const std::vector<SlaSample>& samples, const SlaThresholds& thresholds) {
  SlaReport rep;
  for (const char* c : {"vision", "translation"}) {
    auto& cls = rep.classes[c];
    cls.threshold = thresholds.of(c);
  }
  std::size_t on_time = 0;
  for (const auto& s : samples) {
    auto& cls = rep.classes[s.sla_class];
    cls.threshold = thresholds.of(s.sla_class);
    ++cls.count;
    if (s.on_time) {
      ++cls.on_time;
      ++on_time;
    }
  }
  for (auto& [name, cls] : rep.classes) {
    cls.vacuous = cls.count == 0;
    cls.rate = cls.vacuous ? 1.0 : static_cast<double>(cls.on_time) / static_cast<double>(cls.count);
    cls.satisfied = cls.vacuous || cls.rate >= cls.threshold;
    rep.satisfied = rep.satisfied && cls.satisfied;
  }
  rep.rate = samples.empty() ? 1.0 : static_cast<double>(on_time) / static_cast<double>(samples.size());
  return rep;
}

SlaReport measure_sla(const SimInput& input, const SimResult& result, const SlaThresholds& thresholds) {
  std::vector<SlaSample> samples;
  for (const auto& t : input.tasks) {
    auto it = result.on_time.find(t.d);
    samples.push_back({t.sla_class, it != result.on_time.end() && it->second});
  }
  return measure_sla(samples, thresholds);
}

// ---- runs -----------------------------------------------------------------------

namespace {

TaskRecord record_of(const PreparedTask& task, std::size_t d, std::int64_t arrival, bool rejected) {
  TaskRecord rec;
  rec.d = d;
  rec.name = task.dag.name;
  rec.arrival = arrival;
  rec.deadline = task.dag.deadline;
  rec.sla_class = task.dag.sla_class;
  rec.critical = task.dag.critical;
  rec.rejected = rejected;
  rec.final_tile = {d, static_cast<std::size_t>(task.groups) - 1, task.stages.size() - 1};
  rec.total_macs = task.total_macs;
  return rec;
}

OnlineRun finish_run(const Scheduler& s, const PlatformConfig& platform, const std::vector<TaskRecord>& rejected,
                     const std::map<std::size_t, std::size_t>& template_of, const EnergyModel& energy) {
  OnlineRun run;
  run.state = s.state();
  run.input = sim_input(run.state, platform, rejected);
  for (auto& rec : run.input.tasks) {
    auto it = template_of.find(rec.d);
    if (it != template_of.end()) rec.template_id = it->second;
  }
  run.result = simulate(run.input, platform, energy);
  return run;
}

}  // namespace

SimInput sim_input(const SchedulerState& state, const PlatformConfig& platform,
                   const std::vector<TaskRecord>& rejected) {
  SimInput in;
  in.table = make_schedule_table(state.x, state.y, state.reconfig, platform);
  in.deps = state.problem.deps;
  in.dram_bits = state.spill_bits;
  for (const auto& [d, info] : state.tasks) in.tasks.push_back(record_of(*info.prep, d, info.arrival, false));
  in.tasks.insert(in.tasks.end(), rejected.begin(), rejected.end());
  std::sort(in.tasks.begin(), in.tasks.end(), [](const TaskRecord& a, const TaskRecord& b) { return a.d < b.d; });
  return in;
}

OnlineRun run_online(const std::vector<std::shared_ptr<const PreparedTask>>& templates, const ArrivalTrace& trace,
                     const PlatformConfig& platform, const SchedulerParams& params, const EnergyModel& energy) {
  Scheduler s(platform, params);
  std::vector<TaskRecord> rejected;
  std::map<std::size_t, std::size_t> template_of;
  for (std::size_t k = 0; k < trace.events.size(); ++k) {
    const auto& ev = trace.events[k];
    const auto inst = instantiate(*templates.at(ev.template_id), k, ev.slot);
    template_of[k] = ev.template_id;
    try {
      s.schedule_task(inst, ev.slot);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Unschedulable) throw;
      rejected.push_back(record_of(*inst, k, ev.slot, true));
    }
  }
  return finish_run(s, platform, rejected, template_of, energy);
}

OnlineRun run_workload(const std::vector<std::shared_ptr<const PreparedTask>>& tasks, const PlatformConfig& platform,
                       const SchedulerParams& params, const EnergyModel& energy) {
  auto order = tasks;
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return std::tie(a->dag.arrival, a->dag.task_id) < std::tie(b->dag.arrival, b->dag.task_id);
  });
  Scheduler s(platform, params);
  std::vector<TaskRecord> rejected;
  for (const auto& t : order) {
    try {
      s.schedule_task(t, t->dag.arrival);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Unschedulable) throw;
      rejected.push_back(record_of(*t, t->dag.task_id, t->dag.arrival, true));
    }
  }
  return finish_run(s, platform, rejected, {}, energy);
}

LbtResult measure_lbt(const std::vector<std::shared_ptr<const PreparedTask>>& templates,
                      const PlatformConfig& platform, const LbtOptions& options) {
  LbtResult res;
  const auto energy = EnergyModel::of(platform);
  auto probe = [&](double lambda) {
    const auto trace = poisson_trace(lambda, options.arrivals, templates.size(), options.seed);
    const auto run = run_online(templates, trace, platform, options.scheduler, energy);
    const auto sla = measure_sla(run.input, run.result, options.thresholds);
    res.probes.push_back({lambda, sla.rate, sla.satisfied});
    return sla.satisfied;
  };

  double lo = options.lambda_lo, hi = options.lambda_hi;
  if (!probe(lo))
    throw Error(ErrorCode::NoFeasibleRate, "sim-metrics",
                "SLA fails already at the lower bound of " + std::to_string(lo) + " tasks/slot (rate " +
                    std::to_string(res.probes.back().sla_rate) + ")");
  if (probe(hi)) {
    res.hit_upper_bound = true;
    lo = hi;
  } else {
    for (int k = 0; k < options.iterations; ++k) {
      const double mid = 0.5 * (lo + hi);
      (probe(mid) ? lo : hi) = mid;
    }
  }
  res.rate_per_slot = lo;
  res.qps = lo * platform.engine.clock_hz / static_cast<double>(std::max<std::int64_t>(options.timeslot_cycles, 1));

  auto sorted = res.probes;
  std::sort(sorted.begin(), sorted.end(), [](const LbtProbe& a, const LbtProbe& b) { return a.lambda < b.lambda; });
  for (std::size_t k = 1; k < sorted.size(); ++k)
    if (sorted[k].sla_rate > sorted[k - 1].sla_rate) res.monotone = false;
  return res;
}

namespace {

std::int64_t layer_out_units(const LayerNode& l) {
  if (l.conv) return l.conv->out_w * l.conv->out_c;
  if (l.attn) return l.attn->keys * l.attn->heads;
  return 1;
}

}  // namespace

SimResult baseline_lts(const std::vector<std::shared_ptr<const PreparedTask>>& tasks, const PlatformConfig& platform,
                       const EnergyModel& energy) {
  auto order = tasks;
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return std::tie(a->dag.arrival, a->dag.task_id) < std::tie(b->dag.arrival, b->dag.task_id);
  });
  SimResult r;
  std::int64_t machine_free = std::numeric_limits<std::int64_t>::min();
  std::int64_t first_arrival = std::numeric_limits<std::int64_t>::max();
  std::int64_t last_end = 0;
  std::int64_t macs = 0;
  std::size_t on_time = 0;
  for (const auto& tp : order) {
    const auto& dag = tp->dag;
    first_arrival = std::min(first_arrival, dag.arrival);
    std::int64_t t = std::max(machine_free, dag.arrival);
    for (const auto& c : tile_costs(dag, platform.engine, tp->timeslot_cycles))
      t += ceil_div(c.tiles_total, platform.engine_count()) * c.t_slots;
    for (const auto& [u, v] : fuse_elementwise(dag).edges) {
      const auto& layer = dag.nodes[u];
      const auto bits = tiles_of_layer(layer) * layer_out_units(layer) * platform.element_bits;
      t += 2 * ceil_div(bits, platform.dram_bw_bits);   // write back, read again
      r.dram_bits_total += 2 * bits;
    }
    machine_free = t;
    last_end = std::max(last_end, t);
    r.finish[dag.task_id] = t;
    const bool ok = t - dag.arrival < dag.deadline;
    r.on_time[dag.task_id] = ok;
    on_time += ok ? 1 : 0;
    macs += tp->total_macs;
  }
  r.sla_rate = order.empty() ? 1.0 : static_cast<double>(on_time) / static_cast<double>(order.size());
  r.makespan = order.empty() ? 0 : last_end - first_arrival;
  r.dram_energy_pj = static_cast<double>(r.dram_bits_total) * energy.dram_pj_per_bit;
  r.mac_energy_pj = static_cast<double>(macs) * energy.mac_pj;
  r.total_energy_pj = r.dram_energy_pj + r.mac_energy_pj;
  return r;
}

OnlineRun baseline_tss_nprm(const std::vector<std::shared_ptr<const PreparedTask>>& tasks,
                            const PlatformConfig& platform, SchedulerParams params, const EnergyModel& energy) {
  params.policy = Policy::NonPreemptive;
  return run_workload(tasks, platform, params, energy);
}

// ---- reports ----------------------------------------------------------------------

void write_report(std::ostream& os, const ReportMeta& meta, const SimInput& input, const SimResult& result,
                  const SlaReport& sla, const std::vector<AuditRecord>& audit) {
  using nlohmann::json;
  json doc;
  doc["command"] = meta.command;
  doc["config_hash"] = meta.config_hash;
  doc["seed"] = meta.seed;
  doc["seeds"] = meta.seeds;
  doc["config"] = meta.config;

  json tasks = json::array();
  for (const auto& t : input.tasks) {
    json j;
    j["id"] = t.d;
    j["name"] = t.name;
    j["template"] = t.template_id;
    j["arrival"] = t.arrival;
    j["deadline"] = t.deadline;
    j["class"] = t.sla_class;
    j["critical"] = t.critical;
    j["rejected"] = t.rejected;
    j["finish"] = result.finish.count(t.d) ? result.finish.at(t.d) : -1;
    j["on_time"] = result.on_time.count(t.d) && result.on_time.at(t.d);
    tasks.push_back(std::move(j));
  }
  doc["tasks"] = std::move(tasks);

  json sim;
  sim["sla_rate"] = result.sla_rate;
  sim["makespan"] = result.makespan;
  sim["rejected"] = result.rejected;
  sim["energy_pj"] = {{"link", result.link_energy_pj},
                      {"dram", result.dram_energy_pj},
                      {"mac", result.mac_energy_pj},
                      {"total", result.total_energy_pj}};
  sim["link_bits_total"] = result.link_bits_total;
  sim["dram_bits_total"] = result.dram_bits_total;
  json links = json::object();
  for (const auto& [l, bits] : result.link_bits) links[std::to_string(l)] = bits;
  sim["link_bits"] = std::move(links);
  doc["sim"] = std::move(sim);

  json classes = json::object();
  for (const auto& [name, c] : sla.classes)
    classes[name] = {{"count", c.count},         {"on_time", c.on_time},   {"rate", c.rate},
                     {"threshold", c.threshold}, {"satisfied", c.satisfied}, {"vacuous", c.vacuous}};
  doc["sla"] = {{"rate", sla.rate}, {"satisfied", sla.satisfied}, {"classes", std::move(classes)}};

  json records = json::array();
  for (const auto& a : audit) {
    json j;
    j["task"] = a.d;
    j["t_now"] = a.t_now;
    j["start"] = a.start;
    j["mode"] = a.mode;
    j["victims"] = a.victims;
    json claimed = json::array();
    for (const auto& [v, s] : a.claimed) claimed.push_back({{"victim", v}, {"stage", s}});
    j["claimed"] = std::move(claimed);
    json tried = json::array();
    for (const auto& t : a.tried) tried.push_back({{"victim", t.d}, {"cutoff", t.cutoff}});
    j["tried"] = std::move(tried);
    j["score"] = std::isfinite(a.score) ? json(a.score) : json("inf");
    j["overhead_slots"] = a.overhead_slots;
    j["violations"] = a.violations.size();
    j["deadline_misses"] = a.deadline_misses;
    j["deadline_met"] = a.deadline_met;
    records.push_back(std::move(j));
  }
  doc["audit"] = std::move(records);
  os << doc.dump(2) << '\n';
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "lambda,sla_rate,lbt,energy_pj\n";
  os << std::setprecision(10);
  for (const auto& r : rows) os << r.lambda << ',' << r.sla_rate << ',' << r.lbt << ',' << r.energy_pj << '\n';
}

}  // namespace isosched
