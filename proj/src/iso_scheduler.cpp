#include "isosched/iso_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <sstream>

#include "isosched/error.hpp"
#include "isosched/seed.hpp"

namespace isosched {

namespace {

constexpr std::int64_t kWindowEnd = std::numeric_limits<std::int64_t>::max() / 4;
constexpr std::int64_t kHorizon = 1 << 22;

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, "iso-scheduler", msg); }

std::vector<Edge> dedupe(std::vector<Edge> edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

bool contains_layer(const StageInfo& s, std::size_t layer) {
  return std::find(s.members.begin(), s.members.end(), layer) != s.members.end();
}

std::vector<Edge> stage_edges_of(const std::vector<StageInfo>& stages, const FusedDag& fused) {
  std::vector<Edge> out;
  for (const auto& [u, v] : fused.edges)
    for (const auto& su : stages)
      for (const auto& sv : stages) {
        if (su.index == sv.index || !contains_layer(su, u) || !contains_layer(sv, v)) continue;
        if (contains_layer(su, v) || contains_layer(sv, u)) continue;
        out.emplace_back(su.index, sv.index);
      }
  return dedupe(std::move(out));
}

}  // namespace

// ---- task preparation ---------------------------------------------------------

std::vector<Edge> transitive_reduction(std::size_t n, const std::vector<Edge>& edges_in) {
  const auto edges = dedupe(edges_in);
  std::vector<std::vector<std::size_t>> succ(n);
  for (const auto& [a, b] : edges) succ[a].push_back(b);
  std::vector<Edge> out;
  for (const auto& [a, b] : edges) {
    // b reachable from a without the direct edge?
    std::vector<std::uint8_t> seen(n, 0);
    std::vector<std::size_t> stack;
    for (auto c : succ[a])
      if (c != b) stack.push_back(c);
    bool implied = false;
    while (!stack.empty() && !implied) {
      const auto v = stack.back();
      stack.pop_back();
      if (seen[v]) continue;
      seen[v] = 1;
      if (v == b) implied = true;
      for (auto c : succ[v]) stack.push_back(c);
    }
    if (!implied) out.emplace_back(a, b);
  }
  return out;
}

namespace {

/// Folds the cheapest adjacent pair until at most `limit` stages remain.
void fold_stages(std::vector<StageInfo>& stages, std::size_t limit) {
  while (stages.size() > limit) {
    std::size_t k = 0;
    for (std::size_t j = 1; j + 1 < stages.size(); ++j)
      if (stages[j].slots + stages[j + 1].slots < stages[k].slots + stages[k + 1].slots) k = j;
    auto& a = stages[k];
    const auto& b = stages[k + 1];
    for (auto m : b.members)
      if (!contains_layer(a, m)) a.members.push_back(m);
    a.slots += b.slots;
    a.weight_bits += b.weight_bits;
    a.out_units = b.out_units;
    a.macs += b.macs;
    stages.erase(stages.begin() + static_cast<std::ptrdiff_t>(k) + 1);
    for (std::size_t j = 0; j < stages.size(); ++j) stages[j].index = j;
  }
}

}  // namespace

PreparedTask prepare_task(const TaskDag& dag, const EngineSpec& engine, std::int64_t timeslot_cycles,
                          const PrepareOptions& options) {
  check_invariants(dag);
  const auto costs = tile_costs(dag, engine, timeslot_cycles);
  if (costs.empty())
    fail(ErrorCode::EmptyWorkload, "task " + std::to_string(dag.task_id) + " has no compute-bearing layer");

  PreparedTask out;
  out.dag = dag;
  out.timeslot_cycles = timeslot_cycles;
  auto pipeline = initial_pipeline(dag, costs);
  if (options.run_lcs) {
    out.lcs = balance(std::move(pipeline), options.balance);
  } else {
    out.lcs.pipeline = std::move(pipeline);
    for (const auto& s : out.lcs.pipeline) out.lcs.latencies_before.push_back(s.stage_latency);
    out.lcs.latencies_after = out.lcs.latencies_before;
  }
  const auto& segs = out.lcs.pipeline;

  std::int64_t groups = segs.front().tiles;
  for (const auto& s : segs) groups = std::min(groups, s.tiles);
  out.groups = std::max<std::int64_t>(groups, 1);
  const auto I = out.groups;

  for (const auto& c : costs) out.total_macs += tile_macs(dag.nodes[c.layer_id]) * c.tiles_total;

  std::vector<StageInfo> stages;
  for (const auto& seg : segs) {
    StageInfo st;
    st.index = stages.size();
    st.members = seg.members;
    st.slots = ceil_div(seg.stage_latency * seg.tiles, I);
    st.weight_bits = seg.weight_bits() / seg.parts();
    st.out_units = ceil_div(seg.out_units() * seg.tiles, I);
    st.halo = seg.halo() > 0 ? std::min(I - 1, ceil_div(seg.halo() * I, seg.tiles)) : 0;
    std::int64_t macs = 0;
    for (auto id : seg.members) macs += tile_macs(dag.nodes[id]) * tiles_of_layer(dag.nodes[id]);
    st.macs = macs / seg.parts() / I;
    stages.push_back(std::move(st));
  }

  auto finish_variant = [&](PreparedTask& t, std::vector<StageInfo> st, std::size_t limit) {
    fold_stages(st, limit);
    t.stages = std::move(st);
    t.stage_edges = stage_edges_of(t.stages, fuse_elementwise(dag));
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (const auto& e : transitive_reduction(t.stages.size(), t.stage_edges)) coords.push_back(e);
    t.pattern = CsrMatrix::from_coords(t.stages.size(), t.stages.size(), std::move(coords));
  };
  const auto base = stages;
  finish_variant(out, std::move(stages), std::max<std::size_t>(options.max_stages, 1));
  if (options.coarser_variants)
    for (auto n = out.stages.size() / 2; n >= 1; n /= 2) {
      auto v = std::make_shared<PreparedTask>();
      v->dag = out.dag;
      v->groups = out.groups;
      v->timeslot_cycles = out.timeslot_cycles;
      v->total_macs = out.total_macs;
      v->lcs = out.lcs;
      finish_variant(*v, base, n);
      out.coarser.push_back(std::move(v));
    }
  return out;
}

std::shared_ptr<const PreparedTask> instantiate(const PreparedTask& task, std::size_t task_id, std::int64_t arrival) {
  auto out = std::make_shared<PreparedTask>(task);
  out->dag.task_id = task_id;
  out->dag.arrival = arrival;
  for (auto& v : out->coarser) v = instantiate(*v, task_id, arrival);
  return out;
}

std::int64_t min_pipeline_latency(const PreparedTask& task) {
  const auto n = task.stages.size();
  std::vector<std::int64_t> before(n, 0), after(n, 0);
  for (std::size_t s = 0; s < n; ++s)
    for (const auto& [a, b] : task.stage_edges)
      if (b == s) before[s] = std::max(before[s], before[a] + task.stages[a].slots);
  for (std::size_t s = n; s-- > 0;)
    for (const auto& [a, b] : task.stage_edges)
      if (a == s) after[s] = std::max(after[s], after[b] + task.stages[b].slots);
  std::int64_t best = 0;
  for (std::size_t s = 0; s < n; ++s)
    best = std::max(best, before[s] + task.groups * task.stages[s].slots + after[s]);
  return best;
}

void append_problem(ScheduleProblem& problem, const PreparedTask& task, std::size_t d, std::int64_t arrival,
                    std::int64_t deadline) {
  const auto I = static_cast<std::size_t>(task.groups);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t n = 0; n < task.stages.size(); ++n) problem.tiles.push_back({{d, i, n}, arrival, kWindowEnd});
  for (const auto& [p, c] : task.stage_edges) {
    const auto h = static_cast<std::size_t>(task.stages[c].halo);
    for (std::size_t i = 0; i < I; ++i) problem.deps.push_back({{d, std::min(i + h, I - 1), p}, {d, i, c}});
  }
  TaskTiming timing;
  timing.d = d;
  timing.arrival = arrival;
  timing.deadline = deadline;
  timing.final_tile = {d, I - 1, task.stages.size() - 1};
  timing.stage_edges = task.stage_edges;
  problem.tasks.push_back(std::move(timing));
}

// ---- slack, admission, scoring ------------------------------------------------

double latency_slack(std::int64_t t_ddl, std::int64_t t_now, std::int64_t tau, std::int64_t priority,
                     std::int64_t priority_sum) {
  if (tau <= 0) fail(ErrorCode::ZeroRemainingTime, "remaining execution time must be positive");
  if (priority_sum <= 0 || priority <= 0) fail(ErrorCode::InvariantError, "priorities must be positive");
  const double headroom = static_cast<double>(t_ddl - t_now) / static_cast<double>(tau);
  return headroom / (static_cast<double>(priority) / static_cast<double>(priority_sum));
}

std::size_t admit_next_victim(const std::vector<SlackEntry>& running, const std::vector<std::size_t>& admitted) {
  const SlackEntry* best = nullptr;
  for (const auto& e : running) {
    if (e.critical || std::find(admitted.begin(), admitted.end(), e.d) != admitted.end()) continue;
    if (!best || e.w > best->w || (e.w == best->w && e.d < best->d)) best = &e;
  }
  if (!best) fail(ErrorCode::NoVictimAvailable, "every remaining running task is critical or already admitted");
  return best->d;
}

std::int64_t preemption_overhead(std::int64_t weight_bits, std::int64_t reconfig_bw) {
  if (reconfig_bw <= 0) fail(ErrorCode::InvariantError, "reconfiguration bandwidth must be positive");
  return weight_bits <= 0 ? 0 : ceil_div(weight_bits, reconfig_bw);
}

double score_plan(const PreemptionPlan& plan) {
  double score = 0.0;
  for (const auto& s : plan.preempted) {
    if (s.critical_miss) return std::numeric_limits<double>::infinity();
    const double depth = static_cast<double>(std::max<std::size_t>(s.depth, 1));
    const double weight = 1.0 + (depth - static_cast<double>(s.stage)) / depth;
    score += static_cast<double>(s.t1 - s.t0) * weight;
  }
  return score;
}

namespace {

std::map<std::int64_t, std::int64_t> link_load_at(const CommSchedule& y, const PlatformConfig& platform,
                                                  std::int64_t t) {
  std::map<std::int64_t, std::int64_t> load;
  for (const auto& e : y.entries) {
    if (e.t > t || !platform.is_link(e.link)) continue;
    const auto profile = bandwidth_profile(std::max<std::int64_t>(e.units, 1), platform.link_bw);
    const auto off = t - e.t;
    if (off < static_cast<std::int64_t>(profile.size()))
      load[platform.link_index(e.link)] += profile[static_cast<std::size_t>(off)];
  }
  return load;
}

PreemptibleDag assemble(std::vector<PdVertex> vertices, const PlatformConfig& platform,
                        const std::map<std::int64_t, std::int64_t>& load) {
  PreemptibleDag pd;
  pd.vertices = std::move(vertices);
  std::map<std::int32_t, std::size_t> pos;
  for (std::size_t k = 0; k < pd.vertices.size(); ++k) pos[platform.index(pd.vertices[k].coord)] = k;
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < pd.vertices.size(); ++k) {
    const auto from = pd.vertices[k].coord;
    for (auto to : platform.neighbors(from)) {
      auto it = pos.find(platform.index(to));
      if (it == pos.end()) continue;
      const LinkId link{from, to};
      auto l = load.find(platform.link_index(link));
      if (l != load.end() && l->second >= platform.link_bw) continue;
      pd.links.push_back(link);
      coords.emplace_back(k, it->second);
    }
  }
  pd.adjacency = CsrMatrix::from_coords(pd.vertices.size(), pd.vertices.size(), std::move(coords));
  return pd;
}

}  // namespace

PreemptibleDag build_preemptible_dag(const ComputeSchedule& x, const CommSchedule& y, const PlatformConfig& platform,
                                     std::int64_t t_now, const std::vector<VictimAdmission>& victims) {
  const auto engines = static_cast<std::size_t>(platform.engine_count());
  std::vector<std::uint8_t> busy(engines, 0), other(engines, 0);
  std::vector<std::optional<std::pair<std::size_t, std::size_t>>> claim(engines);
  std::map<std::size_t, std::size_t> cutoff;
  for (const auto& v : victims) cutoff[v.d] = v.cutoff;
  for (const auto& e : x.entries) {
    if (e.t + e.len <= t_now || e.p < 0 || static_cast<std::size_t>(e.p) >= engines) continue;
    const auto p = static_cast<std::size_t>(e.p);
    busy[p] = 1;
    auto c = cutoff.find(e.d);
    if (c != cutoff.end() && e.n >= c->second) {
      if (!claim[p] || claim[p]->second < e.n) claim[p] = std::make_pair(e.d, e.n);
    } else {
      other[p] = 1;
    }
  }
  std::vector<PdVertex> free_v, victim_v;
  for (std::size_t p = 0; p < engines; ++p) {
    const auto coord = platform.coord(static_cast<std::int32_t>(p));
    if (!busy[p]) {
      free_v.push_back({coord, VertexTag::Free, 0, 0});
    } else if (!other[p] && claim[p]) {
      victim_v.push_back({coord, VertexTag::Victim, claim[p]->first, claim[p]->second});
    }
  }
  std::stable_sort(victim_v.begin(), victim_v.end(), [](const PdVertex& a, const PdVertex& b) {
    if (a.victim_stage != b.victim_stage) return a.victim_stage > b.victim_stage;
    return a.victim < b.victim;
  });
  free_v.insert(free_v.end(), victim_v.begin(), victim_v.end());
  return assemble(std::move(free_v), platform, link_load_at(y, platform, t_now));
}

namespace {

/// Keeps `limit` vertices reached breadth-first from the first victim vertex
/// (or the first vertex), preserving the original vertex order.
PreemptibleDag restrict_region(const PreemptibleDag& pd, std::size_t limit, const PlatformConfig& platform,
                               const CommSchedule& y, std::int64_t t) {
  if (pd.vertices.size() <= limit) return pd;
  std::size_t start = 0;
  for (std::size_t k = 0; k < pd.vertices.size(); ++k)
    if (pd.vertices[k].tag == VertexTag::Victim) {
      start = k;
      break;
    }
  const auto undirected = [&] {
    std::vector<std::pair<std::size_t, std::size_t>> c;
    for (std::size_t r = 0; r < pd.adjacency.n_rows; ++r)
      for (auto col : pd.adjacency.row(r)) {
        c.emplace_back(r, col);
        c.emplace_back(col, r);
      }
    return CsrMatrix::from_coords(pd.vertices.size(), pd.vertices.size(), std::move(c));
  }();
  std::vector<std::uint8_t> keep(pd.vertices.size(), 0);
  std::size_t kept = 0;
  std::deque<std::size_t> queue;
  for (std::size_t seed = start; kept < limit; seed = (seed + 1) % pd.vertices.size()) {
    if (keep[seed]) continue;
    keep[seed] = 1;
    ++kept;
    queue.push_back(seed);
    while (!queue.empty() && kept < limit) {
      const auto v = queue.front();
      queue.pop_front();
      for (auto w : undirected.row(v)) {
        if (keep[w] || kept >= limit) continue;
        keep[w] = 1;
        ++kept;
        queue.push_back(w);
      }
    }
  }
  std::vector<PdVertex> vertices;
  for (std::size_t k = 0; k < pd.vertices.size(); ++k)
    if (keep[k]) vertices.push_back(pd.vertices[k]);
  return assemble(std::move(vertices), platform, link_load_at(y, platform, t));
}

}  // namespace

// ---- scheduler ------------------------------------------------------------------

struct Scheduler::Reservations {
  std::vector<std::map<std::int64_t, std::int64_t>> engine;   // start -> end
  std::map<std::int64_t, std::map<std::int64_t, std::int64_t>> link;   // link -> slot -> load
  std::int64_t link_bw = 1;

  std::int64_t earliest(std::int32_t e, std::int64_t t, std::int64_t len) const {
    const auto& m = engine[static_cast<std::size_t>(e)];
    for (;;) {
      auto it = m.upper_bound(t);
      if (it != m.begin() && std::prev(it)->second > t) {
        t = std::prev(it)->second;
        continue;
      }
      if (it != m.end() && it->first < t + len) {
        t = it->second;
        continue;
      }
      return t;
    }
  }

  std::int64_t last_end(std::int32_t e) const {
    const auto& m = engine[static_cast<std::size_t>(e)];
    return m.empty() ? std::numeric_limits<std::int64_t>::min() : m.rbegin()->second;
  }

  void reserve(std::int32_t e, std::int64_t t, std::int64_t len) {
    if (len > 0) engine[static_cast<std::size_t>(e)][t] = t + len;
  }

  void release(std::int32_t e, std::int64_t t) { engine[static_cast<std::size_t>(e)].erase(t); }

  bool link_fits(std::int64_t l, std::int64_t t, const std::vector<std::int64_t>& profile) const {
    auto it = link.find(l);
    if (it == link.end()) return true;
    for (std::size_t k = 0; k < profile.size(); ++k) {
      auto s = it->second.find(t + static_cast<std::int64_t>(k));
      const auto used = s == it->second.end() ? 0 : s->second;
      if (used + profile[k] > link_bw) return false;
    }
    return true;
  }

  void add_link(std::int64_t l, std::int64_t t, const std::vector<std::int64_t>& profile, std::int64_t sign) {
    auto& m = link[l];
    for (std::size_t k = 0; k < profile.size(); ++k) {
      auto& v = m[t + static_cast<std::int64_t>(k)];
      v += sign * profile[k];
      if (v == 0) m.erase(t + static_cast<std::int64_t>(k));
    }
  }
};

struct Scheduler::Candidate {
  std::vector<std::int32_t> engine_of_stage;
  std::vector<ComputeEntry> tiles;
  std::vector<CommEntry> comms;
  std::vector<ReconfigWindow> reconf;
  std::vector<ComputeEntry> removed_tiles;
  std::vector<CommEntry> removed_comms;
  std::map<std::size_t, std::int64_t> victim_finish;
  std::int64_t spill_bits = 0;
  PreemptionPlan plan;
  std::vector<std::pair<std::size_t, std::size_t>> claimed;
  std::shared_ptr<Reservations> res;
};

Scheduler::Scheduler(PlatformConfig platform, SchedulerParams params)
    : platform_(std::move(platform)), params_(params), live_(std::make_shared<Reservations>()) {
  check_invariants(platform_);
  live_->engine.resize(static_cast<std::size_t>(platform_.engine_count()));
  live_->link_bw = platform_.link_bw;
}

void Scheduler::prune(std::int64_t t_now) {
  for (auto& m : live_->engine)
    for (auto it = m.begin(); it != m.end() && it->first < t_now;)
      it = it->second <= t_now ? m.erase(it) : std::next(it);
  for (auto& [l, m] : live_->link) m.erase(m.begin(), m.lower_bound(t_now));
}

std::vector<std::int64_t> Scheduler::release_points(std::int64_t after) const {
  std::set<std::int64_t> points;
  for (const auto& m : live_->engine)
    if (!m.empty() && std::prev(m.end())->second > after) points.insert(std::prev(m.end())->second);
  std::vector<std::int64_t> out(points.begin(), points.end());
  if (out.size() > params_.max_wait_events) out.resize(params_.max_wait_events);
  return out;
}

std::vector<SlackEntry> Scheduler::running_tasks(std::int64_t t_now, std::size_t exclude) const {
  std::vector<SlackEntry> out;
  std::int64_t psum = 0;
  for (const auto& [d, info] : state_.tasks)
    if (d != exclude && info.finish > t_now) psum += info.priority;
  for (const auto& [d, info] : state_.tasks) {
    if (d == exclude || info.finish <= t_now) continue;
    SlackEntry e;
    e.d = d;
    e.tau = info.finish - t_now;
    e.t_ddl = info.arrival + info.deadline;
    e.t_now = t_now;
    e.priority = info.priority;
    e.critical = info.critical;
    e.w = latency_slack(e.t_ddl, t_now, e.tau, info.priority, psum);
    out.push_back(e);
  }
  return out;
}

std::vector<std::vector<std::int32_t>> Scheduler::match_candidates(const PreparedTask& task,
                                                                   const PreemptibleDag& pd, std::uint64_t seed) {
  std::vector<std::vector<std::int32_t>> out;
  const auto& a = task.pattern;
  const auto& b = pd.adjacency;
  if (a.n_rows > b.n_rows) return out;
  McuParams p = params_.mcu;
  p.rng_seed = seed;
  const auto first = mcu_search(a, b, p);
  if (first.reward == 1) {
    out.push_back(first.best.image);
    for (std::size_t k = 1; k < params_.max_candidates; ++k) {
      p.rng_seed = mix64(seed + k);
      const auto r = mcu_search(a, b, p);
      if (r.reward == 1 && std::find(out.begin(), out.end(), r.best.image) == out.end())
        out.push_back(r.best.image);
      if (r.exhausted && r.reward != 1) break;
    }
    return out;
  }
  if (first.exhausted) return out;
  UllmannOptions uo;
  uo.connectivity_order = true;
  uo.node_budget = params_.ullmann_budget;
  const auto u = ullmann_search(a, b, uo);
  if (u.found && evaluate(u.witness, a, b) == 1) out.push_back(u.witness.image);
  return out;
}

namespace {

struct TileOrderKey {
  std::int64_t wave;
  std::size_t stage;
  std::size_t group;
  friend auto operator<=>(const TileOrderKey&, const TileOrderKey&) = default;
};

/// Placement order in which every tile follows its precedences.
std::vector<TileOrderKey> tile_order(const PreparedTask& task) {
  std::vector<std::int64_t> offset(task.stages.size(), 0);
  for (std::size_t s = 0; s < task.stages.size(); ++s)
    for (const auto& [p, c] : task.stage_edges)
      if (c == s) offset[s] = std::max(offset[s], offset[p] + task.stages[s].halo);
  std::vector<TileOrderKey> keys;
  for (std::size_t i = 0; i < static_cast<std::size_t>(task.groups); ++i)
    for (std::size_t s = 0; s < task.stages.size(); ++s)
      keys.push_back({static_cast<std::int64_t>(i) + offset[s], s, i});
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

std::optional<Scheduler::Candidate> Scheduler::evaluate_candidate(const PreparedTask& task, std::int64_t t_now,
                                                                  std::int64_t t0, const PreemptibleDag& pd,
                                                                  const std::vector<std::int32_t>& image,
                                                                  bool enforce_deadline, bool with_resume) {
  const auto d = task.dag.task_id;
  const auto I = static_cast<std::size_t>(task.groups);
  const auto S = task.stages.size();
  Candidate cand;
  cand.res = std::make_shared<Reservations>(*live_);
  auto& res = *cand.res;
  cand.engine_of_stage.resize(S);
  for (std::size_t s = 0; s < S; ++s)
    cand.engine_of_stage[s] = platform_.index(pd.vertices[static_cast<std::size_t>(image[s])].coord);

  // victim stages claimed by this mapping, and the earliest claimed stage per victim
  struct Claim {
    std::size_t victim, stage, task_stage;
    std::int32_t engine;
  };
  std::vector<Claim> claims;
  std::map<std::size_t, std::size_t> min_stage;
  for (std::size_t s = 0; s < S; ++s) {
    const auto& v = pd.vertices[static_cast<std::size_t>(image[s])];
    if (v.tag != VertexTag::Victim) continue;
    claims.push_back({v.victim, v.victim_stage, s, cand.engine_of_stage[s]});
    auto it = min_stage.find(v.victim);
    if (it == min_stage.end() || v.victim_stage < it->second) min_stage[v.victim] = v.victim_stage;
  }

  // lift the victims' affected future tiles and their transfers
  for (const auto& e : state_.x.entries) {
    auto it = min_stage.find(e.d);
    if (it == min_stage.end() || e.n < it->second || e.t < t_now) continue;
    cand.removed_tiles.push_back(e);
    res.release(e.p, e.t);
  }
  std::sort(cand.removed_tiles.begin(), cand.removed_tiles.end());
  auto is_removed = [&](std::size_t vd, std::size_t i, std::size_t n) {
    return std::binary_search(cand.removed_tiles.begin(), cand.removed_tiles.end(), TileKey{vd, i, n},
                              [](const auto& a, const auto& b) {
                                auto key = [](const auto& x) {
                                  if constexpr (std::is_same_v<std::decay_t<decltype(x)>, TileKey>) return x;
                                  else return x.key();
                                };
                                return key(a) < key(b);
                              });
  };
  for (const auto& c : state_.y.entries) {
    if (!min_stage.count(c.d)) continue;
    const auto& vt = state_.tasks.at(c.d);
    const auto producer = vt.prep->stage_edges[c.k].first;
    if (!is_removed(c.d, c.i, producer)) continue;
    cand.removed_comms.push_back(c);
    res.add_link(platform_.link_index(c.link), c.t,
                 bandwidth_profile(std::max<std::int64_t>(c.units, 1), platform_.link_bw), -1);
  }

  // engine readiness, including weight save / load on claimed engines
  std::vector<std::int64_t> ready(S, t0);
  std::vector<std::int64_t> claim_start(S, t0);
  std::int64_t overhead = 0;
  for (const auto& c : claims) {
    const auto& vt = state_.tasks.at(c.victim);
    const auto start = std::max(t0, res.last_end(c.engine));
    const auto save = preemption_overhead(vt.prep->stages[c.stage].weight_bits, platform_.reconfig_bw);
    const auto load = preemption_overhead(task.stages[c.task_stage].weight_bits, platform_.reconfig_bw);
    if (save > 0) {
      cand.reconf.push_back({c.victim, c.stage, start, save, c.engine, vt.prep->stages[c.stage].weight_bits});
      res.reserve(c.engine, start, save);
    }
    if (load > 0) {
      cand.reconf.push_back(
          {d, c.task_stage, start + save, load, c.engine, task.stages[c.task_stage].weight_bits});
      res.reserve(c.engine, start + save, load);
    }
    claim_start[c.task_stage] = start;
    ready[c.task_stage] = start + save + load;
    overhead += save + load;
  }

  // outgoing transfer shape per stage edge
  struct EdgeShape {
    std::vector<LinkId> route;
    std::vector<std::int64_t> profile;
  };
  auto shape_of = [&](const std::vector<Edge>& edges, const std::vector<StageInfo>& stages,
                      const std::vector<std::int32_t>& eng) {
    std::vector<EdgeShape> shapes;
    for (const auto& [p, c] : edges) {
      EdgeShape sh;
      sh.route = xy_route(platform_.coord(eng[p]), platform_.coord(eng[c]));
      if (!sh.route.empty()) sh.profile = bandwidth_profile(std::max<std::int64_t>(stages[p].out_units, 1), platform_.link_bw);
      shapes.push_back(std::move(sh));
    }
    return shapes;
  };

  // list scheduling of tiles on fixed engines; `start` holds already-placed
  // tiles and `sent` the slot each (group, edge) transfer leaves its producer
  auto place = [&](std::size_t td, const PreparedTask& pt, const std::vector<std::int32_t>& eng,
                   std::vector<std::vector<std::int64_t>>& start, std::vector<std::vector<std::int64_t>>& sent,
                   const std::vector<std::int64_t>& rdy, std::vector<ComputeEntry>& tiles_out,
                   std::vector<CommEntry>& comms_out) -> bool {
    const auto shapes = shape_of(pt.stage_edges, pt.stages, eng);
    const auto groups = static_cast<std::size_t>(pt.groups);
    for (const auto& key : tile_order(pt)) {
      const auto i = key.group, s = key.stage;
      if (start[i][s] >= 0) continue;
      std::int64_t t = rdy[s];
      for (std::size_t k = 0; k < pt.stage_edges.size(); ++k) {
        const auto [p, c] = pt.stage_edges[k];
        if (c != s) continue;
        const auto ip = std::min(i + static_cast<std::size_t>(pt.stages[s].halo), groups - 1);
        const auto tp = start[ip][p];
        if (tp < 0) return false;
        const auto tc = sent[ip][k] >= 0 ? sent[ip][k] : tp;
        t = std::max({t, tp + pt.stages[p].slots, tc + static_cast<std::int64_t>(shapes[k].profile.size())});
      }
      if (i > 0 && start[i - 1][s] >= 0) t = std::max(t, start[i - 1][s] + pt.stages[s].slots);
      const auto len = pt.stages[s].slots;
      t = res.earliest(eng[s], t, len);
      start[i][s] = t;
      res.reserve(eng[s], t, len);
      tiles_out.push_back({td, i, s, t, eng[s], len});
      for (std::size_t k = 0; k < pt.stage_edges.size(); ++k) {
        if (pt.stage_edges[k].first != s) continue;
        std::int64_t tc = t;
        const auto limit = t + kHorizon;
        for (;;) {
          bool fits = true;
          for (const auto& l : shapes[k].route)
            if (!res.link_fits(platform_.link_index(l), tc, shapes[k].profile)) {
              fits = false;
              break;
            }
          if (fits) break;
          if (++tc > limit) return false;
        }
        sent[i][k] = tc;
        for (const auto& l : shapes[k].route) {
          res.add_link(platform_.link_index(l), tc, shapes[k].profile, +1);
          comms_out.push_back({td, i, k, tc, l, std::max<std::int64_t>(pt.stages[s].out_units, 1)});
        }
      }
    }
    return true;
  };

  std::vector<std::vector<std::int64_t>> start(I, std::vector<std::int64_t>(S, -1));
  std::vector<std::vector<std::int64_t>> sent(I, std::vector<std::int64_t>(task.stage_edges.size(), -1));
  if (!place(d, task, cand.engine_of_stage, start, sent, ready, cand.tiles, cand.comms)) return std::nullopt;

  std::int64_t finish = t0;
  for (const auto& e : cand.tiles) finish = std::max(finish, e.t + e.len);
  const auto final_finish = start[I - 1][S - 1] + task.stages[S - 1].slots;
  const bool met = final_finish - task.dag.arrival < task.dag.deadline;
  if (enforce_deadline && !met) return std::nullopt;

  auto& plan = cand.plan;
  plan.d = d;
  for (auto e : cand.engine_of_stage) plan.mapping.push_back(platform_.coord(e));
  plan.start = cand.tiles.front().t;
  for (const auto& e : cand.tiles) plan.start = std::min(plan.start, e.t);
  plan.finish = finish;
  plan.deadline_met = met;
  std::map<std::int32_t, std::int64_t> last_use;
  for (const auto& e : cand.tiles) last_use[e.p] = std::max(last_use[e.p], e.t + e.len);
  for (const auto& c : claims) {
    const auto& vt = state_.tasks.at(c.victim);
    PreemptedSpan span;
    span.engine = c.engine;
    span.t0 = claim_start[c.task_stage];
    span.t1 = last_use[c.engine];
    span.victim = c.victim;
    span.stage = c.stage;
    span.depth = vt.prep->stages.size();
    span.critical_miss = vt.critical;
    plan.preempted.push_back(span);
    if (std::find(plan.victims.begin(), plan.victims.end(), c.victim) == plan.victims.end())
      plan.victims.push_back(c.victim);
    cand.claimed.emplace_back(c.victim, c.stage);
  }
  plan.overhead_slots = overhead;
  plan.score = score_plan(plan);
  if (!std::isfinite(plan.score)) return std::nullopt;
  if (!with_resume) return cand;

  // resume each victim on its own engines after the incoming task releases them
  for (const auto& [vd, from_stage] : min_stage) {
    const auto& vt = state_.tasks.at(vd);
    const auto& vp = *vt.prep;
    const auto VI = static_cast<std::size_t>(vp.groups);
    std::vector<std::vector<std::int64_t>> vstart(VI, std::vector<std::int64_t>(vp.stages.size(), -1));
    for (const auto& e : state_.x.entries)
      if (e.d == vd && !is_removed(vd, e.i, e.n)) vstart[e.i][e.n] = e.t;
    std::vector<std::int64_t> vready(vp.stages.size(), t_now);
    for (const auto& c : claims) {
      if (c.victim != vd) continue;
      const auto restore = preemption_overhead(vp.stages[c.stage].weight_bits, platform_.reconfig_bw);
      const auto at = std::max(res.last_end(c.engine), last_use[c.engine]);
      if (restore > 0) {
        cand.reconf.push_back({vd, c.stage, at, restore, c.engine, vp.stages[c.stage].weight_bits});
        res.reserve(c.engine, at, restore);
      }
      vready[c.stage] = at + restore;
      overhead += restore;
      std::int64_t in_units = 0;
      for (const auto& [p, q] : vp.stage_edges)
        if (q == c.stage) in_units += vp.stages[p].out_units;
      for (const auto& e : cand.removed_tiles)
        if (e.d == vd && e.n == c.stage) cand.spill_bits += 2 * in_units * platform_.element_bits;
    }
    std::vector<ComputeEntry> vt_tiles;
    std::vector<CommEntry> vt_comms;
    std::vector<std::vector<std::int64_t>> vsent(VI, std::vector<std::int64_t>(vp.stage_edges.size(), -1));
    for (const auto& c : state_.y.entries)
      if (c.d == vd && !is_removed(vd, c.i, vp.stage_edges[c.k].first)) vsent[c.i][c.k] = c.t;
    if (!place(vd, vp, vt.engine_of_stage, vstart, vsent, vready, vt_tiles, vt_comms)) return std::nullopt;
    cand.tiles.insert(cand.tiles.end(), vt_tiles.begin(), vt_tiles.end());
    cand.comms.insert(cand.comms.end(), vt_comms.begin(), vt_comms.end());
    std::int64_t vfinish = 0;
    for (std::size_t i = 0; i < VI; ++i)
      for (std::size_t n = 0; n < vp.stages.size(); ++n)
        vfinish = std::max(vfinish, vstart[i][n] + vp.stages[n].slots);
    cand.victim_finish[vd] = vfinish;
  }
  plan.overhead_slots = overhead;
  return cand;
}

std::optional<PreemptionPlan> Scheduler::try_plan(const PreparedTask& task, std::int64_t t_now, std::int64_t t0,
                                                  const std::vector<VictimAdmission>& victims,
                                                  bool enforce_deadline) {
  auto pd = build_preemptible_dag(state_.x, state_.y, platform_, t0, victims);
  pd = restrict_region(pd, params_.max_region, platform_, state_.y, t0);
  const auto seed = mix64(params_.mcu.rng_seed ^ mix64(task.dag.task_id) ^ mix64(++attempts_));
  const auto images = match_candidates(task, pd, seed);
  std::optional<std::size_t> best;
  std::vector<Candidate> scored;
  for (const auto& image : images) {
    auto c = evaluate_candidate(task, t_now, t0, pd, image, enforce_deadline, false);
    if (!c) continue;
    scored.push_back(std::move(*c));
    const auto& p = scored.back().plan;
    if (!best || p.score < scored[*best].plan.score ||
        (p.score == scored[*best].plan.score && p.finish < scored[*best].plan.finish))
      best = scored.size() - 1;
  }
  if (!best) return std::nullopt;
  std::vector<std::int32_t> image;
  for (auto e : scored[*best].engine_of_stage)
    for (std::size_t k = 0; k < pd.vertices.size(); ++k)
      if (platform_.index(pd.vertices[k].coord) == e) image.push_back(static_cast<std::int32_t>(k));
  auto full = evaluate_candidate(task, t_now, t0, pd, image, enforce_deadline, true);
  if (!full) return std::nullopt;
  pending_ = std::make_shared<Candidate>(std::move(*full));
  return pending_->plan;
}

void Scheduler::commit(const PreparedTask& task, Candidate cand, AuditRecord audit) {
  const auto d = task.dag.task_id;
  std::set<std::size_t> touched{d};
  for (auto v : cand.plan.victims) touched.insert(v);

  auto erase_all = [](auto& vec, auto removed) {
    std::sort(removed.begin(), removed.end());
    std::erase_if(vec, [&](const auto& e) { return std::binary_search(removed.begin(), removed.end(), e); });
  };
  erase_all(state_.x.entries, cand.removed_tiles);
  erase_all(state_.y.entries, cand.removed_comms);
  state_.x.entries.insert(state_.x.entries.end(), cand.tiles.begin(), cand.tiles.end());
  state_.y.entries.insert(state_.y.entries.end(), cand.comms.begin(), cand.comms.end());
  state_.reconfig.insert(state_.reconfig.end(), cand.reconf.begin(), cand.reconf.end());
  state_.spill_bits += cand.spill_bits;
  append_problem(state_.problem, task, d, task.dag.arrival, task.dag.deadline);

  TaskInfo info;
  info.d = d;
  info.prep = pending_task_;
  info.arrival = task.dag.arrival;
  info.deadline = task.dag.deadline;
  info.priority = task.dag.priority;
  info.critical = task.dag.critical;
  info.engine_of_stage = cand.engine_of_stage;
  info.finish = cand.plan.finish;
  state_.tasks[d] = std::move(info);
  for (const auto& [vd, f] : cand.victim_finish) state_.tasks[vd].finish = f;
  live_ = cand.res;

  // re-validate everything this commit touched, plus all live traffic
  ComputeSchedule x;
  CommSchedule y;
  ScheduleProblem sub;
  const auto t_now = audit.t_now;
  for (const auto& e : state_.x.entries)
    if (touched.count(e.d) || e.t + e.len > t_now) x.entries.push_back(e);
  for (const auto& e : state_.y.entries) {
    const auto len = static_cast<std::int64_t>(
        bandwidth_profile(std::max<std::int64_t>(e.units, 1), platform_.link_bw).size());
    if (touched.count(e.d) || e.t + len > t_now) y.entries.push_back(e);
  }
  for (const auto& t : state_.problem.tiles)
    if (touched.count(t.key.d)) sub.tiles.push_back(t);
  for (const auto& p : state_.problem.deps)
    if (touched.count(p.after.d)) sub.deps.push_back(p);
  for (const auto& t : state_.problem.tasks)
    if (touched.count(t.d)) sub.tasks.push_back(t);
  const auto report = validate_all(x, y, sub, platform_);

  for (const auto& v : report.violations) {
    const auto owner = state_.tasks.find(v.d);
    const bool critical = owner != state_.tasks.end() && owner->second.critical;
    const bool enforced = params_.policy == Policy::Preemptive && (v.d == d || critical);
    const bool waivable = v.kind == ViolationKind::Deadline && !enforced;
    if (waivable) {
      audit.deadline_misses.push_back(v.d);
    } else {
      audit.violations.push_back(v);
    }
  }
  audit.victims = cand.plan.victims;
  audit.claimed = cand.claimed;
  audit.score = cand.plan.score;
  audit.overhead_slots = cand.plan.overhead_slots;
  audit.start = cand.plan.start;
  audit.deadline_met = cand.plan.deadline_met;
  const bool broken = !audit.violations.empty();
  std::string first = broken ? audit.violations.front().detail : "";
  state_.audit.push_back(std::move(audit));
  if (broken)
    fail(ErrorCode::InvariantError, "committed schedule for task " + std::to_string(d) +
                                        " violates a constraint: " + first);
}

PreemptionPlan Scheduler::schedule_task(std::shared_ptr<const PreparedTask> task_ptr, std::int64_t t_now) {
  const auto& task = *task_ptr;
  const auto d = task.dag.task_id;
  if (state_.tasks.count(d)) fail(ErrorCode::InvariantError, "task id " + std::to_string(d) + " scheduled twice");
  if (t_now < last_now_) fail(ErrorCode::InvariantError, "scheduling time moved backwards");
  last_now_ = t_now;
  prune(t_now);

  std::vector<std::shared_ptr<const PreparedTask>> variants{task_ptr};
  variants.insert(variants.end(), task.coarser.begin(), task.coarser.end());
  auto attempt = [&](std::int64_t t0, const std::vector<VictimAdmission>& victims, bool enforce) {
    for (const auto& v : variants)
      if (try_plan(*v, t_now, t0, victims, enforce)) {
        pending_task_ = v;
        return true;
      }
    return false;
  };

  AuditRecord audit;
  audit.d = d;
  audit.t_now = t_now;
  auto finish = [&](const char* mode) {
    audit.mode = mode;
    auto cand = std::move(*pending_);
    pending_.reset();
    auto plan = cand.plan;
    commit(*pending_task_, std::move(cand), std::move(audit));
    return plan;
  };

  if (params_.policy == Policy::NonPreemptive) {
    if (attempt(t_now, {}, false)) return finish("free");
    for (auto t0 : release_points(t_now))
      if (attempt(t0, {}, false)) return finish("fcfs");
    fail(ErrorCode::Unschedulable, "task " + std::to_string(d) + " found no placement on free engines");
  }

  if (attempt(t_now, {}, true)) return finish("free");

  std::int64_t bound = min_pipeline_latency(task);
  for (const auto& v : task.coarser) bound = std::min(bound, min_pipeline_latency(*v));
  if (params_.allow_wait)
    for (auto t0 : release_points(t_now)) {
      if (t0 + bound - task.dag.arrival >= task.dag.deadline) break;
      if (attempt(t0, {}, true)) return finish("wait");
    }

  std::vector<std::size_t> admitted;
  std::vector<VictimAdmission> victims;
  for (;;) {
    std::size_t v = 0;
    try {
      v = admit_next_victim(running_tasks(t_now, d), admitted);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoVictimAvailable) throw;
      break;
    }
    admitted.push_back(v);
    const auto depth = state_.tasks.at(v).prep->stages.size();
    victims.push_back({v, depth});
    for (std::size_t cutoff = depth; cutoff-- > 0;) {
      victims.back().cutoff = cutoff;
      audit.tried.push_back(victims.back());
      if (attempt(t_now, victims, true)) return finish("preempt");
    }
  }
  fail(ErrorCode::Unschedulable, "task " + std::to_string(d) + " cannot meet deadline " +
                                     std::to_string(task.dag.deadline) + " even with every victim admitted");
}

}  // namespace isosched
