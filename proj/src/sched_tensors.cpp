#include "isosched/sched_tensors.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>

#include "isosched/error.hpp"

namespace isosched {

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::TileCompute: return "TileCompute";
    case ViolationKind::TileOrder: return "TileOrder";
    case ViolationKind::Deadline: return "Deadline";
    case ViolationKind::EngineCapacity: return "EngineCapacity";
    case ViolationKind::LinkBandwidth: return "LinkBandwidth";
  }
  return "?";
}

void sort_violations(std::vector<Violation>& v) {
  std::sort(v.begin(), v.end(), [](const Violation& a, const Violation& b) {
    return std::tie(a.kind, a.t, a.d, a.i, a.n_or_k, a.link, a.amount) <
           std::tie(b.kind, b.t, b.d, b.i, b.n_or_k, b.link, b.amount);
  });
}

namespace {

/// Entries sorted by tile key for range lookups.
struct EntryIndex {
  std::vector<ComputeEntry> sorted;

  explicit EntryIndex(const ComputeSchedule& x) : sorted(x.entries) {
    std::sort(sorted.begin(), sorted.end());
  }

  std::pair<std::size_t, std::size_t> range(const TileKey& key) const {
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), key,
                               [](const ComputeEntry& e, const TileKey& k) { return e.key() < k; });
    auto hi = std::upper_bound(lo, sorted.end(), key,
                               [](const TileKey& k, const ComputeEntry& e) { return k < e.key(); });
    return {static_cast<std::size_t>(lo - sorted.begin()), static_cast<std::size_t>(hi - sorted.begin())};
  }
};

std::map<TileKey, const TileSpec*> window_index(const std::vector<TileSpec>& tiles) {
  std::map<TileKey, const TileSpec*> m;
  for (const auto& t : tiles) m[t.key] = &t;
  return m;
}

bool in_window(const ComputeEntry& e, const TileSpec* spec) {
  return spec == nullptr || (e.t >= spec->window_start && e.t <= spec->window_end);
}

Violation tile_compute_violation(const TileSpec& tile, std::int64_t count, std::int64_t t) {
  Violation v;
  v.kind = ViolationKind::TileCompute;
  v.d = tile.key.d;
  v.i = tile.key.i;
  v.n_or_k = tile.key.n;
  v.t = t;
  v.amount = count;
  v.detail = "scheduled " + std::to_string(count) + " times within its window";
  return v;
}

std::vector<Violation> tile_compute_impl(const EntryIndex& idx, const std::vector<TileSpec>& tiles, bool parallel) {
  std::vector<std::vector<Violation>> per_tile(tiles.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(tiles.size()); ++k) {
    const auto& tile = tiles[static_cast<std::size_t>(k)];
    auto [lo, hi] = idx.range(tile.key);
    std::int64_t count = 0;
    std::int64_t first_t = tile.window_start;
    bool seen = false;
    for (auto e = lo; e < hi; ++e) {
      if (!seen) {
        first_t = idx.sorted[e].t;
        seen = true;
      }
      if (in_window(idx.sorted[e], &tile)) ++count;
    }
    if (count != 1) per_tile[static_cast<std::size_t>(k)].push_back(tile_compute_violation(tile, count, first_t));
  }
  std::vector<Violation> out;
  for (auto& v : per_tile) out.insert(out.end(), v.begin(), v.end());
  return out;
}

struct WindowSums {
  std::int64_t count = 0;
  std::int64_t t_sum = 0;
  std::int64_t finish_sum = 0;
  std::int64_t len = 0;
};

WindowSums sums_for(const EntryIndex& idx, const TileKey& key, const TileSpec* spec) {
  WindowSums s;
  auto [lo, hi] = idx.range(key);
  for (auto e = lo; e < hi; ++e) {
    const auto& entry = idx.sorted[e];
    if (!in_window(entry, spec)) continue;
    if (s.count == 0) s.len = entry.len;
    ++s.count;
    s.t_sum += entry.t;
    s.finish_sum += entry.t + entry.len;
  }
  return s;
}

std::vector<Violation> tile_order_impl(const EntryIndex& idx, const std::vector<TilePrecedence>& deps,
                                       const std::vector<TileSpec>& tiles, bool parallel) {
  const auto windows = window_index(tiles);
  auto spec_of = [&](const TileKey& k) -> const TileSpec* {
    auto it = windows.find(k);
    return it == windows.end() ? nullptr : it->second;
  };
  std::vector<std::vector<Violation>> per_dep(deps.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(deps.size()); ++k) {
    const auto& dep = deps[static_cast<std::size_t>(k)];
    const auto a = sums_for(idx, dep.before, spec_of(dep.before));
    const auto b = sums_for(idx, dep.after, spec_of(dep.after));
    if (a.count == 0 || b.count == 0) continue;
    if (a.t_sum - b.t_sum > -a.len) {
      Violation v;
      v.kind = ViolationKind::TileOrder;
      v.d = dep.after.d;
      v.i = dep.after.i;
      v.n_or_k = dep.after.n;
      v.t = b.t_sum;
      v.amount = a.t_sum + a.len;
      v.detail = "starts before predecessor (" + std::to_string(dep.before.i) + "," +
                 std::to_string(dep.before.n) + ") finishes";
      per_dep[static_cast<std::size_t>(k)].push_back(std::move(v));
    }
  }
  std::vector<Violation> out;
  for (auto& v : per_dep) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<Violation> deadline_impl(const EntryIndex& idx, const TaskTiming& task) {
  const auto s = sums_for(idx, task.final_tile, nullptr);
  if (s.count == 0)
    throw Error(ErrorCode::FinalTileUnscheduled, "sched-tensors",
                "final tile of task " + std::to_string(task.d) + " is unscheduled");
  if (s.finish_sum - task.arrival < task.deadline) return {};
  Violation v;
  v.kind = ViolationKind::Deadline;
  v.d = task.d;
  v.i = task.final_tile.i;
  v.n_or_k = task.final_tile.n;
  v.t = s.finish_sum;
  v.amount = s.finish_sum - task.arrival;
  v.detail = "latency " + std::to_string(v.amount) + " >= deadline " + std::to_string(task.deadline);
  return {v};
}

std::vector<Violation> capacity_impl(const ComputeSchedule& x, std::int64_t engines, bool parallel) {
  if (x.entries.empty()) return {};
  std::int64_t t_min = x.entries.front().t, t_max = t_min;
  for (const auto& e : x.entries) {
    t_min = std::min(t_min, e.t);
    t_max = std::max(t_max, e.t + std::max<std::int64_t>(e.len, 0));
  }
  const auto span = static_cast<std::size_t>(t_max - t_min + 1);
  std::vector<std::int64_t> diff(span + 1, 0);
  if (parallel) {
#pragma omp parallel
    {
      std::vector<std::int64_t> local(span + 1, 0);
#pragma omp for schedule(static) nowait
      for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(x.entries.size()); ++k) {
        const auto& e = x.entries[static_cast<std::size_t>(k)];
        if (e.len <= 0) continue;
        ++local[static_cast<std::size_t>(e.t - t_min)];
        --local[static_cast<std::size_t>(e.t + e.len - t_min)];
      }
#pragma omp critical
      for (std::size_t s = 0; s <= span; ++s) diff[s] += local[s];
    }
  } else {
    for (const auto& e : x.entries) {
      if (e.len <= 0) continue;
      ++diff[static_cast<std::size_t>(e.t - t_min)];
      --diff[static_cast<std::size_t>(e.t + e.len - t_min)];
    }
  }
  std::vector<Violation> out;
  std::int64_t live = 0;
  for (std::size_t s = 0; s < span; ++s) {
    live += diff[s];
    if (live > engines) {
      Violation v;
      v.kind = ViolationKind::EngineCapacity;
      v.t = t_min + static_cast<std::int64_t>(s);
      v.amount = live;
      v.detail = std::to_string(live) + " tiles occupy " + std::to_string(engines) + " engines";
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<Violation> link_impl(const CommSchedule& y, const PlatformConfig& platform, bool parallel) {
  std::vector<Violation> out;
  std::vector<std::pair<std::int64_t, const CommEntry*>> keyed;
  keyed.reserve(y.entries.size());
  for (const auto& e : y.entries) {
    if (!platform.is_link(e.link)) {
      Violation v;
      v.kind = ViolationKind::LinkBandwidth;
      v.d = e.d;
      v.i = e.i;
      v.n_or_k = e.k;
      v.t = e.t;
      v.amount = e.units;
      v.detail = "route uses invalid link " + to_string(e.link);
      out.push_back(std::move(v));
      continue;
    }
    keyed.emplace_back(platform.link_index(e.link), &e);
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : *a.second < *b.second;
  });
  std::vector<std::size_t> starts;
  for (std::size_t k = 0; k < keyed.size(); ++k)
    if (k == 0 || keyed[k].first != keyed[k - 1].first) starts.push_back(k);
  starts.push_back(keyed.size());

  std::vector<std::vector<Violation>> per_link(starts.size() - 1);
  const auto groups = static_cast<std::ptrdiff_t>(starts.size()) - 1;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t g = 0; g < groups; ++g) {
    const auto lo = starts[static_cast<std::size_t>(g)], hi = starts[static_cast<std::size_t>(g) + 1];
    std::vector<std::pair<std::int64_t, std::int64_t>> load;
    for (auto k = lo; k < hi; ++k) {
      const auto& e = *keyed[k].second;
      const auto profile = bandwidth_profile(std::max<std::int64_t>(e.units, 1), platform.link_bw);
      for (std::size_t off = 0; off < profile.size(); ++off)
        load.emplace_back(e.t + static_cast<std::int64_t>(off), profile[off]);
    }
    std::sort(load.begin(), load.end());
    for (std::size_t a = 0; a < load.size();) {
      std::size_t b = a;
      std::int64_t sum = 0;
      while (b < load.size() && load[b].first == load[a].first) sum += load[b++].second;
      if (sum > platform.link_bw) {
        Violation v;
        v.kind = ViolationKind::LinkBandwidth;
        v.t = load[a].first;
        v.link = keyed[lo].first;
        v.amount = sum;
        v.detail = "link " + to_string(keyed[lo].second->link) + " carries " + std::to_string(sum) + " > " +
                   std::to_string(platform.link_bw);
        per_link[static_cast<std::size_t>(g)].push_back(std::move(v));
      }
      a = b;
    }
  }
  for (auto& v : per_link) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::map<std::size_t, std::int64_t> comm_costs(const EntryIndex& idx, const ScheduleProblem& problem,
                                               const PlatformConfig& platform) {
  std::map<std::size_t, std::int64_t> out;
  for (const auto& task : problem.tasks) {
    std::map<std::size_t, EngineCoord> placement;
    for (const auto& e : idx.sorted)
      if (e.d == task.d && !placement.contains(e.n)) placement[e.n] = platform.coord(e.p);
    std::int64_t cost = 0;
    for (const auto& [a, b] : task.stage_edges) {
      auto pa = placement.find(a), pb = placement.find(b);
      if (pa != placement.end() && pb != placement.end()) cost += manhattan_distance(pa->second, pb->second);
    }
    out[task.d] = cost;
  }
  return out;
}

ValidationReport validate_impl(const ComputeSchedule& x, const CommSchedule& y, const ScheduleProblem& problem,
                               const PlatformConfig& platform, bool parallel) {
  const EntryIndex idx(x);
  std::vector<Violation> compute, order, deadline, capacity, link;
  auto run_deadlines = [&] {
    for (const auto& task : problem.tasks) {
      // a missing final tile is already a TileCompute violation
      if (sums_for(idx, task.final_tile, nullptr).count == 0) continue;
      auto v = deadline_impl(idx, task);
      deadline.insert(deadline.end(), v.begin(), v.end());
    }
  };
  if (parallel) {
#pragma omp parallel sections
    {
#pragma omp section
      compute = tile_compute_impl(idx, problem.tiles, true);
#pragma omp section
      order = tile_order_impl(idx, problem.deps, problem.tiles, true);
#pragma omp section
      run_deadlines();
#pragma omp section
      capacity = capacity_impl(x, platform.engine_count(), true);
#pragma omp section
      link = link_impl(y, platform, true);
    }
  } else {
    compute = tile_compute_impl(idx, problem.tiles, false);
    order = tile_order_impl(idx, problem.deps, problem.tiles, false);
    run_deadlines();
    capacity = capacity_impl(x, platform.engine_count(), false);
    link = link_impl(y, platform, false);
  }
  ValidationReport rep;
  for (auto* part : {&compute, &order, &deadline, &capacity, &link})
    rep.violations.insert(rep.violations.end(), part->begin(), part->end());
  sort_violations(rep.violations);
  rep.comm_cost = comm_costs(idx, problem, platform);
  return rep;
}

}  // namespace

std::vector<Violation> check_tile_compute(const ComputeSchedule& x, const std::vector<TileSpec>& tiles) {
  auto v = tile_compute_impl(EntryIndex(x), tiles, false);
  sort_violations(v);
  return v;
}

std::vector<Violation> check_tile_order(const ComputeSchedule& x, const std::vector<TilePrecedence>& deps,
                                        const std::vector<TileSpec>& tiles) {
  auto v = tile_order_impl(EntryIndex(x), deps, tiles, false);
  sort_violations(v);
  return v;
}

std::vector<Violation> check_deadline(const ComputeSchedule& x, const TaskTiming& task) {
  return deadline_impl(EntryIndex(x), task);
}

std::vector<Violation> check_engine_capacity(const ComputeSchedule& x, std::int64_t engines) {
  return capacity_impl(x, engines, false);
}

std::vector<std::int64_t> bandwidth_profile(std::int64_t bw, std::int64_t link_bw) {
  const auto full = (bw - 1) / link_bw;
  std::vector<std::int64_t> profile(static_cast<std::size_t>(full), link_bw);
  profile.push_back(bw - full * link_bw);
  return profile;
}

std::vector<Violation> check_link_bandwidth(const CommSchedule& y, const PlatformConfig& platform) {
  auto v = link_impl(y, platform, false);
  sort_violations(v);
  return v;
}

ValidationReport validate_all(const ComputeSchedule& x, const CommSchedule& y, const ScheduleProblem& problem,
                              const PlatformConfig& platform) {
  return validate_impl(x, y, problem, platform, true);
}

ValidationReport validate_all_serial(const ComputeSchedule& x, const CommSchedule& y, const ScheduleProblem& problem,
                                     const PlatformConfig& platform) {
  return validate_impl(x, y, problem, platform, false);
}

// ---- schedule table ----------------------------------------------------------

ScheduleTable make_schedule_table(const ComputeSchedule& x, const CommSchedule& y,
                                  const std::vector<ReconfigWindow>& reconfig, const PlatformConfig& platform) {
  ScheduleTable table;
  for (const auto& e : x.entries) table.engine_streams[e.p].push_back(e);
  for (auto& [p, stream] : table.engine_streams)
    std::sort(stream.begin(), stream.end(), [](const ComputeEntry& a, const ComputeEntry& b) {
      return std::tie(a.t, a.d, a.i, a.n) < std::tie(b.t, b.d, b.i, b.n);
    });
  for (const auto& e : y.entries) table.link_streams[platform.link_index(e.link)].push_back(e);
  for (auto& [l, stream] : table.link_streams)
    std::sort(stream.begin(), stream.end(), [](const CommEntry& a, const CommEntry& b) {
      return std::tie(a.t, a.d, a.i, a.k, a.units) < std::tie(b.t, b.d, b.i, b.k, b.units);
    });
  table.reconfig = reconfig;
  std::sort(table.reconfig.begin(), table.reconfig.end(), [](const ReconfigWindow& a, const ReconfigWindow& b) {
    return std::tie(a.p, a.t, a.d, a.n) < std::tie(b.p, b.t, b.d, b.n);
  });
  return table;
}

void write_schedule_table(std::ostream& os, const ScheduleTable& table) {
  for (const auto& [p, stream] : table.engine_streams)
    for (const auto& e : stream)
      os << "X " << e.d << ' ' << e.i << ' ' << e.n << ' ' << e.t << ' ' << e.p << ' ' << e.len << '\n';
  for (const auto& [l, stream] : table.link_streams)
    for (const auto& e : stream)
      os << "Y " << e.d << ' ' << e.i << ' ' << e.k << ' ' << e.t << ' ' << to_string(e.link) << ' ' << e.units
         << '\n';
  for (const auto& r : table.reconfig)
    os << "R " << r.d << " 0 " << r.n << ' ' << r.t << ' ' << r.p << ' ' << r.len << ' ' << r.bits << '\n';
}

namespace {

EngineCoord parse_coord(const std::string& s) {
  EngineCoord c;
  char comma = 0;
  std::istringstream in(s);
  if (!(in >> c.x >> comma >> c.y) || comma != ',')
    throw Error(ErrorCode::ParseError, "sched-tensors", "bad engine coordinate '" + s + "'");
  return c;
}

}  // namespace

ScheduleTable read_schedule_table(std::istream& is, const PlatformConfig& platform) {
  ScheduleTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string kind;
    in >> kind;
    auto fail = [&] {
      throw Error(ErrorCode::ParseError, "sched-tensors", "schedule table line " + std::to_string(lineno));
    };
    if (kind == "X") {
      ComputeEntry e;
      if (!(in >> e.d >> e.i >> e.n >> e.t >> e.p >> e.len)) fail();
      table.engine_streams[e.p].push_back(e);
    } else if (kind == "Y") {
      CommEntry e;
      std::string link;
      if (!(in >> e.d >> e.i >> e.k >> e.t >> link >> e.units)) fail();
      const auto gt = link.find('>');
      if (gt == std::string::npos) fail();
      e.link = {parse_coord(link.substr(0, gt)), parse_coord(link.substr(gt + 1))};
      if (!platform.is_link(e.link)) fail();
      table.link_streams[platform.link_index(e.link)].push_back(e);
    } else if (kind == "R") {
      ReconfigWindow r;
      std::size_t zero = 0;
      if (!(in >> r.d >> zero >> r.n >> r.t >> r.p >> r.len >> r.bits)) fail();
      table.reconfig.push_back(r);
    } else {
      fail();
    }
  }
  return table;
}

}  // namespace isosched
