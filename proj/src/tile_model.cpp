#include "isosched/tile_model.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "isosched/error.hpp"

namespace isosched {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

namespace {

void require_compute(const LayerNode& layer) {
  if (!layer.compute_bearing())
    throw Error(ErrorCode::NotComputeBearing, "tile-model",
                "layer " + std::to_string(layer.id) + " is elementwise and carries no tile cost");
}

}  // namespace

std::int64_t default_fill_cycles(const LayerNode& layer) {
  if (layer.conv) return std::min<std::int64_t>(layer.conv->kernel_h * layer.conv->kernel_w, 8);
  if (layer.attn) return std::min<std::int64_t>(layer.attn->head_dim, 8);
  return 0;
}

std::int64_t tile_macs(const LayerNode& layer) {
  require_compute(layer);
  if (layer.kind == LayerKind::Conv) {
    const auto& c = *layer.conv;
    return c.out_w * c.out_c * c.kernel_h * c.kernel_w * c.in_c;
  }
  const auto& a = *layer.attn;
  return a.keys * a.heads * a.head_dim;
}

std::int64_t tile_latency(const LayerNode& layer, const EngineSpec& engine) {
  require_compute(layer);
  if (layer.latency_override) return *layer.latency_override;
  const auto fill = layer.fill_cycles.value_or(default_fill_cycles(layer));
  return ceil_div(tile_macs(layer), engine.pe_count) + fill;
}

std::int64_t tiles_of_layer(const LayerNode& layer) {
  require_compute(layer);
  if (layer.kind == LayerKind::Conv) return std::max<std::int64_t>(1, layer.conv->out_h);
  return std::max<std::int64_t>(1, layer.attn->queries);
}

std::int64_t base_timeslot(const WorkloadSet& workload, const EngineSpec& engine) {
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (const auto& task : workload.tasks)
    for (const auto& layer : task.nodes)
      if (layer.compute_bearing()) best = std::min(best, tile_latency(layer, engine));
  if (best == std::numeric_limits<std::int64_t>::max())
    throw Error(ErrorCode::EmptyWorkload, "tile-model", "workload has no compute-bearing layer");
  return best;
}

FusedDag fuse_elementwise(const TaskDag& dag) {
  const auto topo = topo_sort(dag);
  const std::size_t n = dag.nodes.size();
  std::vector<std::vector<std::size_t>> succ(n);
  for (const auto& [a, b] : dag.edges) succ[a].push_back(b);

  FusedDag fused;
  for (auto v : topo)
    if (dag.nodes[v].compute_bearing()) fused.order.push_back(v);

  for (auto u : fused.order) {
    std::vector<std::size_t> stack(succ[u].begin(), succ[u].end());
    std::vector<std::uint8_t> seen(n, 0);
    std::vector<std::size_t> targets;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      if (seen[v]) continue;
      seen[v] = 1;
      if (dag.nodes[v].compute_bearing()) {
        targets.push_back(v);
      } else {
        stack.insert(stack.end(), succ[v].begin(), succ[v].end());
      }
    }
    std::sort(targets.begin(), targets.end());
    for (auto v : targets) fused.edges.emplace_back(u, v);
  }
  return fused;
}

std::vector<TileCost> tile_costs(const TaskDag& dag, const EngineSpec& engine, std::int64_t timeslot_cycles) {
  std::vector<TileCost> out;
  for (auto id : fuse_elementwise(dag).order) {
    const auto& layer = dag.nodes[id];
    TileCost c;
    c.layer_id = id;
    c.cycles = tile_latency(layer, engine);
    c.fill = layer.latency_override ? 0 : layer.fill_cycles.value_or(default_fill_cycles(layer));
    c.t_slots = std::max<std::int64_t>(1, ceil_div(c.cycles, timeslot_cycles));
    c.tiles_total = tiles_of_layer(layer);
    out.push_back(c);
  }
  return out;
}

LatencyTable load_latency_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "tile-model", "cannot open latency table " + path.string());
  LatencyTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::size_t task = 0, layer = 0;
    std::int64_t cycles = 0;
    if (!(fields >> task)) continue;
    if (!(fields >> layer >> cycles) || cycles < 1)
      throw Error(ErrorCode::ParseError, "tile-model",
                  path.string() + ":" + std::to_string(lineno) + ": expected 'task layer cycles' with cycles >= 1");
    table[{task, layer}] = cycles;
  }
  return table;
}

void apply_latency_table(WorkloadSet& workload, const LatencyTable& table) {
  for (auto& task : workload.tasks)
    for (auto& layer : task.nodes)
      if (auto it = table.find({task.task_id, layer.id}); it != table.end()) layer.latency_override = it->second;
}

}  // namespace isosched
