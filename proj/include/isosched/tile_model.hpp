#pragma once

// Per-tile latency cost model and derivation of the global timeslot.

#include <cstdint>
#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "isosched/graph.hpp"

namespace isosched {

struct EngineSpec {
  std::int64_t pe_count = 64;
  double clock_hz = 700e6;
};

struct TileCost {
  std::size_t layer_id = 0;
  std::int64_t cycles = 1;      // Eq. 1 value incl. fill
  std::int64_t t_slots = 1;     // ceil(cycles / base timeslot)
  std::int64_t fill = 0;
  std::int64_t tiles_total = 1;
};

std::int64_t ceil_div(std::int64_t a, std::int64_t b);

std::int64_t default_fill_cycles(const LayerNode& layer);

/// MACs of one tile: one output row (conv) or one query row across all heads (MatMul).
std::int64_t tile_macs(const LayerNode& layer);

/// ceil(tile MACs / PEs) + fill. Honors `latency_override` when set.
std::int64_t tile_latency(const LayerNode& layer, const EngineSpec& engine);

std::int64_t tiles_of_layer(const LayerNode& layer);

/// Minimum tile latency (cycles) over every compute-bearing layer of the workload.
std::int64_t base_timeslot(const WorkloadSet& workload, const EngineSpec& engine);

/// The DAG restricted to compute-bearing layers. Elementwise layers are fused
/// into their producers; an edge u->v exists when v is reachable from u
/// through elementwise layers only.
struct FusedDag {
  std::vector<std::size_t> order;   // compute-bearing layer ids, topological
  std::vector<Edge> edges;          // between layer ids
};

FusedDag fuse_elementwise(const TaskDag& dag);

/// Per-layer tile costs (compute-bearing layers in topological order) at the
/// given timeslot granularity.
std::vector<TileCost> tile_costs(const TaskDag& dag, const EngineSpec& engine, std::int64_t timeslot_cycles);

/// Per-(task, layer) latency overrides: one "task_id layer_id cycles" triple
/// per line, '#' starts a comment.
using LatencyTable = std::map<std::pair<std::size_t, std::size_t>, std::int64_t>;

LatencyTable load_latency_table(const std::filesystem::path& path);
void apply_latency_table(WorkloadSet& workload, const LatencyTable& table);

}  // namespace isosched
