#pragma once

// Workload text format and seeded synthetic workload generators.
//
//   workload Simple|Middle|Complex
//   task <id> deadline=<slots> [name=..] [arrival=..] [priority=..] [critical=0|1] [class=vision|translation]
//   layer <id> conv out_w=.. out_h=.. out_c=.. kh=.. kw=.. in_c=.. [weight_bits=..] [fill=..] [latency=..]
//   layer <id> matmul keys=.. heads=.. head_dim=.. queries=.. [weight_bits=..] [fill=..] [latency=..]
//   layer <id> elementwise
//   edge <from> <to>
//   end
//
// '#' starts a comment. Layers and edges belong to the most recent task.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "isosched/graph.hpp"
#include "isosched/platform.hpp"
#include "isosched/tile_model.hpp"

namespace isosched {

/// Throws ParseError ("line N, field F: ...") or InvariantError (cycles,
/// duplicate ids, out-of-range dims).
WorkloadSet parse_workload(std::istream& is);
WorkloadSet load_workload(const std::filesystem::path& path);
void write_workload(std::ostream& os, const WorkloadSet& workload);

/// `key value` lines over a named preset (`preset mesh4` first, default
/// mesh4): mesh_w, mesh_h, pe_count, clock_hz, link_bw, reconfig_bw,
/// engine_buffer, element_bits, dram_bw_bits, hop_pj_per_bit,
/// dram_pj_per_bit, mac_pj.
PlatformConfig parse_platform(std::istream& is);
/// A preset name, or a path to a platform file.
PlatformConfig load_platform(const std::string& preset_or_path);

/// Simple when every task has at most 40 nodes, Complex from 500 nodes and
/// 1000 edges, Middle otherwise.
ComplexityClass classify(const WorkloadSet& workload);

struct SyntheticSpec {
  ComplexityClass cls = ComplexityClass::Simple;
  std::size_t tasks = 3;
  std::size_t min_nodes = 0;              // 0 selects the class default
  std::size_t max_nodes = 0;
  double skip_probability = 0.15;         // residual edges in CNN classes
  std::int64_t min_priority = 1;
  std::int64_t max_priority = 3;
  double min_deadline_factor = 0.8;       // deadline = factor * serial slots
  double max_deadline_factor = 1.6;
  double critical_fraction = 0.25;
  std::int64_t arrival_spacing = 0;       // task k arrives at k * spacing
  EngineSpec engine;
};

/// Seeded, acyclic, connected DAGs. Simple: conv chains of tens of nodes;
/// Middle: residual CNNs; Complex: repeated transformer blocks with at least
/// 500 nodes and 1000 edges per task.
WorkloadSet generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace isosched
