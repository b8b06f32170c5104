#pragma once

// Engine mesh and NoC link model.

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isosched/graph.hpp"
#include "isosched/tile_model.hpp"

namespace isosched {

struct EngineCoord {
  std::int32_t x = 0;
  std::int32_t y = 0;
  friend auto operator<=>(const EngineCoord&, const EngineCoord&) = default;
};

/// Directed mesh link between neighboring engines.
struct LinkId {
  EngineCoord from;
  EngineCoord to;
  friend auto operator<=>(const LinkId&, const LinkId&) = default;
};

std::string to_string(const EngineCoord& c);
std::string to_string(const LinkId& l);

struct PlatformConfig {
  std::string name = "mesh4";
  std::int32_t mesh_w = 4;
  std::int32_t mesh_h = 4;
  EngineSpec engine;
  std::int64_t link_bw = 64;            // data units per slot per link
  std::int64_t reconfig_bw = 512;       // weight-reload bits per slot
  std::int64_t engine_buffer = 1 << 16; // storage units per engine
  std::int64_t element_bits = 8;        // bits per data unit
  std::int64_t dram_bw_bits = 4096;     // DRAM bits per slot
  double hop_pj_per_bit = 0.64;
  double dram_pj_per_bit = 20.0;
  double mac_pj = 1.0;

  std::int32_t engine_count() const { return mesh_w * mesh_h; }
  /// Row-major engine index.
  std::int32_t index(EngineCoord c) const { return c.y * mesh_w + c.x; }
  EngineCoord coord(std::int32_t index) const { return {index % mesh_w, index / mesh_w}; }
  bool contains(EngineCoord c) const { return c.x >= 0 && c.y >= 0 && c.x < mesh_w && c.y < mesh_h; }
  bool is_link(const LinkId& l) const;
  /// Directed link count: 2 * (2*w*h - w - h).
  std::int64_t link_count() const;
  /// Dense index of a valid link in [0, link_count).
  std::int64_t link_index(const LinkId& l) const;
  LinkId link_at(std::int64_t index) const;
  std::vector<EngineCoord> neighbors(EngineCoord c) const;
};

void check_invariants(const PlatformConfig& p);

/// Named presets: "edge" and "cloud" (64 / 128 MACs, 128x128 engines,
/// 700 MHz) plus desk-scale "mesh2", "mesh4", "mesh8".
PlatformConfig platform_preset(const std::string& name);
std::vector<std::string> platform_preset_names();

std::int32_t manhattan_distance(EngineCoord a, EngineCoord b);

/// Dimension-ordered route: x first, then y.
std::vector<LinkId> xy_route(EngineCoord a, EngineCoord b);

/// Σ over edges of the Manhattan distance between endpoint placements.
std::int64_t dag_comm_cost(const std::map<std::size_t, EngineCoord>& placements, const TaskDag& dag);

}  // namespace isosched
