#include "isosched/platform.hpp"

#include <cstdlib>

#include "isosched/error.hpp"

namespace isosched {

std::string to_string(const EngineCoord& c) { return std::to_string(c.x) + "," + std::to_string(c.y); }

std::string to_string(const LinkId& l) { return to_string(l.from) + ">" + to_string(l.to); }

bool PlatformConfig::is_link(const LinkId& l) const {
  return contains(l.from) && contains(l.to) && manhattan_distance(l.from, l.to) == 1;
}

std::int64_t PlatformConfig::link_count() const {
  const std::int64_t w = mesh_w, h = mesh_h;
  return 2 * (2 * w * h - w - h);
}

// Horizontal links first (east then west per row slot), then vertical.
std::int64_t PlatformConfig::link_index(const LinkId& l) const {
  const std::int64_t w = mesh_w, h = mesh_h;
  const std::int64_t horizontal = 2 * (w - 1) * h;
  if (l.from.y == l.to.y) {
    const std::int64_t x = std::min(l.from.x, l.to.x);
    const std::int64_t slot = l.from.y * (w - 1) + x;
    return 2 * slot + (l.to.x > l.from.x ? 0 : 1);
  }
  const std::int64_t y = std::min(l.from.y, l.to.y);
  const std::int64_t slot = y * w + l.from.x;
  return horizontal + 2 * slot + (l.to.y > l.from.y ? 0 : 1);
}

LinkId PlatformConfig::link_at(std::int64_t index) const {
  const std::int64_t w = mesh_w, h = mesh_h;
  const std::int64_t horizontal = 2 * (w - 1) * h;
  if (index < horizontal) {
    const auto slot = index / 2;
    const EngineCoord a{static_cast<std::int32_t>(slot % (w - 1)), static_cast<std::int32_t>(slot / (w - 1))};
    const EngineCoord b{a.x + 1, a.y};
    return index % 2 == 0 ? LinkId{a, b} : LinkId{b, a};
  }
  index -= horizontal;
  const auto slot = index / 2;
  const EngineCoord a{static_cast<std::int32_t>(slot % w), static_cast<std::int32_t>(slot / w)};
  const EngineCoord b{a.x, a.y + 1};
  return index % 2 == 0 ? LinkId{a, b} : LinkId{b, a};
}

std::vector<EngineCoord> PlatformConfig::neighbors(EngineCoord c) const {
  std::vector<EngineCoord> out;
  for (auto n : {EngineCoord{c.x + 1, c.y}, EngineCoord{c.x - 1, c.y}, EngineCoord{c.x, c.y + 1},
                 EngineCoord{c.x, c.y - 1}})
    if (contains(n)) out.push_back(n);
  return out;
}

void check_invariants(const PlatformConfig& p) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::InvariantError, "platform", m); };
  if (p.mesh_w < 1 || p.mesh_h < 1) fail("mesh dimensions must be >= 1");
  if (p.link_bw < 1) fail("link bandwidth must be >= 1");
  if (p.reconfig_bw < 1) fail("reconfiguration bandwidth must be >= 1");
  if (p.engine.pe_count < 1) fail("engine PE count must be >= 1");
  if (p.engine.clock_hz <= 0) fail("clock must be positive");
  if (p.element_bits < 1 || p.dram_bw_bits < 1) fail("element bits and DRAM bandwidth must be >= 1");
  if (p.hop_pj_per_bit < 0 || p.dram_pj_per_bit < 0 || p.mac_pj < 0) fail("energy constants must be >= 0");
}

PlatformConfig platform_preset(const std::string& name) {
  PlatformConfig p;
  p.name = name;
  if (name == "edge" || name == "cloud") {
    p.mesh_w = p.mesh_h = 128;
    p.engine.pe_count = name == "edge" ? 64 : 128;
  } else if (name == "mesh2") {
    p.mesh_w = p.mesh_h = 2;
  } else if (name == "mesh4") {
    p.mesh_w = p.mesh_h = 4;
  } else if (name == "mesh8") {
    p.mesh_w = p.mesh_h = 8;
  } else {
    throw Error(ErrorCode::ParseError, "platform", "unknown platform preset '" + name + "'");
  }
  p.engine.clock_hz = 700e6;
  return p;
}

std::vector<std::string> platform_preset_names() { return {"edge", "cloud", "mesh2", "mesh4", "mesh8"}; }

std::int32_t manhattan_distance(EngineCoord a, EngineCoord b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

std::vector<LinkId> xy_route(EngineCoord a, EngineCoord b) {
  std::vector<LinkId> route;
  route.reserve(static_cast<std::size_t>(manhattan_distance(a, b)));
  EngineCoord cur = a;
  while (cur.x != b.x) {
    EngineCoord next{cur.x + (b.x > cur.x ? 1 : -1), cur.y};
    route.push_back({cur, next});
    cur = next;
  }
  while (cur.y != b.y) {
    EngineCoord next{cur.x, cur.y + (b.y > cur.y ? 1 : -1)};
    route.push_back({cur, next});
    cur = next;
  }
  return route;
}

std::int64_t dag_comm_cost(const std::map<std::size_t, EngineCoord>& placements, const TaskDag& dag) {
  std::int64_t cost = 0;
  for (const auto& [a, b] : dag.edges) {
    auto pa = placements.find(a);
    auto pb = placements.find(b);
    if (pa == placements.end() || pb == placements.end())
      throw Error(ErrorCode::UnplacedNode, "platform",
                  "node " + std::to_string(pa == placements.end() ? a : b) + " has no placement");
    cost += manhattan_distance(pa->second, pb->second);
  }
  return cost;
}

}  // namespace isosched
