#include "isosched/instances.hpp"

#include <random>

#include "isosched/tile_model.hpp"

namespace isosched {

CsrMatrix random_pattern(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t j = 1; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> parent(0, j - 1);
    const auto pj = parent(rng);
    coords.emplace_back(pj, j);
    for (std::size_t i = 0; i < j; ++i)
      if (i != pj && u(rng) < p) coords.emplace_back(i, j);
  }
  return CsrMatrix::from_coords(n, n, std::move(coords));
}

CsrMatrix random_host(std::size_t n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < p) {
        coords.emplace_back(i, j);
        coords.emplace_back(j, i);
      }
  return CsrMatrix::from_coords(n, n, std::move(coords));
}

MatchInstance random_match_instance(std::size_t na, std::size_t nb, double pa, double pb, std::uint64_t seed) {
  return {random_pattern(na, pa, seed), random_host(nb, pb, seed ^ 0x9e3779b97f4a7c15ULL)};
}

ContentionScenario contention_scenario(const PlatformConfig& platform, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto engines = static_cast<std::size_t>(platform.engine_count());
  std::uniform_int_distribution<std::int64_t> groups(200, 400), urgent_groups(2, 6), chan(1, 2), arrival(4, 16),
      slack(2, 6);
  std::uniform_int_distribution<std::size_t> urgent_len(1, std::min<std::size_t>(2, engines));

  ContentionScenario sc;
  sc.victim_stages = engines;
  sc.urgent_stages = urgent_len(rng);

  const std::int64_t c = 4 * chan(rng);
  TaskDag victim;
  victim.task_id = 0;
  victim.name = "victim";
  victim.critical = false;
  victim.priority = 1;
  victim.arrival = 0;
  const auto g = groups(rng);
  for (std::size_t k = 0; k < engines; ++k) {
    victim.nodes.push_back(LayerNode::make_conv(k, ConvDims{4, g, c, 3, 3, c}, 9 * c * c * 8));
    if (k) victim.edges.emplace_back(k - 1, k);
  }

  TaskDag urgent;
  urgent.task_id = 1;
  urgent.name = "urgent";
  urgent.critical = true;
  urgent.priority = 3;
  urgent.arrival = arrival(rng);
  const auto ug = urgent_groups(rng);
  for (std::size_t k = 0; k < sc.urgent_stages; ++k) {
    urgent.nodes.push_back(LayerNode::make_conv(k, ConvDims{4, ug, c, 3, 3, c}, 9 * c * c * 8));
    if (k) urgent.edges.emplace_back(k - 1, k);
  }

  // Every layer has the same tile cost and one output row fits a link slot,
  // so the urgent chain needs ug slots plus two per stage for the halo, plus
  // one weight save and load per claimed engine.
  const std::int64_t weights = 9 * c * c * 8;
  const std::int64_t reconfig = 2 * ((weights + platform.reconfig_bw - 1) / platform.reconfig_bw);
  urgent.deadline = ug + 2 * static_cast<std::int64_t>(sc.urgent_stages) + reconfig + slack(rng);
  victim.deadline = 4 * (g + static_cast<std::int64_t>(engines));

  sc.workload.tasks = {victim, urgent};
  sc.workload.complexity = ComplexityClass::Simple;
  return sc;
}

}  // namespace isosched
