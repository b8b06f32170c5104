#pragma once

// Seeded instance families shared by the CLI, the acceptance suite and the
// benchmarks.

#include <cstdint>

#include "isosched/graph.hpp"
#include "isosched/platform.hpp"

namespace isosched {

/// Directed pattern on n vertices: a random spanning tree oriented low to
/// high id plus each remaining forward pair with probability p.
CsrMatrix random_pattern(std::size_t n, double p, std::uint64_t seed);

/// Symmetric host graph with each unordered pair present with probability p.
CsrMatrix random_host(std::size_t n, double p, std::uint64_t seed);

struct MatchInstance {
  CsrMatrix a;
  CsrMatrix b;
};

MatchInstance random_match_instance(std::size_t na, std::size_t nb, double pa, double pb, std::uint64_t seed);

/// A saturating non-critical conv chain with one stage per engine, then a
/// short critical chain arriving while it runs with a deadline only
/// preemption can meet. `urgent_stages` of the urgent task should land on the
/// victim's last `urgent_stages` stages.
struct ContentionScenario {
  WorkloadSet workload;          // task 0: victim, task 1: urgent
  std::size_t urgent_stages = 1;
  std::size_t victim_stages = 1;
};

ContentionScenario contention_scenario(const PlatformConfig& platform, std::uint64_t seed);

}  // namespace isosched
