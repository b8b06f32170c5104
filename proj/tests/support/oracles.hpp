#pragma once

// Reference implementations used only as test oracles. Everything here
// re-derives results from definitions by exhaustive enumeration or literal
// summation and shares no code with the library paths it checks.

#include <cstdint>
#include <optional>
#include <vector>

#include "isosched/graph.hpp"
#include "isosched/mcu_match.hpp"
#include "isosched/platform.hpp"
#include "isosched/sched_tensors.hpp"

namespace isosched::testing {

/// Per-slot units of a transfer, built one slot at a time by draining `bw`
/// at most `link_bw` units per slot.
std::vector<std::int64_t> drain_profile(std::int64_t bw, std::int64_t link_bw);

/// Dense-tensor checker: materializes X[d,i,n,t] and the per-link load
/// Y[link,t] over the whole horizon and evaluates every constraint by
/// literal summation. Output is sorted by (kind, t, d, i, n_or_k, link, amount).
std::vector<Violation> brute_force_validate(const ComputeSchedule& x, const CommSchedule& y,
                                            const ScheduleProblem& problem, const PlatformConfig& platform);

struct RandomScheduleCase {
  ComputeSchedule x;
  CommSchedule y;
  ScheduleProblem problem;
};

/// Seeded random tensors over the given mesh. About half the cases are built
/// along precedence order so they are feasible or close to it; the rest are
/// unconstrained and carry duplicates, gaps, out-of-window starts, zero-length
/// tiles and invalid links.
RandomScheduleCase random_schedule_case(const PlatformConfig& platform, std::uint64_t seed);

/// Existence of an injective map with every A edge landing on a B edge,
/// by enumerating all |B|!/(|B|-|A|)! maps.
std::optional<Mapping> exhaustive_embedding(const CsrMatrix& a, const CsrMatrix& b);

/// Random boolean matrix with the given density.
DenseBool random_dense(std::size_t rows, std::size_t cols, double density, std::uint64_t seed);

}  // namespace isosched::testing
