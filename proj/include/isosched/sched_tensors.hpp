#pragma once

// Sparse compute / communication scheduling tensors and the feasibility
// checker for every compute and link constraint.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "isosched/platform.hpp"

namespace isosched {

struct TileKey {
  std::size_t d = 0;   // task
  std::size_t i = 0;   // tile group
  std::size_t n = 0;   // node (pipeline stage)
  friend auto operator<=>(const TileKey&, const TileKey&) = default;
};

/// One 1-entry of the compute tensor: tile (d,i,n) starts on engine p at slot t
/// and occupies it for `len` slots.
struct ComputeEntry {
  std::size_t d = 0;
  std::size_t i = 0;
  std::size_t n = 0;
  std::int64_t t = 0;
  std::int32_t p = 0;
  std::int64_t len = 1;

  TileKey key() const { return {d, i, n}; }
  friend auto operator<=>(const ComputeEntry&, const ComputeEntry&) = default;
};

/// One transfer of edge k for tile group i over a single link, starting at
/// slot t (the t' of the bandwidth profile) and carrying `units` data units.
struct CommEntry {
  std::size_t d = 0;
  std::size_t i = 0;
  std::size_t k = 0;
  std::int64_t t = 0;
  LinkId link;
  std::int64_t units = 1;
  friend auto operator<=>(const CommEntry&, const CommEntry&) = default;
};

struct ComputeSchedule {
  std::vector<ComputeEntry> entries;
};

struct CommSchedule {
  std::vector<CommEntry> entries;
};

/// A tile μ ∈ V_d with its lifetime window [S, L].
struct TileSpec {
  TileKey key;
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
};

struct TilePrecedence {
  TileKey before;
  TileKey after;
};

struct TaskTiming {
  std::size_t d = 0;
  std::int64_t arrival = 0;
  std::int64_t deadline = 1;
  TileKey final_tile;
  std::vector<Edge> stage_edges;   // for communication cost reporting
};

enum class ViolationKind { TileCompute, TileOrder, Deadline, EngineCapacity, LinkBandwidth };

std::string_view to_string(ViolationKind k);

struct Violation {
  ViolationKind kind = ViolationKind::TileCompute;
  std::size_t d = 0;
  std::size_t i = 0;
  std::size_t n_or_k = 0;
  std::int64_t t = 0;
  std::int64_t link = -1;   // dense link index for LinkBandwidth, else -1
  std::int64_t amount = 0;  // offending count / load / finish time
  std::string detail;

  friend bool operator==(const Violation& a, const Violation& b) {
    return a.kind == b.kind && a.d == b.d && a.i == b.i && a.n_or_k == b.n_or_k && a.t == b.t &&
           a.link == b.link && a.amount == b.amount;
  }
};

/// Sort key: (kind, t, d, i, n_or_k, link).
void sort_violations(std::vector<Violation>& v);

std::vector<Violation> check_tile_compute(const ComputeSchedule& x, const std::vector<TileSpec>& tiles);
std::vector<Violation> check_tile_order(const ComputeSchedule& x, const std::vector<TilePrecedence>& deps,
                                        const std::vector<TileSpec>& tiles);
/// Throws FinalTileUnscheduled when the task's final tile has no entry.
std::vector<Violation> check_deadline(const ComputeSchedule& x, const TaskTiming& task);
std::vector<Violation> check_engine_capacity(const ComputeSchedule& x, std::int64_t engines);

/// Per-slot units of a transfer of `bw` units over a link of capacity `link_bw`:
/// R = floor((bw-1)/BW) full slots followed by bw - R*BW.
std::vector<std::int64_t> bandwidth_profile(std::int64_t bw, std::int64_t link_bw);

std::vector<Violation> check_link_bandwidth(const CommSchedule& y, const PlatformConfig& platform);

struct ScheduleProblem {
  std::vector<TileSpec> tiles;
  std::vector<TilePrecedence> deps;
  std::vector<TaskTiming> tasks;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::map<std::size_t, std::int64_t> comm_cost;   // per task, Σ Manhattan hops over stage edges
  bool feasible() const { return violations.empty(); }
};

/// All five checkers; violations merged in sorted order. OpenMP-parallel over
/// constraint families and over links / slots inside them.
ValidationReport validate_all(const ComputeSchedule& x, const CommSchedule& y, const ScheduleProblem& problem,
                              const PlatformConfig& platform);
/// Single-threaded reference with the same contract.
ValidationReport validate_all_serial(const ComputeSchedule& x, const CommSchedule& y, const ScheduleProblem& problem,
                                     const PlatformConfig& platform);

// ---- schedule table ----------------------------------------------------------

struct ReconfigWindow {
  std::size_t d = 0;         // task whose weights are loaded / saved
  std::size_t n = 0;         // stage
  std::int64_t t = 0;
  std::int64_t len = 0;
  std::int32_t p = 0;
  std::int64_t bits = 0;     // weight traffic moved through the reconfiguration path
  friend auto operator<=>(const ReconfigWindow&, const ReconfigWindow&) = default;
};

struct ScheduleTable {
  std::map<std::int32_t, std::vector<ComputeEntry>> engine_streams;
  std::map<std::int64_t, std::vector<CommEntry>> link_streams;   // keyed by dense link index
  std::vector<ReconfigWindow> reconfig;
};

ScheduleTable make_schedule_table(const ComputeSchedule& x, const CommSchedule& y,
                                  const std::vector<ReconfigWindow>& reconfig, const PlatformConfig& platform);

/// Line format, one record per entry:
///   X d i n t p len
///   Y d i k t x0,y0>x1,y1 units
///   R d 0 n t p len bits
void write_schedule_table(std::ostream& os, const ScheduleTable& table);
ScheduleTable read_schedule_table(std::istream& is, const PlatformConfig& platform);

}  // namespace isosched
