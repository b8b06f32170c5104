#pragma once

// Layer Concatenate and Split: pipeline-stage balancing before mapping.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "isosched/graph.hpp"
#include "isosched/tile_model.hpp"

namespace isosched {

enum class SplitAxis { H, W, C };
enum class OuterAxis { H, W };

std::string_view to_string(SplitAxis axis);

/// Buffer-relevant dimensions of one layer inside a segment. R/S are the
/// kernel height/width, C the input channels, W/H the feature-map extent.
struct SegmentLayer {
  std::size_t layer_id = 0;
  LayerKind kind = LayerKind::Conv;
  std::int64_t R = 1, S = 1, C = 1, W = 1, H = 1;
  std::int64_t slots = 1;        // per-tile slot length of this layer (after any split)
  std::int64_t out_units = 1;    // data units of one output tile
  std::int64_t weight_bits = 0;
  std::int64_t halo = 0;         // ceil((K_h - 1) / 2) rows of producer reach
};

struct SplitPlan {
  std::size_t layer_id = 0;
  SplitAxis axis = SplitAxis::W;
  int parts = 2;
  bool needs_accumulation = false;
};

struct SplitInfo {
  SplitAxis axis = SplitAxis::W;
  int part = 0;
  int parts = 2;
  bool needs_accumulation = false;
  std::int64_t lo = 0;   // disjoint output range along the split axis
  std::int64_t hi = 0;
};

struct Segment {
  std::size_t seg_id = 0;
  std::size_t group = 0;                // parts of one split share a group
  std::vector<std::size_t> members;     // layer ids, topological
  std::vector<SegmentLayer> layers;     // parallel to members
  std::int64_t stage_latency = 1;       // slots per tile
  std::int64_t tiles = 1;
  std::int64_t buffer_need = 0;
  std::vector<SplitInfo> splits;        // outermost first; empty when unsplit

  std::int64_t out_units() const { return layers.back().out_units; }
  std::int64_t weight_bits() const;
  std::int64_t halo() const { return layers.front().halo; }
  int parts() const { return 1 << splits.size(); }
  bool needs_accumulation() const;
};

/// Population standard deviation over mean.
double coefficient_of_variation(std::span<const double> stage_latencies);
double coefficient_of_variation(const std::vector<Segment>& pipeline);

/// Minimal ping-pong buffer of a segment: feature-map rows for every member
/// plus twice the largest weight slice. Conv members only.
std::int64_t buffer_size(std::span<const SegmentLayer> layers, OuterAxis outer);
std::int64_t buffer_size(const Segment& seg, OuterAxis outer);

/// One segment per compute-bearing layer, in topological order.
std::vector<Segment> initial_pipeline(const TaskDag& dag, const std::vector<TileCost>& costs);

struct BalanceOptions {
  std::int64_t buffer_capacity = 1 << 20;
  double threshold = 0.15;
  std::size_t max_stages = static_cast<std::size_t>(-1);
  int max_parts = 2;
  OuterAxis outer = OuterAxis::H;
};

enum class MoveKind { Concat, Split };

struct BalanceMove {
  MoveKind kind = MoveKind::Concat;
  std::size_t index = 0;       // pipeline position the move applied to
  double cv_after = 0.0;
  std::optional<SplitPlan> plan;
};

struct BalanceReport {
  std::vector<Segment> pipeline;
  std::vector<std::int64_t> latencies_before;
  std::vector<std::int64_t> latencies_after;
  double cv_before = 0.0;
  double cv_after = 0.0;
  std::vector<BalanceMove> moves;
  bool converged = false;      // cv_after <= threshold
  bool fixed_point = false;    // stopped because no candidate move improved CV
};

/// Greedy alternating concat/split. Each accepted move strictly lowers CV; the
/// loop stops below the threshold, at a no-improvement fixed point, or after
/// 4 * |pipeline| moves.
BalanceReport balance(std::vector<Segment> pipeline, const BalanceOptions& options);

/// Exposed for tests: the two candidate moves balance() considers at a state.
std::optional<std::vector<Segment>> try_concat(const std::vector<Segment>& pipeline, const BalanceOptions& options,
                                               std::size_t* at = nullptr);
std::optional<std::vector<Segment>> try_split(const std::vector<Segment>& pipeline, const BalanceOptions& options,
                                              SplitPlan* plan = nullptr, std::size_t* at = nullptr);

/// Σ stage_latency * tiles across the pipeline.
std::int64_t pipeline_work(const std::vector<Segment>& pipeline);

}  // namespace isosched
