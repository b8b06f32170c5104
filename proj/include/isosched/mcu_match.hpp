#pragma once

// Subgraph matching of a task graph A (n x n) into a host graph B (m x m):
// Monte Carlo tree search over injective mappings, evaluated as M^T A M ⊆ B
// with CSR products, plus a backtracking Ullmann matcher used as ground truth.

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "isosched/graph.hpp"

namespace isosched {

/// Injective map from A's rows to B's rows. Stored as the image of every
/// source row; `matrix()` yields the n x m CSR form with one 1 per row.
struct Mapping {
  std::vector<std::int32_t> image;
  std::size_t m = 0;

  std::size_t n() const { return image.size(); }
  CsrMatrix matrix() const;
  /// Row sums 1 and column sums <= 1.
  bool valid() const;
  friend bool operator==(const Mapping&, const Mapping&) = default;
};

/// An unordered pair of target columns (first < second) whose exchange
/// changes the mapping: swaps two images, or moves one image to a free column.
struct SwapAction {
  std::int32_t first = 0;
  std::int32_t second = 0;
  friend bool operator==(const SwapAction&, const SwapAction&) = default;
};

struct McuParams {
  std::int64_t max_iterations = 5000;
  double exploration = 1.4142135623730951;
  std::uint64_t rng_seed = 0;
};

struct SearchNode {
  Mapping mapping;
  std::int64_t visits = 0;        // N
  std::int64_t reward_sum = 0;    // Q
  std::int64_t own_visits = 0;    // evaluations of this node's own mapping
  std::int32_t parent = -1;
  std::vector<std::int32_t> children;
  std::vector<SwapAction> untried;
  bool actions_ready = false;
  bool terminal = false;
  bool exhausted = false;         // no unseen mapping reachable below
  int reward = 0;                 // cached Evaluate() of `mapping`
};

double ucb_score(std::int64_t q, std::int64_t n, std::int64_t parent_n, double c);

/// +1 iff M^T A M ⊆ B, else -1. Throws ShapeMismatch on non-conformable shapes.
int evaluate(const Mapping& m, const CsrMatrix& a, const CsrMatrix& b);
int evaluate(const CsrMatrix& m, const CsrMatrix& a, const CsrMatrix& b);

std::vector<SwapAction> generate_actions(const Mapping& m);
Mapping apply_action(const Mapping& m, const SwapAction& action);

/// Sources in descending (in + out) degree, each to the lowest unused target
/// whose degree is at least its own (lowest unused target otherwise).
Mapping initial_mapping(const CsrMatrix& a, const CsrMatrix& b);

struct McuResult {
  Mapping best;
  int reward = -1;
  std::int64_t iterations = 0;           // iterations run
  std::int64_t first_success = -1;       // iteration index (1-based) of the first +1
  std::size_t tree_size = 0;
  bool exhausted = false;                // every reachable mapping was evaluated
  std::vector<SearchNode> tree;          // retained only when requested
};

struct McuOptions {
  bool keep_tree = false;
};

McuResult mcu_search(const CsrMatrix& a, const CsrMatrix& b, const McuParams& params,
                     const McuOptions& options = {});

/// Independent searches with derived seeds, run in parallel; returns the
/// successful search with the lowest index (or the last failure).
McuResult mcu_search_parallel(const CsrMatrix& a, const CsrMatrix& b, const McuParams& params, int searches);

struct UllmannResult {
  bool found = false;
  Mapping witness;
  std::int64_t expansions = 0;   // consistent partial assignments created
  bool budget_hit = false;
};

struct UllmannOptions {
  /// Visit sources so each one is adjacent to an earlier one when possible;
  /// plain row order otherwise.
  bool connectivity_order = false;
  std::int64_t node_budget = std::numeric_limits<std::int64_t>::max();
};

/// Backtracking over injective mappings with a degree-pruned candidate matrix
/// and forward adjacency checks.
UllmannResult ullmann_search(const CsrMatrix& a, const CsrMatrix& b, const UllmannOptions& options = {});

/// Exact existence answer for desk-scale inputs (|A| <= 10, |B| <= 12).
/// Throws SizeLimitExceeded beyond that.
UllmannResult ullmann_oracle(const CsrMatrix& a, const CsrMatrix& b);

}  // namespace isosched
