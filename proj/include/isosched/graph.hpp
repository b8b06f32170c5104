#pragma once

// DAG and boolean sparse-matrix substrate shared by every other module.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace isosched {

enum class LayerKind { Conv, MatMul, Elementwise };

std::string_view to_string(LayerKind kind);

struct ConvDims {
  std::int64_t out_w = 1;   // W_o
  std::int64_t out_h = 1;   // H_o, one tile per output row
  std::int64_t out_c = 1;   // C_o
  std::int64_t kernel_h = 1;
  std::int64_t kernel_w = 1;
  std::int64_t in_c = 1;    // C_in
};

struct AttnDims {
  std::int64_t keys = 1;     // N_k
  std::int64_t heads = 1;    // h
  std::int64_t head_dim = 1; // d_k
  std::int64_t queries = 1;  // output rows, one tile per query row
};

struct LayerNode {
  std::size_t id = 0;
  LayerKind kind = LayerKind::Elementwise;
  std::optional<ConvDims> conv;
  std::optional<AttnDims> attn;
  std::int64_t weight_bits = 0;
  /// Pipeline warm-up cycles; defaults to min(K_h*K_w, 8) for conv and min(d_k, 8) for MatMul when unset.
  std::optional<std::int64_t> fill_cycles;
  /// Replaces the analytic per-tile latency when a cost table provides one.
  std::optional<std::int64_t> latency_override;

  bool compute_bearing() const { return kind != LayerKind::Elementwise; }

  static LayerNode make_conv(std::size_t id, ConvDims d, std::int64_t weight_bits = 0);
  static LayerNode make_matmul(std::size_t id, AttnDims d, std::int64_t weight_bits = 0);
  static LayerNode make_elementwise(std::size_t id);
};

using Edge = std::pair<std::size_t, std::size_t>;

struct TaskDag {
  std::size_t task_id = 0;
  std::string name;
  std::vector<LayerNode> nodes;
  std::vector<Edge> edges;
  std::int64_t deadline = 1;   // DDL_d, slots relative to arrival
  std::int64_t arrival = 0;    // Arr_d, absolute slot
  std::int64_t priority = 1;   // P_d
  bool critical = false;
  /// SLA class label; "translation" uses the 97% threshold, anything else 99%.
  std::string sla_class = "vision";
};

/// Throws Error{InvariantError} naming the first broken invariant, or
/// Error{CycleDetected} when the edge set has no topological order.
void check_invariants(const TaskDag& dag);

/// Kahn's algorithm with a min-heap so ties resolve to the lowest node id.
std::vector<std::size_t> topo_sort(const TaskDag& dag);

enum class ComplexityClass { Simple, Middle, Complex };

std::string_view to_string(ComplexityClass c);

struct WorkloadSet {
  std::vector<TaskDag> tasks;
  ComplexityClass complexity = ComplexityClass::Simple;
};

void check_invariants(const WorkloadSet& w);

using DenseBool = std::vector<std::vector<std::uint8_t>>;

/// Boolean CSR: every stored entry is an implicit 1.
struct CsrMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;

  std::size_t nnz() const { return col_idx.size(); }
  std::span<const std::size_t> row(std::size_t r) const {
    return {col_idx.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
  bool contains(std::size_t r, std::size_t c) const;
  bool valid() const;

  static CsrMatrix empty(std::size_t rows, std::size_t cols);
  /// Builds from unsorted, possibly duplicated coordinates.
  static CsrMatrix from_coords(std::size_t rows, std::size_t cols,
                               std::vector<std::pair<std::size_t, std::size_t>> coords);
  CsrMatrix transpose() const;

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

CsrMatrix to_csr(const DenseBool& dense);
DenseBool from_csr(const CsrMatrix& m);

/// Index entries stored: nnz + n_rows + 1.
std::size_t csr_footprint(const CsrMatrix& m);
double csr_compression_ratio(const CsrMatrix& m);

/// Boolean product (OR of ANDs) computed by row gather; never densifies.
CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b);

/// True when every stored entry of `sub` is stored in `super`.
bool is_subset(const CsrMatrix& sub, const CsrMatrix& super);

/// Layer-level adjacency of a task.
CsrMatrix adjacency(const TaskDag& dag);

}  // namespace isosched
