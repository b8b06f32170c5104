#include "isosched/graph.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <sstream>

#include "isosched/error.hpp"

namespace isosched {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::NotComputeBearing: return "NotComputeBearing";
    case ErrorCode::EmptyWorkload: return "EmptyWorkload";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ZeroMean: return "ZeroMean";
    case ErrorCode::UnsupportedKind: return "UnsupportedKind";
    case ErrorCode::UnplacedNode: return "UnplacedNode";
    case ErrorCode::FinalTileUnscheduled: return "FinalTileUnscheduled";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SizeLimitExceeded: return "SizeLimitExceeded";
    case ErrorCode::ZeroRemainingTime: return "ZeroRemainingTime";
    case ErrorCode::NoVictimAvailable: return "NoVictimAvailable";
    case ErrorCode::Unschedulable: return "Unschedulable";
    case ErrorCode::TableInconsistent: return "TableInconsistent";
    case ErrorCode::NoFeasibleRate: return "NoFeasibleRate";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantError: return "InvariantError";
  }
  return "Unknown";
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::MatMul: return "matmul";
    case LayerKind::Elementwise: return "elementwise";
  }
  return "?";
}

std::string_view to_string(ComplexityClass c) {
  switch (c) {
    case ComplexityClass::Simple: return "simple";
    case ComplexityClass::Middle: return "middle";
    case ComplexityClass::Complex: return "complex";
  }
  return "?";
}

LayerNode LayerNode::make_conv(std::size_t id, ConvDims d, std::int64_t weight_bits) {
  LayerNode n;
  n.id = id;
  n.kind = LayerKind::Conv;
  n.conv = d;
  n.weight_bits = weight_bits;
  return n;
}

LayerNode LayerNode::make_matmul(std::size_t id, AttnDims d, std::int64_t weight_bits) {
  LayerNode n;
  n.id = id;
  n.kind = LayerKind::MatMul;
  n.attn = d;
  n.weight_bits = weight_bits;
  return n;
}

LayerNode LayerNode::make_elementwise(std::size_t id) {
  LayerNode n;
  n.id = id;
  n.kind = LayerKind::Elementwise;
  return n;
}

namespace {

[[noreturn]] void invariant_error(const std::string& msg) {
  throw Error(ErrorCode::InvariantError, "graph", msg);
}

void check_layer(const TaskDag& dag, const LayerNode& n, std::size_t pos) {
  std::ostringstream where;
  where << "task " << dag.task_id << " node " << pos;
  if (n.id != pos) invariant_error(where.str() + ": id must equal its position");
  const bool want_conv = n.kind == LayerKind::Conv;
  const bool want_attn = n.kind == LayerKind::MatMul;
  if (n.conv.has_value() != want_conv || n.attn.has_value() != want_attn) {
    invariant_error(where.str() + ": dimension set does not match layer kind");
  }
  if (n.conv) {
    const auto& c = *n.conv;
    for (auto v : {c.out_w, c.out_h, c.out_c, c.kernel_h, c.kernel_w, c.in_c})
      if (v < 1) invariant_error(where.str() + ": conv dimensions must be >= 1");
  }
  if (n.attn) {
    const auto& a = *n.attn;
    for (auto v : {a.keys, a.heads, a.head_dim, a.queries})
      if (v < 1) invariant_error(where.str() + ": attention dimensions must be >= 1");
  }
  if (n.weight_bits < 0) invariant_error(where.str() + ": weight_bits must be >= 0");
}

}  // namespace

std::vector<std::size_t> topo_sort(const TaskDag& dag) {
  const std::size_t n = dag.nodes.size();
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& [a, b] : dag.edges) {
    if (a >= n || b >= n) invariant_error("edge endpoint out of range");
    succ[a].push_back(b);
    ++indeg[b];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push(v);
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const auto v = ready.top();
    ready.pop();
    order.push_back(v);
    for (auto w : succ[v])
      if (--indeg[w] == 0) ready.push(w);
  }
  if (order.size() != n) {
    std::ostringstream msg;
    msg << "task " << dag.task_id << " has a cycle through nodes {";
    bool first = true;
    for (std::size_t v = 0; v < n; ++v) {
      if (indeg[v] == 0) continue;
      msg << (first ? "" : ",") << v;
      first = false;
    }
    msg << "}";
    throw Error(ErrorCode::CycleDetected, "graph", msg.str());
  }
  return order;
}

void check_invariants(const TaskDag& dag) {
  for (std::size_t i = 0; i < dag.nodes.size(); ++i) check_layer(dag, dag.nodes[i], i);
  if (dag.deadline <= 0) invariant_error("task " + std::to_string(dag.task_id) + ": deadline must be > 0");
  if (dag.priority < 1) invariant_error("task " + std::to_string(dag.task_id) + ": priority must be >= 1");
  if (dag.arrival < 0) invariant_error("task " + std::to_string(dag.task_id) + ": arrival must be >= 0");
  topo_sort(dag);
}

void check_invariants(const WorkloadSet& w) {
  std::vector<std::size_t> ids;
  for (const auto& t : w.tasks) {
    check_invariants(t);
    ids.push_back(t.task_id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    invariant_error("task ids must be unique");
}

// ---- CSR -------------------------------------------------------------------

bool CsrMatrix::contains(std::size_t r, std::size_t c) const {
  if (r >= n_rows) return false;
  auto cols = row(r);
  return std::binary_search(cols.begin(), cols.end(), c);
}

bool CsrMatrix::valid() const {
  if (row_ptr.size() != n_rows + 1 || row_ptr.front() != 0 || row_ptr.back() != col_idx.size())
    return false;
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (row_ptr[r] > row_ptr[r + 1]) return false;
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      if (col_idx[k] >= n_cols) return false;
      if (k > row_ptr[r] && col_idx[k - 1] >= col_idx[k]) return false;
    }
  }
  return true;
}

CsrMatrix CsrMatrix::empty(std::size_t rows, std::size_t cols) {
  CsrMatrix m;
  m.n_rows = rows;
  m.n_cols = cols;
  m.row_ptr.assign(rows + 1, 0);
  return m;
}

CsrMatrix CsrMatrix::from_coords(std::size_t rows, std::size_t cols,
                                 std::vector<std::pair<std::size_t, std::size_t>> coords) {
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  CsrMatrix m = empty(rows, cols);
  m.col_idx.reserve(coords.size());
  for (const auto& [r, c] : coords) {
    ++m.row_ptr[r + 1];
    m.col_idx.push_back(c);
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
  return m;
}

CsrMatrix CsrMatrix::transpose() const {
  CsrMatrix t = empty(n_cols, n_rows);
  for (auto c : col_idx) ++t.row_ptr[c + 1];
  for (std::size_t r = 0; r < n_cols; ++r) t.row_ptr[r + 1] += t.row_ptr[r];
  t.col_idx.resize(col_idx.size());
  std::vector<std::size_t> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
  // rows visited in ascending order keep each transposed row sorted
  for (std::size_t r = 0; r < n_rows; ++r)
    for (auto c : row(r)) t.col_idx[cursor[c]++] = r;
  return t;
}

CsrMatrix to_csr(const DenseBool& dense) {
  CsrMatrix m = CsrMatrix::empty(dense.size(), dense.empty() ? 0 : dense.front().size());
  for (std::size_t r = 0; r < dense.size(); ++r) {
    for (std::size_t c = 0; c < dense[r].size(); ++c)
      if (dense[r][c]) m.col_idx.push_back(c);
    m.row_ptr[r + 1] = m.col_idx.size();
  }
  return m;
}

DenseBool from_csr(const CsrMatrix& m) {
  DenseBool d(m.n_rows, std::vector<std::uint8_t>(m.n_cols, 0));
  for (std::size_t r = 0; r < m.n_rows; ++r)
    for (auto c : m.row(r)) d[r][c] = 1;
  return d;
}

std::size_t csr_footprint(const CsrMatrix& m) { return m.nnz() + m.n_rows + 1; }

double csr_compression_ratio(const CsrMatrix& m) {
  return static_cast<double>(m.n_rows * m.n_cols) / static_cast<double>(csr_footprint(m));
}

CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b) {
  CsrMatrix out = CsrMatrix::empty(a.n_rows, b.n_cols);
  std::vector<std::size_t> marker(b.n_cols, static_cast<std::size_t>(-1));
  std::vector<std::size_t> row_buf;
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    row_buf.clear();
    for (auto k : a.row(r))
      for (auto c : b.row(k))
        if (marker[c] != r) {
          marker[c] = r;
          row_buf.push_back(c);
        }
    std::sort(row_buf.begin(), row_buf.end());
    out.col_idx.insert(out.col_idx.end(), row_buf.begin(), row_buf.end());
    out.row_ptr[r + 1] = out.col_idx.size();
  }
  return out;
}

bool is_subset(const CsrMatrix& sub, const CsrMatrix& super) {
  for (std::size_t r = 0; r < sub.n_rows; ++r) {
    auto needle = sub.row(r);
    if (needle.empty()) continue;
    if (r >= super.n_rows) return false;
    auto hay = super.row(r);
    if (!std::includes(hay.begin(), hay.end(), needle.begin(), needle.end())) return false;
  }
  return true;
}

CsrMatrix adjacency(const TaskDag& dag) {
  std::vector<std::pair<std::size_t, std::size_t>> coords(dag.edges.begin(), dag.edges.end());
  return CsrMatrix::from_coords(dag.nodes.size(), dag.nodes.size(), std::move(coords));
}

}  // namespace isosched
