#include "isosched/mcu_match.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <unordered_set>

#include "isosched/error.hpp"
#include "isosched/seed.hpp"

namespace isosched {

CsrMatrix Mapping::matrix() const {
  CsrMatrix c = CsrMatrix::empty(image.size(), m);
  c.col_idx.reserve(image.size());
  for (std::size_t r = 0; r < image.size(); ++r) {
    c.col_idx.push_back(static_cast<std::size_t>(image[r]));
    c.row_ptr[r + 1] = r + 1;
  }
  return c;
}

bool Mapping::valid() const {
  std::vector<std::uint8_t> used(m, 0);
  for (auto j : image) {
    if (j < 0 || static_cast<std::size_t>(j) >= m || used[static_cast<std::size_t>(j)]) return false;
    used[static_cast<std::size_t>(j)] = 1;
  }
  return true;
}

double ucb_score(std::int64_t q, std::int64_t n, std::int64_t parent_n, double c) {
  if (n == 0) return std::numeric_limits<double>::infinity();
  const double mean = static_cast<double>(q) / static_cast<double>(n);
  return mean + c * std::sqrt(std::log(static_cast<double>(parent_n)) / static_cast<double>(n));
}

int evaluate(const CsrMatrix& m, const CsrMatrix& a, const CsrMatrix& b) {
  if (a.n_rows != a.n_cols || b.n_rows != b.n_cols || m.n_rows != a.n_rows || m.n_cols != b.n_rows)
    throw Error(ErrorCode::ShapeMismatch, "mcu-match",
                "expected A n x n, M n x m, B m x m; got A " + std::to_string(a.n_rows) + "x" +
                    std::to_string(a.n_cols) + ", M " + std::to_string(m.n_rows) + "x" + std::to_string(m.n_cols) +
                    ", B " + std::to_string(b.n_rows) + "x" + std::to_string(b.n_cols));
  const CsrMatrix c = multiply(multiply(m.transpose(), a), m);
  return is_subset(c, b) ? 1 : -1;
}

int evaluate(const Mapping& m, const CsrMatrix& a, const CsrMatrix& b) { return evaluate(m.matrix(), a, b); }

std::vector<SwapAction> generate_actions(const Mapping& m) {
  std::vector<std::uint8_t> assigned(m.m, 0);
  for (auto j : m.image) assigned[static_cast<std::size_t>(j)] = 1;
  std::vector<SwapAction> out;
  for (std::size_t c1 = 0; c1 < m.m; ++c1)
    for (std::size_t c2 = c1 + 1; c2 < m.m; ++c2)
      if (assigned[c1] || assigned[c2])
        out.push_back({static_cast<std::int32_t>(c1), static_cast<std::int32_t>(c2)});
  return out;
}

Mapping apply_action(const Mapping& m, const SwapAction& action) {
  Mapping out = m;
  for (auto& j : out.image) {
    if (j == action.first) {
      j = action.second;
    } else if (j == action.second) {
      j = action.first;
    }
  }
  return out;
}

namespace {

std::vector<std::size_t> total_degree(const CsrMatrix& g) {
  std::vector<std::size_t> deg(g.n_rows, 0);
  for (std::size_t r = 0; r < g.n_rows; ++r) {
    deg[r] += g.row(r).size();
    for (auto c : g.row(r)) ++deg[c];
  }
  return deg;
}

std::string mapping_key(const Mapping& m) {
  return {reinterpret_cast<const char*>(m.image.data()), m.image.size() * sizeof(std::int32_t)};
}

}  // namespace

Mapping initial_mapping(const CsrMatrix& a, const CsrMatrix& b) {
  const auto deg_a = total_degree(a);
  const auto deg_b = total_degree(b);
  std::vector<std::size_t> order(a.n_rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return deg_a[x] > deg_a[y]; });

  Mapping m;
  m.m = b.n_rows;
  m.image.assign(a.n_rows, -1);
  std::vector<std::uint8_t> used(b.n_rows, 0);
  for (auto src : order) {
    std::optional<std::size_t> pick;
    for (std::size_t j = 0; j < b.n_rows && !pick; ++j)
      if (!used[j] && deg_b[j] >= deg_a[src]) pick = j;
    for (std::size_t j = 0; j < b.n_rows && !pick; ++j)
      if (!used[j]) pick = j;
    used[*pick] = 1;
    m.image[src] = static_cast<std::int32_t>(*pick);
  }
  return m;
}

namespace {

class SearchTree {
 public:
  SearchTree(const McuParams& params, Mapping root) : params_(params), rng_(params.rng_seed) {
    seen_.insert(mapping_key(root));
    SearchNode node;
    node.mapping = std::move(root);
    nodes_.push_back(std::move(node));
  }

  std::vector<SearchNode>& nodes() { return nodes_; }

  /// Select down the tree and expand one unseen mapping; -1 once exhausted.
  std::int32_t select_expand() {
    while (!nodes_[0].exhausted) {
      std::int32_t v = 0;
      bool restart = false;
      while (!restart) {
        prepare(v);
        if (!nodes_[v].untried.empty()) break;
        std::int32_t pick = -1;
        double best = -std::numeric_limits<double>::infinity();
        for (auto c : nodes_[v].children) {
          if (nodes_[c].exhausted) continue;
          const double s = ucb_score(nodes_[c].reward_sum, nodes_[c].visits, nodes_[v].visits, params_.exploration);
          if (s > best) {
            best = s;
            pick = c;
          }
        }
        if (pick < 0) {
          mark_exhausted(v);
          restart = true;
        } else {
          v = pick;
        }
      }
      if (restart) continue;
      auto& untried = nodes_[v].untried;
      while (!untried.empty()) {
        const auto idx = static_cast<std::size_t>(rng_() % untried.size());
        const auto action = untried[idx];
        untried[idx] = untried.back();
        untried.pop_back();
        Mapping next = apply_action(nodes_[v].mapping, action);
        if (!seen_.insert(mapping_key(next)).second) continue;
        SearchNode child;
        child.mapping = std::move(next);
        child.parent = v;
        nodes_.push_back(std::move(child));
        const auto id = static_cast<std::int32_t>(nodes_.size() - 1);
        nodes_[v].children.push_back(id);
        return id;
      }
      // every action from v led to a seen mapping; v is now fully expanded
    }
    return -1;
  }

  void backpropagate(std::int32_t u, int reward) {
    nodes_[u].own_visits += 1;
    for (auto v = u; v >= 0; v = nodes_[v].parent) {
      nodes_[v].visits += 1;
      nodes_[v].reward_sum += reward;
    }
  }

  void after_evaluation(std::int32_t u) {
    prepare(u);
    if (nodes_[u].terminal) mark_exhausted(u);
  }

 private:
  void prepare(std::int32_t v) {
    auto& node = nodes_[v];
    if (node.actions_ready) return;
    node.untried = generate_actions(node.mapping);
    node.actions_ready = true;
    if (node.untried.empty()) node.terminal = true;
  }

  void mark_exhausted(std::int32_t v) {
    while (v >= 0) {
      auto& node = nodes_[v];
      if (!node.actions_ready || !node.untried.empty()) return;
      for (auto c : node.children)
        if (!nodes_[c].exhausted) return;
      node.exhausted = true;
      v = node.parent;
    }
  }

  McuParams params_;
  std::mt19937_64 rng_;
  std::vector<SearchNode> nodes_;
  std::unordered_set<std::string> seen_;
};

void check_square(const CsrMatrix& g, const char* name) {
  if (g.n_rows != g.n_cols)
    throw Error(ErrorCode::ShapeMismatch, "mcu-match", std::string(name) + " must be square");
}

}  // namespace

McuResult mcu_search(const CsrMatrix& a, const CsrMatrix& b, const McuParams& params, const McuOptions& options) {
  check_square(a, "A");
  check_square(b, "B");
  McuResult res;
  if (a.n_rows > b.n_rows) return res;

  SearchTree tree(params, initial_mapping(a, b));
  int best_reward = std::numeric_limits<int>::min();
  res.best = tree.nodes()[0].mapping;
  for (std::int64_t it = 1; it <= params.max_iterations; ++it) {
    const std::int32_t u = it == 1 ? 0 : tree.select_expand();
    if (u < 0) {
      res.exhausted = true;
      break;
    }
    const int r = evaluate(tree.nodes()[u].mapping, a, b);
    tree.nodes()[u].reward = r;
    tree.backpropagate(u, r);
    res.iterations = it;
    if (r > best_reward) {
      best_reward = r;
      res.best = tree.nodes()[u].mapping;
    }
    if (r == 1) {
      tree.nodes()[u].terminal = true;
      res.first_success = it;
      break;
    }
    tree.after_evaluation(u);
  }
  res.reward = best_reward == 1 ? 1 : -1;
  // returned mappings are re-checked, never trusted
  if (res.reward == 1 && evaluate(res.best, a, b) != 1) res.reward = -1;
  res.tree_size = tree.nodes().size();
  if (options.keep_tree) res.tree = std::move(tree.nodes());
  return res;
}

McuResult mcu_search_parallel(const CsrMatrix& a, const CsrMatrix& b, const McuParams& params, int searches) {
  searches = std::max(searches, 1);
  std::vector<McuResult> results(static_cast<std::size_t>(searches));
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < searches; ++s) {
    McuParams p = params;
    p.rng_seed = mix64(params.rng_seed + static_cast<std::uint64_t>(s));
    results[static_cast<std::size_t>(s)] = mcu_search(a, b, p);
  }
  for (auto& r : results)
    if (r.reward == 1) return std::move(r);
  return std::move(results.back());
}

UllmannResult ullmann_search(const CsrMatrix& a, const CsrMatrix& b, const UllmannOptions& options) {
  check_square(a, "A");
  check_square(b, "B");
  UllmannResult res;
  const std::size_t n = a.n_rows, m = b.n_rows;
  res.witness.m = m;
  if (n > m) return res;
  if (n == 0) {
    res.found = true;
    return res;
  }

  const CsrMatrix at = a.transpose();
  const CsrMatrix bt = b.transpose();
  std::vector<std::vector<std::size_t>> candidates(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (b.row(j).size() >= a.row(i).size() && bt.row(j).size() >= at.row(i).size()) candidates[i].push_back(j);

  std::vector<std::size_t> order;
  if (options.connectivity_order) {
    std::vector<std::uint8_t> placed(n, 0);
    std::vector<std::size_t> links(n, 0);
    for (std::size_t step = 0; step < n; ++step) {
      std::size_t pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (placed[i]) continue;
        auto better = [&](std::size_t x, std::size_t y) {
          if (links[x] != links[y]) return links[x] > links[y];
          const auto dx = a.row(x).size() + at.row(x).size(), dy = a.row(y).size() + at.row(y).size();
          if (dx != dy) return dx > dy;
          return x < y;
        };
        if (pick == n || better(i, pick)) pick = i;
      }
      placed[pick] = 1;
      order.push_back(pick);
      for (auto c : a.row(pick)) ++links[c];
      for (auto c : at.row(pick)) ++links[c];
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) order.push_back(i);
  }

  std::vector<std::int32_t> image(n, -1);
  std::vector<std::uint8_t> used(m, 0);

  auto consistent = [&](std::size_t i, std::size_t j) {
    for (auto succ : a.row(i))
      if (succ == i ? !b.contains(j, j) : image[succ] >= 0 && !b.contains(j, static_cast<std::size_t>(image[succ])))
        return false;
    for (auto pred : at.row(i))
      if (pred != i && image[pred] >= 0 && !b.contains(static_cast<std::size_t>(image[pred]), j)) return false;
    return true;
  };

  auto dfs = [&](auto&& self, std::size_t depth) -> bool {
    if (depth == n) return true;
    const auto i = order[depth];
    for (auto j : candidates[i]) {
      if (used[j] || !consistent(i, j)) continue;
      if (++res.expansions > options.node_budget) {
        res.budget_hit = true;
        return false;
      }
      image[i] = static_cast<std::int32_t>(j);
      used[j] = 1;
      if (self(self, depth + 1)) return true;
      if (res.budget_hit) return false;
      image[i] = -1;
      used[j] = 0;
    }
    return false;
  };

  res.found = dfs(dfs, 0);
  if (res.found) res.witness.image = image;
  return res;
}

UllmannResult ullmann_oracle(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.n_rows > 10 || b.n_rows > 12)
    throw Error(ErrorCode::SizeLimitExceeded, "mcu-match",
                "oracle is exhaustive only for |A| <= 10 and |B| <= 12 (got " + std::to_string(a.n_rows) + ", " +
                    std::to_string(b.n_rows) + ")");
  return ullmann_search(a, b);
}

}  // namespace isosched
