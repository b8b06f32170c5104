#include "isosched/lcs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "isosched/error.hpp"

namespace isosched {

std::string_view to_string(SplitAxis axis) {
  switch (axis) {
    case SplitAxis::H: return "H";
    case SplitAxis::W: return "W";
    case SplitAxis::C: return "C";
  }
  return "?";
}

std::int64_t Segment::weight_bits() const {
  std::int64_t total = 0;
  for (const auto& l : layers) total += l.weight_bits;
  return total;
}

bool Segment::needs_accumulation() const {
  return std::any_of(splits.begin(), splits.end(), [](const SplitInfo& s) { return s.needs_accumulation; });
}

double coefficient_of_variation(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorCode::EmptyInput, "lcs", "coefficient of variation of an empty list");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (mean <= 0.0) throw Error(ErrorCode::ZeroMean, "lcs", "coefficient of variation with zero mean");
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / n) / mean;
}

double coefficient_of_variation(const std::vector<Segment>& pipeline) {
  std::vector<double> xs;
  xs.reserve(pipeline.size());
  for (const auto& s : pipeline) xs.push_back(static_cast<double>(s.stage_latency));
  return coefficient_of_variation(xs);
}

std::int64_t buffer_size(std::span<const SegmentLayer> layers, OuterAxis outer) {
  std::int64_t rows = 0;
  std::int64_t weights = 0;
  for (const auto& l : layers) {
    if (l.kind != LayerKind::Conv)
      throw Error(ErrorCode::UnsupportedKind, "lcs",
                  "buffer size is defined for conv layers only (layer " + std::to_string(l.layer_id) + ")");
    rows += l.R * (outer == OuterAxis::H ? l.W : l.H) * l.C;
    weights = std::max(weights, l.R * l.S * l.C);
  }
  return rows + 2 * weights;
}

std::int64_t buffer_size(const Segment& seg, OuterAxis outer) { return buffer_size(seg.layers, outer); }

namespace {

std::int64_t buffer_or_zero(std::span<const SegmentLayer> layers, OuterAxis outer) {
  const bool all_conv =
      std::all_of(layers.begin(), layers.end(), [](const SegmentLayer& l) { return l.kind == LayerKind::Conv; });
  return all_conv ? buffer_size(layers, outer) : 0;
}

std::size_t next_group(const std::vector<Segment>& p) {
  std::size_t g = 0;
  for (const auto& s : p) g = std::max(g, s.group + 1);
  return g;
}

void renumber(std::vector<Segment>& p) {
  for (std::size_t i = 0; i < p.size(); ++i) p[i].seg_id = i;
}

std::int64_t max_latency(const std::vector<Segment>& p) {
  std::int64_t m = 0;
  for (const auto& s : p) m = std::max(m, s.stage_latency);
  return m;
}

}  // namespace

std::vector<Segment> initial_pipeline(const TaskDag& dag, const std::vector<TileCost>& costs) {
  std::vector<Segment> out;
  for (const auto& cost : costs) {
    const auto& layer = dag.nodes[cost.layer_id];
    SegmentLayer sl;
    sl.layer_id = layer.id;
    sl.kind = layer.kind;
    sl.slots = cost.t_slots;
    sl.weight_bits = layer.weight_bits;
    if (layer.conv) {
      const auto& c = *layer.conv;
      sl.R = c.kernel_h;
      sl.S = c.kernel_w;
      sl.C = c.in_c;
      sl.W = c.out_w;
      sl.H = c.out_h;
      sl.out_units = c.out_w * c.out_c;
      sl.halo = (c.kernel_h - 1 + 1) / 2;
    } else {
      const auto& a = *layer.attn;
      sl.R = 1;
      sl.S = 1;
      sl.C = a.head_dim;
      sl.W = a.keys;
      sl.H = a.queries;
      sl.out_units = a.keys * a.heads;
      sl.halo = 0;
    }
    Segment seg;
    seg.seg_id = out.size();
    seg.group = out.size();
    seg.members = {layer.id};
    seg.layers = {sl};
    seg.stage_latency = cost.t_slots;
    seg.tiles = cost.tiles_total;
    seg.buffer_need = buffer_or_zero(seg.layers, OuterAxis::H);
    out.push_back(std::move(seg));
  }
  return out;
}

std::int64_t pipeline_work(const std::vector<Segment>& pipeline) {
  std::int64_t w = 0;
  for (const auto& s : pipeline) w += s.stage_latency * s.tiles;
  return w;
}

std::optional<std::vector<Segment>> try_concat(const std::vector<Segment>& p, const BalanceOptions& opt,
                                               std::size_t* at) {
  if (p.size() < 2) return std::nullopt;
  const auto ceiling = max_latency(p);
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    const auto& a = p[k];
    const auto& b = p[k + 1];
    if (!a.splits.empty() || !b.splits.empty()) continue;
    if (a.tiles != b.tiles) continue;
    const auto merged = a.stage_latency + b.stage_latency;
    if (merged > ceiling) continue;
    std::vector<SegmentLayer> layers = a.layers;
    layers.insert(layers.end(), b.layers.begin(), b.layers.end());
    const bool all_conv =
        std::all_of(layers.begin(), layers.end(), [](const SegmentLayer& l) { return l.kind == LayerKind::Conv; });
    if (!all_conv || buffer_size(layers, opt.outer) > opt.buffer_capacity) continue;
    if (!best || merged < p[*best].stage_latency + p[*best + 1].stage_latency) best = k;
  }
  if (!best) return std::nullopt;
  const auto k = *best;
  std::vector<Segment> out(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k));
  Segment merged = p[k];
  const auto& b = p[k + 1];
  merged.group = next_group(p);
  merged.members.insert(merged.members.end(), b.members.begin(), b.members.end());
  merged.layers.insert(merged.layers.end(), b.layers.begin(), b.layers.end());
  merged.stage_latency += b.stage_latency;
  merged.buffer_need = buffer_size(merged.layers, opt.outer);
  out.push_back(std::move(merged));
  out.insert(out.end(), p.begin() + static_cast<std::ptrdiff_t>(k) + 2, p.end());
  renumber(out);
  if (at) *at = k;
  return out;
}

std::optional<std::vector<Segment>> try_split(const std::vector<Segment>& p, const BalanceOptions& opt,
                                              SplitPlan* plan, std::size_t* at) {
  if (p.empty() || p.size() + 1 > opt.max_stages) return std::nullopt;
  std::size_t k = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i].stage_latency > p[k].stage_latency) k = i;
  const auto& seg = p[k];
  if (seg.stage_latency < 2 || seg.parts() * 2 > opt.max_parts) return std::nullopt;

  const bool is_conv =
      std::all_of(seg.layers.begin(), seg.layers.end(), [](const SegmentLayer& l) { return l.kind == LayerKind::Conv; });
  const bool is_attn = std::all_of(seg.layers.begin(), seg.layers.end(),
                                   [](const SegmentLayer& l) { return l.kind == LayerKind::MatMul; });
  if (!is_conv && !is_attn) return std::nullopt;

  // Spatial split keeps whole-channel results per engine; channel split
  // halves the buffer but leaves partial sums to accumulate downstream.
  SplitAxis axis = SplitAxis::H;
  std::vector<SegmentLayer> halves[2] = {seg.layers, seg.layers};
  std::int64_t lo[2] = {0, 0}, hi[2] = {0, 0};
  if (is_attn) {
    for (int part = 0; part < 2; ++part)
      for (auto& l : halves[part]) {
        const auto first = (l.H + 1) / 2;
        l.H = part == 0 ? first : std::max<std::int64_t>(1, l.H - first);
      }
    lo[1] = hi[0] = (seg.layers.front().H + 1) / 2;
    hi[1] = seg.layers.front().H;
  } else {
    auto spatial = seg.layers;
    for (auto& l : spatial) l.W = (l.W + 1) / 2;
    auto channel = seg.layers;
    for (auto& l : channel) l.C = (l.C + 1) / 2;
    if (seg.layers.front().W >= 2 && buffer_size(spatial, opt.outer) <= opt.buffer_capacity) {
      axis = SplitAxis::W;
      for (int part = 0; part < 2; ++part)
        for (std::size_t m = 0; m < seg.layers.size(); ++m) {
          auto& l = halves[part][m];
          const auto first = (seg.layers[m].W + 1) / 2;
          l.W = part == 0 ? first : std::max<std::int64_t>(1, seg.layers[m].W - first);
          l.out_units = std::max<std::int64_t>(1, seg.layers[m].out_units * l.W / seg.layers[m].W);
        }
      lo[1] = hi[0] = (seg.layers.front().W + 1) / 2;
      hi[1] = seg.layers.front().W;
    } else if (seg.layers.front().C >= 2 && buffer_size(channel, opt.outer) <= opt.buffer_capacity) {
      axis = SplitAxis::C;
      for (int part = 0; part < 2; ++part)
        for (std::size_t m = 0; m < seg.layers.size(); ++m) {
          auto& l = halves[part][m];
          const auto first = (seg.layers[m].C + 1) / 2;
          l.C = part == 0 ? first : std::max<std::int64_t>(1, seg.layers[m].C - first);
        }
      lo[1] = hi[0] = (seg.layers.front().C + 1) / 2;
      hi[1] = seg.layers.front().C;
    } else {
      return std::nullopt;
    }
  }

  const auto part_latency = (seg.stage_latency + 1) / 2;
  std::vector<Segment> out(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(k));
  for (int part = 0; part < 2; ++part) {
    Segment s = seg;
    s.layers = halves[part];
    for (auto& l : s.layers) l.slots = (l.slots + 1) / 2;
    s.stage_latency = part_latency;
    s.splits.push_back(SplitInfo{axis, part, 2, axis == SplitAxis::C, lo[part], hi[part]});
    s.buffer_need = buffer_or_zero(s.layers, opt.outer);
    out.push_back(std::move(s));
  }
  out.insert(out.end(), p.begin() + static_cast<std::ptrdiff_t>(k) + 1, p.end());
  renumber(out);
  if (plan) *plan = SplitPlan{seg.members.front(), axis, 2, axis == SplitAxis::C};
  if (at) *at = k;
  return out;
}

BalanceReport balance(std::vector<Segment> pipeline, const BalanceOptions& opt) {
  BalanceReport rep;
  for (const auto& s : pipeline) rep.latencies_before.push_back(s.stage_latency);
  if (pipeline.empty()) {
    rep.converged = true;
    return rep;
  }
  rep.cv_before = coefficient_of_variation(pipeline);
  double cv = rep.cv_before;
  const std::size_t budget = 4 * pipeline.size();

  while (cv > opt.threshold && rep.moves.size() < budget) {
    std::size_t concat_at = 0, split_at = 0;
    SplitPlan plan;
    auto concat = try_concat(pipeline, opt, &concat_at);
    auto split = try_split(pipeline, opt, &plan, &split_at);
    const double cv_concat = concat ? coefficient_of_variation(*concat) : INFINITY;
    const double cv_split = split ? coefficient_of_variation(*split) : INFINITY;
    if (std::min(cv_concat, cv_split) >= cv) {
      rep.fixed_point = true;
      break;
    }
    // ties go to concatenation, which frees an engine
    if (cv_concat <= cv_split) {
      pipeline = std::move(*concat);
      cv = cv_concat;
      rep.moves.push_back({MoveKind::Concat, concat_at, cv, std::nullopt});
    } else {
      pipeline = std::move(*split);
      cv = cv_split;
      rep.moves.push_back({MoveKind::Split, split_at, cv, plan});
    }
  }
  rep.cv_after = cv;
  rep.converged = cv <= opt.threshold;
  for (const auto& s : pipeline) rep.latencies_after.push_back(s.stage_latency);
  rep.pipeline = std::move(pipeline);
  return rep;
}

}  // namespace isosched
