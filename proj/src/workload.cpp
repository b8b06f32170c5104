#include "isosched/workload.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "isosched/error.hpp"

namespace isosched {

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& field, const std::string& msg) {
  throw Error(ErrorCode::ParseError, "cli",
              "line " + std::to_string(line) + (field.empty() ? "" : ", field '" + field + "'") + ": " + msg);
}

std::int64_t to_int(const std::string& text, std::size_t line, const std::string& field) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    parse_fail(line, field, "expected an integer, got '" + text + "'");
  }
  if (used != text.size()) parse_fail(line, field, "expected an integer, got '" + text + "'");
  return v;
}

class FieldSet {
 public:
  FieldSet(std::istringstream& in, std::size_t line) : line_(line) {
    std::string tok;
    while (in >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) parse_fail(line, tok, "expected key=value");
      const auto key = tok.substr(0, eq);
      if (!values_.emplace(key, tok.substr(eq + 1)).second) parse_fail(line, key, "given twice");
    }
  }

  std::int64_t integer(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) parse_fail(line_, key, "required field missing");
    used_.insert(key);
    return to_int(it->second, line_, key);
  }

  std::optional<std::int64_t> optional_integer(const std::string& key) {
    if (!values_.count(key)) return std::nullopt;
    return integer(key);
  }

  std::optional<std::string> text(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  void finish() const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) parse_fail(line_, k, "unknown field");
  }

 private:
  std::size_t line_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

ComplexityClass class_from(std::string s, std::size_t line) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "simple") return ComplexityClass::Simple;
  if (s == "middle") return ComplexityClass::Middle;
  if (s == "complex") return ComplexityClass::Complex;
  parse_fail(line, "workload", "unknown class '" + s + "'");
}

}  // namespace

ComplexityClass classify(const WorkloadSet& w) {
  std::size_t nodes = 0, edges = 0;
  for (const auto& t : w.tasks) {
    nodes = std::max(nodes, t.nodes.size());
    edges = std::max(edges, t.edges.size());
  }
  if (nodes >= 500 && edges >= 1000) return ComplexityClass::Complex;
  if (nodes <= 40) return ComplexityClass::Simple;
  return ComplexityClass::Middle;
}

WorkloadSet parse_workload(std::istream& is) {
  WorkloadSet w;
  std::optional<ComplexityClass> declared;
  TaskDag* task = nullptr;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(is, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream in(raw);
    std::string word;
    if (!(in >> word)) continue;
    if (word == "workload") {
      std::string cls;
      if (!(in >> cls)) parse_fail(line, "workload", "missing class");
      declared = class_from(cls, line);
    } else if (word == "task") {
      std::string id;
      if (!(in >> id)) parse_fail(line, "task", "missing task id");
      w.tasks.emplace_back();
      task = &w.tasks.back();
      task->task_id = static_cast<std::size_t>(to_int(id, line, "task"));
      FieldSet f(in, line);
      task->deadline = f.integer("deadline");
      task->name = f.text("name").value_or("task" + id);
      task->arrival = f.optional_integer("arrival").value_or(0);
      task->priority = f.optional_integer("priority").value_or(1);
      task->critical = f.optional_integer("critical").value_or(0) != 0;
      task->sla_class = f.text("class").value_or("vision");
      if (task->sla_class != "vision" && task->sla_class != "translation")
        parse_fail(line, "class", "expected vision or translation");
      f.finish();
    } else if (word == "layer" || word == "edge") {
      if (!task) parse_fail(line, word, "appears before any task");
      if (word == "edge") {
        std::string a, b, extra;
        if (!(in >> a >> b)) parse_fail(line, "edge", "expected two layer ids");
        if (in >> extra) parse_fail(line, "edge", "unexpected '" + extra + "'");
        task->edges.emplace_back(static_cast<std::size_t>(to_int(a, line, "edge")),
                                 static_cast<std::size_t>(to_int(b, line, "edge")));
        continue;
      }
      std::string id, kind;
      if (!(in >> id >> kind)) parse_fail(line, "layer", "expected '<id> <kind>'");
      const auto lid = static_cast<std::size_t>(to_int(id, line, "layer"));
      FieldSet f(in, line);
      LayerNode node;
      if (kind == "conv") {
        ConvDims d{f.integer("out_w"), f.integer("out_h"), f.integer("out_c"),
                   f.integer("kh"),    f.integer("kw"),    f.integer("in_c")};
        node = LayerNode::make_conv(lid, d);
      } else if (kind == "matmul") {
        AttnDims d{f.integer("keys"), f.integer("heads"), f.integer("head_dim"), f.integer("queries")};
        node = LayerNode::make_matmul(lid, d);
      } else if (kind == "elementwise") {
        node = LayerNode::make_elementwise(lid);
      } else {
        parse_fail(line, "kind", "unknown layer kind '" + kind + "'");
      }
      node.weight_bits = f.optional_integer("weight_bits").value_or(0);
      node.fill_cycles = f.optional_integer("fill");
      node.latency_override = f.optional_integer("latency");
      f.finish();
      task->nodes.push_back(std::move(node));
    } else if (word == "end") {
      task = nullptr;
    } else {
      parse_fail(line, "", "unknown record '" + word + "'");
    }
  }
  w.complexity = declared.value_or(classify(w));
  try {
    check_invariants(w);
    for (const auto& t : w.tasks) check_invariants(t);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvariantError) throw;
    throw Error(ErrorCode::InvariantError, "cli", e.what());
  }
  return w;
}

WorkloadSet load_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cli", "cannot open workload file " + path.string());
  return parse_workload(in);
}

void write_workload(std::ostream& os, const WorkloadSet& w) {
  os << "workload " << to_string(w.complexity) << '\n';
  for (const auto& t : w.tasks) {
    os << "task " << t.task_id << " name=" << t.name << " deadline=" << t.deadline << " arrival=" << t.arrival
       << " priority=" << t.priority << " critical=" << (t.critical ? 1 : 0) << " class=" << t.sla_class << '\n';
    for (const auto& n : t.nodes) {
      os << "layer " << n.id << ' ';
      if (n.conv) {
        const auto& c = *n.conv;
        os << "conv out_w=" << c.out_w << " out_h=" << c.out_h << " out_c=" << c.out_c << " kh=" << c.kernel_h
           << " kw=" << c.kernel_w << " in_c=" << c.in_c;
      } else if (n.attn) {
        const auto& a = *n.attn;
        os << "matmul keys=" << a.keys << " heads=" << a.heads << " head_dim=" << a.head_dim
           << " queries=" << a.queries;
      } else {
        os << "elementwise";
      }
      if (n.compute_bearing() && n.weight_bits) os << " weight_bits=" << n.weight_bits;
      if (n.fill_cycles) os << " fill=" << *n.fill_cycles;
      if (n.latency_override) os << " latency=" << *n.latency_override;
      os << '\n';
    }
    for (const auto& [a, b] : t.edges) os << "edge " << a << ' ' << b << '\n';
    os << "end\n";
  }
}

PlatformConfig parse_platform(std::istream& is) {
  PlatformConfig p = platform_preset("mesh4");
  std::string raw;
  std::size_t line = 0;
  bool any = false;
  while (std::getline(is, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream in(raw);
    std::string key, value, extra;
    if (!(in >> key)) continue;
    if (!(in >> value)) parse_fail(line, key, "missing value");
    if (in >> extra) parse_fail(line, key, "unexpected '" + extra + "'");
    auto real = [&] {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used == value.size()) return v;
      } catch (const std::exception&) {
      }
      parse_fail(line, key, "expected a number, got '" + value + "'");
    };
    auto integer = [&] { return to_int(value, line, key); };
    if (key == "preset") {
      if (any) parse_fail(line, key, "must come before other keys");
      try {
        p = platform_preset(value);
      } catch (const Error& e) {
        parse_fail(line, key, e.what());
      }
    } else if (key == "name") p.name = value;
    else if (key == "mesh_w") p.mesh_w = static_cast<std::int32_t>(integer());
    else if (key == "mesh_h") p.mesh_h = static_cast<std::int32_t>(integer());
    else if (key == "pe_count") p.engine.pe_count = integer();
    else if (key == "clock_hz") p.engine.clock_hz = real();
    else if (key == "link_bw") p.link_bw = integer();
    else if (key == "reconfig_bw") p.reconfig_bw = integer();
    else if (key == "engine_buffer") p.engine_buffer = integer();
    else if (key == "element_bits") p.element_bits = integer();
    else if (key == "dram_bw_bits") p.dram_bw_bits = integer();
    else if (key == "hop_pj_per_bit") p.hop_pj_per_bit = real();
    else if (key == "dram_pj_per_bit") p.dram_pj_per_bit = real();
    else if (key == "mac_pj") p.mac_pj = real();
    else parse_fail(line, key, "unknown key");
    any = key != "preset" || any;
  }
  try {
    check_invariants(p);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvariantError) throw;
    throw Error(ErrorCode::InvariantError, "cli", e.what());
  }
  return p;
}

PlatformConfig load_platform(const std::string& preset_or_path) {
  const auto names = platform_preset_names();
  if (std::find(names.begin(), names.end(), preset_or_path) != names.end()) return platform_preset(preset_or_path);
  std::ifstream in(preset_or_path);
  if (!in) throw Error(ErrorCode::ParseError, "cli", "'" + preset_or_path + "' is neither a preset nor a readable file");
  return parse_platform(in);
}

// ---- synthetic generation ---------------------------------------------------------

namespace {

class Builder {
 public:
  explicit Builder(TaskDag& dag) : dag_(dag) {}

  std::size_t conv(std::int64_t w, std::int64_t c_out, std::int64_t k, std::int64_t c_in) {
    auto n = LayerNode::make_conv(dag_.nodes.size(), ConvDims{w, w, c_out, k, k, c_in}, k * k * c_in * c_out * 8);
    dag_.nodes.push_back(n);
    return n.id;
  }
  std::size_t matmul(std::int64_t width, std::int64_t reduce, std::int64_t rows) {
    auto n = LayerNode::make_matmul(dag_.nodes.size(), AttnDims{width, 1, reduce, rows}, width * reduce * 8);
    dag_.nodes.push_back(n);
    return n.id;
  }
  std::size_t elementwise() {
    auto n = LayerNode::make_elementwise(dag_.nodes.size());
    dag_.nodes.push_back(n);
    return n.id;
  }
  void edge(std::size_t a, std::size_t b) { dag_.edges.emplace_back(a, b); }

 private:
  TaskDag& dag_;
};

void simple_cnn(TaskDag& dag, std::size_t nodes, double skip, std::mt19937_64& rng) {
  Builder b(dag);
  std::uniform_int_distribution<int> chan(1, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::int64_t c = 8 * chan(rng);
  std::size_t prev = b.conv(16, c, 3, 3);
  std::optional<std::size_t> skip_from;
  while (dag.nodes.size() < nodes) {
    if (skip_from && u(rng) < skip && dag.nodes.size() + 2 <= nodes) {
      const auto add = b.elementwise();
      b.edge(prev, add);
      b.edge(*skip_from, add);
      prev = add;
      skip_from.reset();
      continue;
    }
    const std::int64_t c_out = 8 * chan(rng);
    const std::int64_t k = u(rng) < 0.7 ? 3 : 1;
    const auto next = b.conv(16, c_out, k, c);
    b.edge(prev, next);
    if (c_out == c && !skip_from) skip_from = prev;
    c = c_out;
    prev = next;
  }
}

void residual_cnn(TaskDag& dag, std::size_t nodes, std::mt19937_64& rng) {
  Builder b(dag);
  std::uniform_int_distribution<int> coin(0, 3);
  std::int64_t w = 32, c = 16;
  std::size_t x = b.conv(w, c, 3, 3);
  while (dag.nodes.size() + 4 <= nodes) {
    if (coin(rng) == 0 && w > 8) {
      w /= 2;
      const auto down = b.conv(w, c * 2, 3, c);
      b.edge(x, down);
      c *= 2;
      x = down;
      continue;
    }
    const auto a = b.conv(w, c, 3, c);
    const auto r = b.elementwise();
    const auto bb = b.conv(w, c, 3, c);
    const auto add = b.elementwise();
    b.edge(x, a);
    b.edge(a, r);
    b.edge(r, bb);
    b.edge(bb, add);
    b.edge(x, add);
    x = add;
  }
  while (dag.nodes.size() < nodes) {
    const auto n = b.conv(w, c, 1, c);
    b.edge(x, n);
    x = n;
  }
}

void transformer(TaskDag& dag, std::size_t nodes, std::mt19937_64& rng) {
  Builder b(dag);
  std::uniform_int_distribution<int> pick(1, 2);
  const std::int64_t seq = 16 * pick(rng), d_head = 8 * pick(rng);
  const int heads = 4;
  const std::int64_t d_model = d_head * heads;
  std::size_t x = b.matmul(d_model, d_model, seq);
  while (dag.nodes.size() < nodes) {
    const auto pos = b.elementwise();
    const auto mask = b.elementwise();
    b.edge(x, pos);
    b.edge(x, mask);
    const auto concat = b.elementwise();
    for (int h = 0; h < heads; ++h) {
      const auto q = b.matmul(d_head, d_model, seq), k = b.matmul(d_head, d_model, seq),
                 v = b.matmul(d_head, d_model, seq);
      b.edge(x, q);
      b.edge(x, k);
      b.edge(x, v);
      const auto rq = b.elementwise(), rk = b.elementwise();
      b.edge(q, rq);
      b.edge(pos, rq);
      b.edge(k, rk);
      b.edge(pos, rk);
      const auto s = b.matmul(seq, d_head, seq);
      b.edge(rq, s);
      b.edge(rk, s);
      b.edge(mask, s);
      const auto p = b.elementwise();
      b.edge(s, p);
      const auto o = b.matmul(d_head, seq, seq);
      b.edge(p, o);
      b.edge(v, o);
      b.edge(o, concat);
    }
    const auto proj = b.matmul(d_model, d_model, seq);
    b.edge(concat, proj);
    const auto add1 = b.elementwise();
    b.edge(proj, add1);
    b.edge(x, add1);
    const auto ln1 = b.elementwise();
    b.edge(add1, ln1);
    const auto gate = b.matmul(2 * d_model, d_model, seq), up = b.matmul(2 * d_model, d_model, seq);
    b.edge(ln1, gate);
    b.edge(ln1, up);
    const auto act = b.elementwise();
    b.edge(gate, act);
    const auto mul = b.elementwise();
    b.edge(act, mul);
    b.edge(up, mul);
    const auto down = b.matmul(d_model, 2 * d_model, seq);
    b.edge(mul, down);
    const auto add2 = b.elementwise();
    b.edge(down, add2);
    b.edge(add1, add2);
    const auto ln2 = b.elementwise();
    b.edge(add2, ln2);
    x = ln2;
  }
  const auto head = b.matmul(d_model, d_model, seq);
  b.edge(x, head);
}

std::int64_t serial_slots(const TaskDag& dag, const EngineSpec& engine, std::int64_t timeslot) {
  std::int64_t s = 0;
  for (const auto& c : tile_costs(dag, engine, timeslot)) s += c.tiles_total * c.t_slots;
  return s;
}

}  // namespace

WorkloadSet generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WorkloadSet w;
  w.complexity = spec.cls;
  std::size_t lo = spec.min_nodes, hi = spec.max_nodes;
  if (lo == 0 || hi == 0) {
    switch (spec.cls) {
      case ComplexityClass::Simple: lo = 10, hi = 30; break;
      case ComplexityClass::Middle: lo = 60, hi = 150; break;
      case ComplexityClass::Complex: lo = 640, hi = 720; break;
    }
  }
  std::uniform_int_distribution<std::size_t> size(lo, std::max(lo, hi));
  std::uniform_int_distribution<std::int64_t> prio(spec.min_priority, std::max(spec.min_priority, spec.max_priority));
  std::uniform_real_distribution<double> factor(spec.min_deadline_factor,
                                                std::max(spec.min_deadline_factor, spec.max_deadline_factor));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  for (std::size_t k = 0; k < spec.tasks; ++k) {
    TaskDag dag;
    dag.task_id = k;
    const auto n = size(rng);
    switch (spec.cls) {
      case ComplexityClass::Simple:
        dag.name = "cnn" + std::to_string(k);
        simple_cnn(dag, n, spec.skip_probability, rng);
        break;
      case ComplexityClass::Middle:
        dag.name = "resnet" + std::to_string(k);
        residual_cnn(dag, n, rng);
        break;
      case ComplexityClass::Complex:
        dag.name = "transformer" + std::to_string(k);
        dag.sla_class = "translation";
        transformer(dag, n, rng);
        break;
    }
    dag.priority = prio(rng);
    dag.critical = u(rng) < spec.critical_fraction;
    dag.arrival = static_cast<std::int64_t>(k) * spec.arrival_spacing;
    w.tasks.push_back(std::move(dag));
  }
  const auto timeslot = base_timeslot(w, spec.engine);
  for (auto& t : w.tasks)
    t.deadline = std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                               std::ceil(factor(rng) * static_cast<double>(serial_slots(t, spec.engine, timeslot)))));
  check_invariants(w);
  return w;
}

}  // namespace isosched
