#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "doctest.h"
#include "isosched/error.hpp"
#include "isosched/workload.hpp"
#include "json.hpp"

using namespace isosched;
namespace fs = std::filesystem;

namespace {

WorkloadSet parse(const std::string& text) {
  std::istringstream is(text);
  return parse_workload(is);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("isosched_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int cli(const std::string& args, const fs::path& cwd = fs::temp_directory_path()) {
  const auto cmd = "cd '" + cwd.string() + "' && '" + std::string(ISOSCHED_CLI) + "' " + args + " > cli.log 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

bool connected(const TaskDag& d) {
  std::vector<std::vector<std::size_t>> adj(d.nodes.size());
  for (const auto& [a, b] : d.edges) adj[a].push_back(b), adj[b].push_back(a);
  std::vector<bool> seen(d.nodes.size(), false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    for (auto v : adj[u])
      if (!seen[v]) seen[v] = true, ++count, q.push(v);
  }
  return count == d.nodes.size();
}

const std::string kMinimal = std::string(ISOSCHED_DATA) + "/minimal.txt";
const std::string kArvr = std::string(ISOSCHED_DATA) + "/arvr_mix.txt";

}  // namespace

TEST_CASE("minimal file parses to one task") {
  const auto w = load_workload(kMinimal);
  REQUIRE(w.tasks.size() == 1);
  CHECK(w.tasks[0].nodes.size() == 3);
  CHECK(w.tasks[0].deadline == 64);
  CHECK(w.tasks[0].nodes[2].kind == LayerKind::Elementwise);
  CHECK(w.tasks[0].nodes[1].conv->in_c == 8);
}

TEST_CASE("cyclic edges name the cycle") {
  const std::string text =
      "workload Simple\ntask 0 deadline=10\nlayer 0 conv out_w=1 out_h=1 out_c=1 kh=1 kw=1 in_c=1\n"
      "layer 1 elementwise\nedge 0 1\nedge 1 0\nend\n";
  try {
    parse(text);
    FAIL("expected InvariantError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvariantError);
    CHECK(std::string(e.what()).find("cycle") != std::string::npos);
    CHECK(std::string(e.what()).find("0") != std::string::npos);
  }
}

TEST_CASE("AR/VR mix parses as Simple") {
  const auto w = load_workload(kArvr);
  CHECK(w.tasks.size() == 3);
  CHECK(w.complexity == ComplexityClass::Simple);
  CHECK(classify(w) == ComplexityClass::Simple);
  std::size_t critical = 0;
  for (const auto& t : w.tasks) critical += t.critical ? 1 : 0;
  CHECK(critical == 1);
}

TEST_CASE("parse errors carry line and field") {
  const std::string bad = "workload Simple\ntask 0 deadline=ten\nend\n";
  try {
    parse(bad);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("deadline") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("workload Simple\ntask 0 deadline=5 colour=red\nend\n"), Error);
  CHECK_THROWS_AS(parse("workload Simple\nlayer 0 elementwise\n"), Error);
  CHECK_THROWS_AS(parse("workload Simple\ntask 0 deadline=5\nlayer 0 conv out_w=1\nend\n"), Error);
}

TEST_CASE("write then parse is the identity") {
  for (auto cls : {ComplexityClass::Simple, ComplexityClass::Middle}) {
    SyntheticSpec spec;
    spec.cls = cls;
    const auto w = generate_synthetic(spec, 4);
    std::stringstream ss;
    write_workload(ss, w);
    const auto back = parse_workload(ss);
    REQUIRE(back.tasks.size() == w.tasks.size());
    std::stringstream again;
    write_workload(again, back);
    std::stringstream first;
    write_workload(first, w);
    CHECK(first.str() == again.str());
  }
}

TEST_CASE("platform files override a preset") {
  std::istringstream is("preset mesh2\n# comment\nlink_bw 16\nmesh_w 3\n");
  const auto p = parse_platform(is);
  CHECK(p.mesh_w == 3);
  CHECK(p.mesh_h == 2);
  CHECK(p.link_bw == 16);
  std::istringstream bad("link_bw sixteen\n");
  CHECK_THROWS_AS(parse_platform(bad), Error);
  CHECK(load_platform("mesh8").engine_count() == 64);
}

TEST_CASE("synthetic generator classes") {
  SyntheticSpec simple;
  const auto s = generate_synthetic(simple, 1);
  CHECK(s.complexity == ComplexityClass::Simple);
  for (const auto& t : s.tasks) {
    CHECK(t.nodes.size() >= 10);
    CHECK(t.nodes.size() <= 40);
    CHECK(t.edges.size() + 5 >= t.nodes.size());
    CHECK(connected(t));
    CHECK(topo_sort(t).size() == t.nodes.size());
  }

  SyntheticSpec complex;
  complex.cls = ComplexityClass::Complex;
  complex.tasks = 1;
  const auto c = generate_synthetic(complex, 1);
  CHECK(c.complexity == ComplexityClass::Complex);
  for (const auto& t : c.tasks) {
    CHECK(t.nodes.size() >= 500);
    CHECK(t.edges.size() >= 1000);
    CHECK(connected(t));
    CHECK(topo_sort(t).size() == t.nodes.size());
    CHECK(std::any_of(t.nodes.begin(), t.nodes.end(), [](const LayerNode& l) { return l.kind == LayerKind::MatMul; }));
  }
  CHECK(classify(c) == ComplexityClass::Complex);

  SyntheticSpec middle;
  middle.cls = ComplexityClass::Middle;
  CHECK(classify(generate_synthetic(middle, 2)) == ComplexityClass::Middle);
}

TEST_CASE("generator is deterministic per seed") {
  for (auto cls : {ComplexityClass::Simple, ComplexityClass::Middle, ComplexityClass::Complex}) {
    SyntheticSpec spec;
    spec.cls = cls;
    spec.tasks = 2;
    std::stringstream a, b, c;
    write_workload(a, generate_synthetic(spec, 9));
    write_workload(b, generate_synthetic(spec, 9));
    write_workload(c, generate_synthetic(spec, 10));
    CHECK(a.str() == b.str());
    CHECK(a.str() != c.str());
  }
}

TEST_CASE("cli: empty-machine single task") {
  const auto dir = scratch("single");
  CHECK(cli("schedule --platform mesh4 --workload " + kMinimal + " --out out", dir) == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  CHECK(report["sim"]["sla_rate"].get<double>() == 1.0);
  CHECK(!report["config_hash"].get<std::string>().empty());
  // nothing but the output directory and the captured log appear in the working directory
  std::set<std::string> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.insert(e.path().filename().string());
  CHECK(entries == std::set<std::string>{"cli.log", "out"});
}

TEST_CASE("cli: contention scenario preempts downstream stages") {
  const auto dir = scratch("contention");
  REQUIRE(cli("gen-workload --class contention --platform mesh2 --seed 3 --out gen", dir) == 0);
  CHECK(cli("schedule --platform mesh2 --workload gen/workload.txt --seed 3 --out run", dir) == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "run" / "report.json"));
  bool preempted = false;
  for (const auto& a : report["audit"])
    if (a["mode"] == "preempt") {
      preempted = true;
      CHECK(a["deadline_met"].get<bool>());
      for (const auto& c : a["claimed"]) CHECK(c["stage"].get<int>() >= 1);
    }
  CHECK(preempted);
}

TEST_CASE("cli: impossible deadline exits nonzero") {
  const auto dir = scratch("impossible");
  {
    std::ofstream os(dir / "w.txt");
    os << "workload Simple\ntask 0 deadline=2\n"
          "layer 0 conv out_w=8 out_h=16 out_c=8 kh=3 kw=3 in_c=8\n"
          "layer 1 conv out_w=8 out_h=16 out_c=8 kh=3 kw=3 in_c=8\nedge 0 1\nend\n";
  }
  CHECK(cli("schedule --platform mesh4 --workload w.txt --out out", dir) == 2);
  CHECK(slurp(dir / "cli.log").find("Unschedulable") != std::string::npos);
}

TEST_CASE("cli: identical config and seed give byte-identical reports") {
  const auto dir = scratch("determinism");
  REQUIRE(cli("simulate --platform mesh4 --workload " + kArvr + " --seed 11 --lambda 0.002 --arrivals 30 --out a", dir) == 0);
  REQUIRE(cli("simulate --platform mesh4 --workload " + kArvr + " --seed 11 --lambda 0.002 --arrivals 30 --out b", dir) == 0);
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
  REQUIRE(cli("simulate --platform mesh4 --workload " + kArvr + " --seed 12 --lambda 0.002 --arrivals 30 --out c", dir) == 0);
  CHECK(slurp(dir / "a" / "report.json") != slurp(dir / "c" / "report.json"));
}

TEST_CASE("cli: schedule table validates") {
  const auto dir = scratch("validate");
  REQUIRE(cli("schedule --platform mesh4 --workload " + kArvr + " --out out", dir) == 0);
  CHECK(cli("validate --platform mesh4 --workload " + kArvr + " --table out/schedule.txt --out v", dir) == 0);
  const auto v = nlohmann::json::parse(slurp(dir / "v" / "validation.json"));
  CHECK(v["violations"].size() == 0);
}
